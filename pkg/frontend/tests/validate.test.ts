import { describe, expect, it } from "vitest";

import { maintainInvariants, validateForm } from "../src/validate.js";

describe("maintainInvariants", () => {
  it("recomputes BP from systolic and diastolic", () => {
    const out = maintainInvariants({ systolic: "154", diastolic: "90" });
    expect(out.BP).toBe("154 / 90");
  });

  it("repairs an edited systolic without touching other fields", () => {
    const out = maintainInvariants({
      BP: "154 / 90",
      systolic: "160",
      diastolic: "90",
      pulse: "88",
    });
    expect(out.BP).toBe("160 / 90");
    expect(out.pulse).toBe("88");
  });

  it("drops cleared fields instead of sending empty strings", () => {
    const out = maintainInvariants({ age: "", pulse: "90" });
    expect(out).toEqual({ pulse: "90" });
  });
});

describe("validateForm", () => {
  it("accepts a consistent form", () => {
    expect(
      validateForm({
        BP: "120 / 80",
        systolic: "120",
        diastolic: "80",
        gender: "F",
        CTAS: "2",
        pale: "1",
      }),
    ).toEqual({});
  });

  it("flags BP without components", () => {
    expect(validateForm({ BP: "120 / 80" })).toHaveProperty("BP");
  });

  it("flags mismatched BP string", () => {
    const errors = validateForm({ BP: "120 / 80", systolic: "121", diastolic: "80" });
    expect(errors).toHaveProperty("BP");
  });

  it("restricts gender to the M/F domain", () => {
    expect(validateForm({ gender: "Q" })).toHaveProperty("gender");
    expect(validateForm({ gender: "M" })).toEqual({});
  });

  it("restricts CTAS to 1-5 and flags to '1'", () => {
    expect(validateForm({ CTAS: "7" })).toHaveProperty("CTAS");
    expect(validateForm({ sweaty: "yes" })).toHaveProperty("sweaty");
    expect(validateForm({ sweaty: "1" })).toEqual({});
  });
});
