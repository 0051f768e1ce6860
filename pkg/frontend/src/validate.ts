// Client-side patch-form invariant checks, mirroring what the service
// enforces on confirm so problems surface before any network call.

import type { PatchFormFields } from "./types.js";

export const FLAG_FIELDS = [
  "NTG_prior",
  "pale",
  "sweaty",
  "pupil_reactive_left",
  "pupil_reactive_right",
] as const;

const CTAS_VALUES = new Set(["1", "2", "3", "4", "5"]);

/** Rebuild derived fields: whenever systolic and diastolic are present the
 * BP string is recomputed as "sys / dia" so edits can't break the invariant. */
export function maintainInvariants(fields: PatchFormFields): PatchFormFields {
  const out: PatchFormFields = { ...fields };
  for (const key of Object.keys(out)) {
    if (out[key] === "") {
      delete out[key];
    }
  }
  if (out.systolic !== undefined && out.diastolic !== undefined) {
    out.BP = `${out.systolic} / ${out.diastolic}`;
  }
  return out;
}

/** Field-level validation errors; an empty object means the form may be
 * submitted. */
export function validateForm(fields: PatchFormFields): Record<string, string> {
  const errors: Record<string, string> = {};
  if (fields.BP !== undefined) {
    if (fields.systolic === undefined || fields.diastolic === undefined) {
      errors.BP = "BP requires systolic and diastolic";
    } else if (fields.BP !== `${fields.systolic} / ${fields.diastolic}`) {
      errors.BP = "BP must equal 'systolic / diastolic'";
    }
  }
  if (fields.gender !== undefined && fields.gender !== "M" && fields.gender !== "F") {
    errors.gender = "gender must be M or F";
  }
  if (fields.CTAS !== undefined && !CTAS_VALUES.has(fields.CTAS)) {
    errors.CTAS = "CTAS must be 1-5";
  }
  for (const flag of FLAG_FIELDS) {
    const value = fields[flag];
    if (value !== undefined && value !== "1") {
      errors[flag] = "flag fields may only hold '1'";
    }
  }
  return errors;
}
