import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 15_000,
    hookTimeout: 120_000,
    // the e2e suite owns a single server process; keep files sequential
    fileParallelism: false,
  },
});
