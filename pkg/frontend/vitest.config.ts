import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 180_000,
    hookTimeout: 60_000,
    // The overhead suite times a live workload; concurrent test files
    // spawning CLI subprocesses would distort its samples.
    fileParallelism: false,
  },
});
