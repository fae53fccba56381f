import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 60_000,
    pool: "forks",
    // e2e drives a real service with wall-clock pacing; keep files serial
    // so parallel workers cannot starve its event reader
    fileParallelism: false,
  },
});
