import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // suites spawn real service processes and measure frame pacing, so
    // they must not compete for CPU or ports
    fileParallelism: false,
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
