import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    globalSetup: "./test-support/global-setup.ts",
    testTimeout: 30_000,
    hookTimeout: 120_000,
    // One worker: the e2e suite talks to a single shared service process.
    pool: "threads",
    poolOptions: { threads: { singleThread: true } },
  },
});
