import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      // Same origin as the spawned backend, so the window's fetch may reach it.
      happyDOM: { url: "http://127.0.0.1:8931" },
    },
    include: ["tests/**/*.test.ts"],
    testTimeout: 30000,
    hookTimeout: 60000,
    // The e2e suite drives one shared backend; keep files sequential.
    fileParallelism: false,
  },
});
