import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { MockServer, queueRow } from "./mock.js";

describe("ApiClient", () => {
  it("builds query strings for the queue", async () => {
    const server = new MockServer().on("GET", "/customers", {
      status: 200,
      body: { rows: [queueRow("C1", 0.9)], total: 1, model_version: 1 },
    });
    const api = new ApiClient("", server.fetch);
    await api.customers({ sort: "risk", limit: 5, offset: 10, min_score: 0.5 });
    expect(server.calls[0].url).toBe(
      "/customers?sort=risk&limit=5&offset=10&min_score=0.5",
    );
  });

  it("posts JSON bodies for label submissions", async () => {
    const server = new MockServer().on("POST", "/customers/C1/label", {
      status: 200,
      body: { event_id: 1, changes_since_train: 1 },
    });
    const api = new ApiClient("", server.fetch);
    await api.submitLabel("C1", 1, "analyst");
    expect(server.calls[0].body).toEqual({ label: 1, source: "analyst" });
  });

  it("wraps error payloads in ApiError with the status code", async () => {
    const server = new MockServer().on("GET", "/model", {
      status: 404,
      body: { error: "no trained model is active" },
    });
    const api = new ApiClient("", server.fetch);
    await expect(api.model()).rejects.toThrowError(ApiError);
    await expect(api.model()).rejects.toMatchObject({
      status: 404,
      message: "no trained model is active",
    });
  });

  it("encodes customer ids in paths", async () => {
    const server = new MockServer().on("GET", "/customers/C%201/score", {
      status: 200,
      body: {
        cust_id: "C 1",
        score: 0.1,
        model_version: 1,
        top_features: [],
        base_value: 0,
        shap_space: "margin",
      },
    });
    const api = new ApiClient("", server.fetch);
    const res = await api.score("C 1");
    expect(res.cust_id).toBe("C 1");
  });
});
