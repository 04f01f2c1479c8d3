/** Cluster table and the rotatable 3D scatter over the golden fixture. */

import { afterAll, beforeAll, expect, test } from "vitest";

import { ApiClient } from "../src/api.js";
import { ClusterPcaExplorer } from "../src/explorer.js";
import {
  GOLDEN_EXPORT,
  allocatePort,
  startFixtureServer,
  type RunningServer,
} from "./server.js";

const SERIES = "Mercy Point";

let server: RunningServer;

beforeAll(async () => {
  server = await startFixtureServer({ port: allocatePort(), golden: GOLDEN_EXPORT });
});

afterAll(() => server.stop());

function positions(host: HTMLElement): string[] {
  return Array.from(host.querySelectorAll<HTMLElement>(".pca-point")).map(
    (dot) => dot.getAttribute("style") ?? "",
  );
}

test("clusters and scatter render for the golden season", async () => {
  const host = document.createElement("div");
  document.body.append(host);
  const explorer = new ClusterPcaExplorer(new ApiClient(server.baseUrl), host, () => {});
  await explorer.load(SERIES);

  // Six embedded arcs, none similar enough to cluster together.
  expect(host.querySelectorAll(".cluster-row")).toHaveLength(6);
  expect(host.querySelectorAll(".pca-point")).toHaveLength(6);
  expect(host.querySelector(".pca-axes")!.textContent).toContain("variance explained");
  host.remove();
});

test("dragging rotates the projection", async () => {
  const host = document.createElement("div");
  document.body.append(host);
  const explorer = new ClusterPcaExplorer(new ApiClient(server.baseUrl), host, () => {});
  await explorer.load(SERIES);

  const before = positions(host);
  explorer.rotateBy(0.5, 0.2);
  const after = positions(host);
  expect(after).not.toEqual(before);
  expect(after).toHaveLength(before.length);
  host.remove();
});

test("selecting two points cross-links to the merge view", async () => {
  const host = document.createElement("div");
  document.body.append(host);
  const compared: [string, string][] = [];
  const explorer = new ClusterPcaExplorer(
    new ApiClient(server.baseUrl), host,
    (keep, remove) => compared.push([keep, remove]),
  );
  await explorer.load(SERIES);

  const dots = host.querySelectorAll<HTMLElement>(".pca-point");
  dots[0]!.click();
  const refreshed = host.querySelectorAll<HTMLElement>(".pca-point");
  refreshed[1]!.click();

  const compare = host.querySelector<HTMLButtonElement>(".pca-compare")!;
  expect(compare.disabled).toBe(false);
  compare.click();
  expect(compared).toHaveLength(1);
  expect(compared[0]![0]).not.toBe(compared[0]![1]);
  host.remove();
});
