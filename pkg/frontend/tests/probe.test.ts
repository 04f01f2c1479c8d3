/** Sanity probe: happy-dom fetch reaching the real fixture server. */

import { afterAll, beforeAll, expect, test } from "vitest";

import { ApiClient } from "../src/api.js";
import { allocatePort, startFixtureServer, type RunningServer } from "./server.js";

let server: RunningServer;

beforeAll(async () => {
  server = await startFixtureServer({
    port: allocatePort(),
    series: { name: "Probe Show", genre: "drama" },
  });
});

afterAll(() => server.stop());

test("health endpoint reachable from the test environment", async () => {
  const api = new ApiClient(server.baseUrl);
  expect(await api.health()).toEqual({ status: "ok" });
});

test("mutating requests work cross-origin", async () => {
  const api = new ApiClient(server.baseUrl);
  const character = await api.createCharacter({
    preferred_name: "Probe Person",
    series: "Probe Show",
  });
  expect(character.preferred_name).toBe("Probe Person");
  const updated = await api.updateCharacter(character.character_id, {
    alternative_names: ["PP"],
  });
  expect(updated.alternative_names).toEqual(["PP"]);
  await api.deleteCharacter(character.character_id);
});
