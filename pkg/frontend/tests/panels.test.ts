/** Merge-view conflict rendering and the character panel workflows. */

import { afterAll, beforeAll, expect, test } from "vitest";

import { ApiClient } from "../src/api.js";
import { CharacterPanel } from "../src/characterPanel.js";
import { MergeView } from "../src/mergeView.js";
import { allocatePort, startFixtureServer, type RunningServer } from "./server.js";

const SERIES = "Mercy Point";

let server: RunningServer;
let api: ApiClient;

beforeAll(async () => {
  server = await startFixtureServer({
    port: allocatePort(),
    series: { name: SERIES, genre: "medical drama" },
  });
  api = new ApiClient(server.baseUrl);
});

afterAll(() => server.stop());

test("merge conflicts are rendered inline, state unchanged", async () => {
  const first = await api.createArc({
    title: "Arc One", description: "d", arc_type: "Soap", series: SERIES,
  });
  const second = await api.createArc({
    title: "Arc Two", description: "d", arc_type: "Soap", series: SERIES,
  });
  // Same-episode progressions make the pair unmergeable.
  await api.createProgression(first.arc_id, {
    content: "one", season: 1, episode: 1,
  });
  await api.createProgression(second.arc_id, {
    content: "two", season: 1, episode: 1,
  });

  const host = document.createElement("div");
  document.body.append(host);
  const view = new MergeView(api, host, () => {});
  await view.load(SERIES, [first.arc_id, second.arc_id]);

  (host.querySelector(".merge-button") as HTMLButtonElement).click();
  await new Promise((resolve) => setTimeout(resolve, 300));

  const error = host.querySelector(".merge-error")!;
  expect(error.textContent).toContain("Cannot merge");
  expect(await api.listArcs(SERIES)).toHaveLength(2);

  await api.deleteArc(first.arc_id);
  await api.deleteArc(second.arc_id);
  host.remove();
});

test("character panel lists, suggests, dismisses, and merges", async () => {
  const jerry = await api.createCharacter({
    preferred_name: "Jerry Frost", series: SERIES,
  });
  const frost = await api.createCharacter({
    preferred_name: "Frost", series: SERIES,
  });

  const host = document.createElement("div");
  document.body.append(host);
  const panel = new CharacterPanel(api, host);
  await panel.load(SERIES);

  expect(host.querySelectorAll(".character-row")).toHaveLength(2);
  const suggestionRows = host.querySelectorAll(".suggestion-row");
  expect(suggestionRows).toHaveLength(1);
  expect(suggestionRows[0]!.textContent).toContain("0.50");

  // A dismissed false positive stays dismissed on reload.
  await panel.dismissPair(SERIES, jerry.character_id, frost.character_id);
  expect(host.querySelectorAll(".suggestion-row")).toHaveLength(0);
  await panel.load(SERIES);
  expect(host.querySelectorAll(".suggestion-row")).toHaveLength(0);

  await panel.mergePair(SERIES, jerry.character_id, frost.character_id);
  expect(host.querySelectorAll(".character-row")).toHaveLength(1);
  expect(host.querySelector(".character-aliases")!.textContent).toContain("Frost");

  await api.deleteCharacter(jerry.character_id);
  host.remove();
});

test("rename through the panel persists server-side", async () => {
  const character = await api.createCharacter({
    preferred_name: "Temp Name", series: SERIES,
  });
  const host = document.createElement("div");
  document.body.append(host);
  const panel = new CharacterPanel(api, host);
  await panel.load(SERIES);

  const row = host.querySelector(
    `tr[data-character-id="${character.character_id}"]`,
  )!;
  (row.querySelector("input") as HTMLInputElement).value = "Final Name";
  (row.querySelector(".character-rename") as HTMLButtonElement).click();
  await new Promise((resolve) => setTimeout(resolve, 300));

  const reloaded = await api.listCharacters(SERIES);
  expect(reloaded.map((c) => c.preferred_name)).toContain("Final Name");
  await api.deleteCharacter(character.character_id);
  host.remove();
});
