/** Character management: list, edit, merge, and Jaccard-scored duplicate
 * suggestions. Suggestions are advisory; dismissing one persists
 * server-side so it never resurfaces. */

import { ApiClient } from "./api.js";
import { clear, el, showError } from "./dom.js";
import type { Character, Suggestions } from "./types.js";

export class CharacterPanel {
  private characters: Character[] = [];
  private suggestions: Suggestions = { threshold: 0.5, suggestions: [] };

  constructor(
    private readonly api: ApiClient,
    private readonly container: HTMLElement,
  ) {}

  async load(series: string): Promise<void> {
    this.characters = await this.api.listCharacters(series);
    this.suggestions = await this.api.suggestDuplicates(series);
    this.render(series);
  }

  async rename(series: string, characterId: string, name: string): Promise<void> {
    await this.api.updateCharacter(characterId, { preferred_name: name });
    await this.load(series);
  }

  async mergePair(series: string, keepId: string, removeId: string): Promise<void> {
    await this.api.mergeCharacters(keepId, removeId);
    await this.load(series);
  }

  async dismissPair(series: string, idA: string, idB: string): Promise<void> {
    await this.api.dismissSuggestion(series, idA, idB);
    await this.load(series);
  }

  private render(series: string): void {
    clear(this.container);
    const status = el("div", { class: "character-status" });
    this.container.append(el("h3", {}, ["Characters"]), status);

    const table = el("table", { class: "character-table" });
    table.append(el("thead", {}, [
      el("tr", {}, [
        el("th", {}, ["Preferred name"]),
        el("th", {}, ["Also known as"]),
        el("th", {}, [""]),
      ]),
    ]));
    const body = el("tbody");
    for (const character of this.characters) {
      const nameInput = el("input", { value: character.preferred_name });
      const renameButton = el("button", { class: "character-rename" }, ["Rename"]);
      renameButton.addEventListener("click", () => {
        void this.rename(series, character.character_id, nameInput.value.trim())
          .catch((error) => showError(status, String(error)));
      });
      body.append(el("tr", {
        class: "character-row", "data-character-id": character.character_id,
      }, [
        el("td", {}, [nameInput]),
        el("td", { class: "character-aliases" }, [
          character.alternative_names.join(", ") || "(none)",
        ]),
        el("td", {}, [renameButton]),
      ]));
    }
    table.append(body);
    this.container.append(table);

    this.container.append(el("h3", {}, [
      `Possible duplicates (Jaccard >= ${this.suggestions.threshold})`,
    ]));
    const list = el("ul", { class: "suggestion-list" });
    if (this.suggestions.suggestions.length === 0) {
      list.append(el("li", { class: "suggestion-none" }, ["No suggestions."]));
    }
    for (const suggestion of this.suggestions.suggestions) {
      const mergeButton = el("button", { class: "suggestion-merge" }, [
        `Merge into ${suggestion.first.preferred_name}`,
      ]);
      mergeButton.addEventListener("click", () => {
        void this.mergePair(
          series, suggestion.first.character_id, suggestion.second.character_id,
        ).catch((error) => showError(status, String(error)));
      });
      const dismissButton = el("button", { class: "suggestion-dismiss" }, ["Dismiss"]);
      dismissButton.addEventListener("click", () => {
        void this.dismissPair(
          series, suggestion.first.character_id, suggestion.second.character_id,
        ).catch((error) => showError(status, String(error)));
      });
      list.append(el("li", { class: "suggestion-row" }, [
        `${suggestion.first.preferred_name} / ${suggestion.second.preferred_name} ` +
          `(score ${suggestion.score.toFixed(2)}) `,
        mergeButton,
        dismissButton,
      ]));
    }
    this.container.append(list);
  }
}
