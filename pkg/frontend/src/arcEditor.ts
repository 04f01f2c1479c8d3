/** Dialog for creating or editing an arc and managing its progressions.
 * Auto-generated progression drafts are shown for review and persist only
 * on an explicit save. */

import { ApiClient } from "./api.js";
import { clear, el, option, showError } from "./dom.js";
import type { Arc, ArcType, Character } from "./types.js";
import { ARC_TYPES } from "./types.js";

export class ArcEditor {
  private arc: Arc | null = null;
  private series = "";
  private characters: Character[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly container: HTMLElement,
    private readonly onSaved: () => void,
  ) {}

  async open(series: string, arcId: string | null): Promise<void> {
    this.series = series;
    this.characters = await this.api.listCharacters(series);
    this.arc = arcId ? await this.api.getArc(arcId) : null;
    this.render();
  }

  close(): void {
    this.arc = null;
    clear(this.container);
  }

  private field(name: string): HTMLInputElement | HTMLTextAreaElement | HTMLSelectElement {
    const node = this.container.querySelector(`[name="${name}"]`);
    if (!node) throw new Error(`missing form field ${name}`);
    return node as HTMLInputElement | HTMLTextAreaElement | HTMLSelectElement;
  }

  private checkedCharacters(): string[] {
    return Array.from(
      this.container.querySelectorAll<HTMLInputElement>("input[data-main-character]:checked"),
    ).map((input) => input.value);
  }

  /** Persist the form: create when no arc is loaded, update otherwise. */
  async save(): Promise<Arc> {
    const title = this.field("title").value.trim();
    const description = this.field("description").value.trim();
    const arcType = this.field("arc_type").value as ArcType;
    const mains = this.checkedCharacters();
    let saved: Arc;
    if (this.arc === null) {
      saved = await this.api.createArc({
        title,
        description,
        arc_type: arcType,
        series: this.series,
        main_characters: mains,
      });
    } else {
      saved = await this.api.updateArc(this.arc.arc_id, {
        title,
        description,
        arc_type: arcType,
        main_characters: mains,
      });
    }
    this.arc = saved;
    this.onSaved();
    this.render();
    return saved;
  }

  /** Ask the model for a progression draft; display it without saving. */
  async generateDraft(season: number, episode: number): Promise<string> {
    if (!this.arc) throw new Error("save the arc before drafting progressions");
    const draft = await this.api.draftProgression(this.arc.arc_id, season, episode);
    const textarea = this.container.querySelector<HTMLTextAreaElement>(
      "textarea[name='new_progression']",
    );
    if (textarea) textarea.value = draft.content;
    return draft.content;
  }

  /** Explicitly persist the progression text currently in the form. */
  async saveProgression(season: number, episode: number): Promise<void> {
    if (!this.arc) throw new Error("save the arc before adding progressions");
    const content = (
      this.container.querySelector<HTMLTextAreaElement>("textarea[name='new_progression']")
    )?.value.trim();
    if (!content) throw new Error("progression content is empty");
    await this.api.createProgression(this.arc.arc_id, { content, season, episode });
    this.arc = await this.api.getArc(this.arc.arc_id);
    this.onSaved();
    this.render();
  }

  async deleteProgression(progressionId: string): Promise<void> {
    if (!this.arc) return;
    await this.api.deleteProgression(progressionId);
    this.arc = await this.api.getArc(this.arc.arc_id);
    this.onSaved();
    this.render();
  }

  private render(): void {
    clear(this.container);
    const arc = this.arc;
    const form = el("form", { class: "arc-editor" });
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.save().catch((error) => showError(status, String(error)));
    });

    const title = el("input", { name: "title", placeholder: "Title" });
    title.value = arc?.title ?? "";
    const description = el("textarea", {
      name: "description", placeholder: "Description",
    });
    description.value = arc?.description ?? "";
    const typeSelect = el("select", { name: "arc_type" });
    for (const arcType of ARC_TYPES) typeSelect.append(option(arcType));
    typeSelect.value = arc?.arc_type ?? "Soap";

    const characterBoxes = el("fieldset", { class: "arc-editor-characters" }, [
      el("legend", {}, ["Main characters"]),
    ]);
    for (const character of this.characters) {
      const checkbox = el("input", {
        type: "checkbox", value: character.character_id, "data-main-character": "1",
      });
      checkbox.checked = arc?.main_characters.includes(character.character_id) ?? false;
      characterBoxes.append(el("label", {}, [checkbox, character.preferred_name]));
    }

    const status = el("div", { class: "arc-editor-status" });
    form.append(
      title, description, typeSelect, characterBoxes,
      el("button", { type: "submit", class: "arc-editor-save" }, [
        arc ? "Save changes" : "Create arc",
      ]),
      status,
    );
    this.container.append(form);

    if (arc) {
      this.container.append(this.renderProgressions(arc, status));
    }
  }

  private renderProgressions(arc: Arc, status: HTMLElement): HTMLElement {
    const section = el("section", { class: "arc-editor-progressions" });
    section.append(el("h3", {}, ["Progressions"]));
    const list = el("ul");
    for (const progression of arc.progressions) {
      const remove = el("button", { type: "button", class: "progression-delete" }, ["Delete"]);
      remove.addEventListener("click", () => {
        void this.deleteProgression(progression.progression_id)
          .catch((error) => showError(status, String(error)));
      });
      list.append(
        el("li", { class: "progression-item", "data-progression-id": progression.progression_id }, [
          el("strong", {}, [`S${String(progression.season).padStart(2, "0")}E${String(progression.episode).padStart(2, "0")} `]),
          progression.content,
          remove,
        ]),
      );
    }
    section.append(list);

    const season = el("input", { name: "new_season", type: "number", value: "1" });
    const episode = el("input", { name: "new_episode", type: "number", value: "1" });
    const content = el("textarea", {
      name: "new_progression", placeholder: "Progression content",
    });
    const generate = el("button", { type: "button", class: "progression-generate" }, [
      "Auto-generate draft",
    ]);
    generate.addEventListener("click", () => {
      void this.generateDraft(Number(season.value), Number(episode.value))
        .catch((error) => showError(status, String(error)));
    });
    const saveButton = el("button", { type: "button", class: "progression-save" }, [
      "Save progression",
    ]);
    saveButton.addEventListener("click", () => {
      void this.saveProgression(Number(season.value), Number(episode.value))
        .catch((error) => showError(status, String(error)));
    });
    section.append(
      el("div", { class: "progression-new" }, [season, episode, content, generate, saveButton]),
    );
    return section;
  }
}
