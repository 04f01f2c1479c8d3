/** Season timeline: arcs as rows, episodes as columns, progressions as
 * cells. Filterable by arc type and by character. */

import { ApiClient } from "./api.js";
import { clear, el, option } from "./dom.js";
import type { Character, Timeline, TimelineRow } from "./types.js";
import { ARC_TYPES } from "./types.js";

export interface TimelineCallbacks {
  onEditArc(arcId: string): void;
  onEditCell(arcId: string, progressionId: string | null, season: number, episode: number): void;
}

export class TimelineView {
  private typeFilter = "";
  private characterFilter = "";
  private characters: Character[] = [];
  timeline: Timeline | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly container: HTMLElement,
    private readonly callbacks: TimelineCallbacks,
  ) {}

  async load(series: string, season: number): Promise<void> {
    this.characters = await this.api.listCharacters(series);
    this.timeline = await this.api.timeline(series, season, {
      arcType: this.typeFilter || undefined,
      characterId: this.characterFilter || undefined,
    });
    this.render(series, season);
  }

  private render(series: string, season: number): void {
    const timeline = this.timeline;
    if (!timeline) return;
    clear(this.container);

    const typeSelect = el("select", { class: "timeline-type-filter" });
    typeSelect.append(option("", "all arc types"));
    for (const arcType of ARC_TYPES) typeSelect.append(option(arcType));
    typeSelect.value = this.typeFilter;
    typeSelect.addEventListener("change", () => {
      this.typeFilter = typeSelect.value;
      void this.load(series, season);
    });

    const characterSelect = el("select", { class: "timeline-character-filter" });
    characterSelect.append(option("", "all characters"));
    for (const character of this.characters) {
      characterSelect.append(option(character.character_id, character.preferred_name));
    }
    characterSelect.value = this.characterFilter;
    characterSelect.addEventListener("change", () => {
      this.characterFilter = characterSelect.value;
      void this.load(series, season);
    });

    this.container.append(
      el("div", { class: "timeline-filters" }, [typeSelect, characterSelect]),
    );

    const table = el("table", { class: "timeline-table" });
    const head = el("tr", {}, [el("th", {}, ["Arc"])]);
    for (const episode of timeline.episodes) {
      head.append(el("th", { class: "timeline-episode" }, [episode.label]));
    }
    table.append(el("thead", {}, [head]));

    const body = el("tbody");
    for (const row of timeline.rows) {
      body.append(this.renderRow(row, timeline));
    }
    table.append(body);
    this.container.append(table);
  }

  private renderRow(row: TimelineRow, timeline: Timeline): HTMLTableRowElement {
    const tr = el("tr", { class: "timeline-row", "data-arc-id": row.arc_id });
    const badge = el("span", { class: `type-badge type-${row.arc_type}` }, [row.arc_type]);
    const title = el("a", { class: "timeline-arc-title", href: "#" }, [row.title]);
    title.addEventListener("click", (event) => {
      event.preventDefault();
      this.callbacks.onEditArc(row.arc_id);
    });
    tr.append(el("td", { class: "timeline-arc" }, [title, badge]));

    row.cells.forEach((cell, index) => {
      const episode = timeline.episodes[index];
      if (!episode) return;
      const td = el("td", {
        class: cell ? "timeline-cell" : "timeline-cell timeline-cell-empty",
        "data-episode": episode.label,
      });
      if (cell) {
        td.textContent = cell.content;
        td.setAttribute("data-progression-id", cell.progression_id);
      }
      td.addEventListener("click", () => {
        this.callbacks.onEditCell(
          row.arc_id, cell ? cell.progression_id : null,
          episode.season, episode.episode,
        );
      });
      tr.append(td);
    });
    return tr;
  }
}
