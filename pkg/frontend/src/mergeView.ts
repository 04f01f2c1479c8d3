/** Side-by-side comparison of two arcs with a merge action. Server
 * conflicts (e.g. same-episode progressions) are rendered inline. */

import { ApiClient, ApiError } from "./api.js";
import { clear, el, option } from "./dom.js";
import type { Arc } from "./types.js";

export class MergeView {
  private arcs: Arc[] = [];
  private keepId = "";
  private removeId = "";

  constructor(
    private readonly api: ApiClient,
    private readonly container: HTMLElement,
    private readonly onMerged: () => void,
  ) {}

  async load(series: string, preselect?: [string, string]): Promise<void> {
    this.arcs = await this.api.listArcs(series);
    if (preselect) [this.keepId, this.removeId] = preselect;
    if (!this.keepId && this.arcs.length > 0) this.keepId = this.arcs[0]!.arc_id;
    if (!this.removeId && this.arcs.length > 1) this.removeId = this.arcs[1]!.arc_id;
    this.render(series);
  }

  /** Merge the selected pair; returns the merged arc. */
  async merge(): Promise<Arc> {
    const merged = await this.api.mergeArcs(this.keepId, this.removeId);
    this.onMerged();
    return merged;
  }

  private arcById(arcId: string): Arc | undefined {
    return this.arcs.find((arc) => arc.arc_id === arcId);
  }

  private render(series: string): void {
    clear(this.container);
    const keepSelect = el("select", { class: "merge-keep" });
    const removeSelect = el("select", { class: "merge-remove" });
    for (const arc of this.arcs) {
      keepSelect.append(option(arc.arc_id, arc.title));
      removeSelect.append(option(arc.arc_id, arc.title));
    }
    keepSelect.value = this.keepId;
    removeSelect.value = this.removeId;
    keepSelect.addEventListener("change", () => {
      this.keepId = keepSelect.value;
      this.render(series);
    });
    removeSelect.addEventListener("change", () => {
      this.removeId = removeSelect.value;
      this.render(series);
    });

    const errorBox = el("div", { class: "merge-error" });
    const mergeButton = el("button", { class: "merge-button" }, ["Merge (keep left)"]);
    mergeButton.addEventListener("click", () => {
      void this.merge()
        .then(() => this.load(series))
        .catch((error) => {
          errorBox.textContent =
            error instanceof ApiError ? `Cannot merge: ${error.detail}` : String(error);
        });
    });

    this.container.append(
      el("div", { class: "merge-controls" }, [keepSelect, removeSelect, mergeButton]),
      errorBox,
      el("div", { class: "merge-panels" }, [
        this.renderPanel(this.arcById(this.keepId), "merge-panel-keep"),
        this.renderPanel(this.arcById(this.removeId), "merge-panel-remove"),
      ]),
    );
  }

  private renderPanel(arc: Arc | undefined, cls: string): HTMLElement {
    const panel = el("div", { class: `merge-panel ${cls}` });
    if (!arc) {
      panel.append(el("p", {}, ["No arc selected."]));
      return panel;
    }
    panel.append(
      el("h3", {}, [arc.title]),
      el("p", { class: "merge-type" }, [arc.arc_type]),
      el("p", {}, [arc.description]),
      el(
        "ul",
        { class: "merge-progressions" },
        arc.progressions.map((progression) =>
          el("li", {}, [
            `S${String(progression.season).padStart(2, "0")}E` +
              `${String(progression.episode).padStart(2, "0")}: ${progression.content}`,
          ]),
        ),
      ),
    );
    return panel;
  }
}
