/** Vector-store explorer: semantic cluster table plus a rotatable 3D
 * scatter of the PCA projection. Selecting two points cross-links into
 * the merge view. */

import { ApiClient, ApiError } from "./api.js";
import { clear, el, showError } from "./dom.js";
import { project } from "./projection.js";
import type { Arc, Clusters, Pca3d } from "./types.js";

const PLOT_WIDTH = 520;
const PLOT_HEIGHT = 420;

export class ClusterPcaExplorer {
  private clustersData: Clusters | null = null;
  private pcaData: Pca3d | null = null;
  private titles = new Map<string, string>();
  private yaw = 0.6;
  private pitch = 0.4;
  private selected: string[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly container: HTMLElement,
    private readonly onCompare: (keepId: string, removeId: string) => void,
  ) {}

  async load(series: string, threshold?: number): Promise<void> {
    const arcs = await this.api.listArcs(series);
    this.titles = new Map(arcs.map((arc: Arc) => [arc.arc_id, arc.title]));
    this.clustersData = await this.api.clusters(series, threshold);
    try {
      this.pcaData = await this.api.pca3d(series);
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        this.pcaData = null; // too few embedded arcs to project
      } else {
        throw error;
      }
    }
    this.render(series);
  }

  rotateBy(deltaYaw: number, deltaPitch: number): void {
    this.yaw += deltaYaw;
    this.pitch = Math.max(-1.5, Math.min(1.5, this.pitch + deltaPitch));
    this.renderScatter();
  }

  toggleSelect(arcId: string): void {
    if (this.selected.includes(arcId)) {
      this.selected = this.selected.filter((existing) => existing !== arcId);
    } else {
      this.selected = [...this.selected.slice(-1), arcId];
    }
    this.renderScatter();
  }

  private render(series: string): void {
    clear(this.container);
    const status = el("div", { class: "explorer-status" });

    const thresholdInput = el("input", {
      class: "cluster-threshold", type: "number",
      step: "0.01", min: "0", max: "1",
    });
    thresholdInput.value = String(this.clustersData?.threshold ?? 0.85);
    const reload = el("button", {}, ["Recluster"]);
    reload.addEventListener("click", () => {
      void this.load(series, Number(thresholdInput.value))
        .catch((error) => showError(status, String(error)));
    });

    const clusterTable = el("table", { class: "cluster-table" });
    clusterTable.append(
      el("thead", {}, [el("tr", {}, [el("th", {}, ["#"]), el("th", {}, ["Arcs"])])]),
    );
    const body = el("tbody");
    (this.clustersData?.clusters ?? []).forEach((cluster, index) => {
      const names = cluster.map((arcId) => this.titles.get(arcId) ?? arcId).join(", ");
      body.append(
        el("tr", { class: "cluster-row" }, [
          el("td", {}, [String(index + 1)]),
          el("td", {}, [names]),
        ]),
      );
    });
    clusterTable.append(body);

    this.container.append(
      el("h3", {}, ["Semantic clusters"]),
      el("div", { class: "cluster-controls" }, [thresholdInput, reload]),
      clusterTable,
      el("h3", {}, ["3D projection"]),
      status,
    );

    const plot = el("div", {
      class: "pca-plot",
      style: `width:${PLOT_WIDTH}px;height:${PLOT_HEIGHT}px;position:relative;`,
    });
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    plot.addEventListener("mousedown", (event) => {
      dragging = true;
      lastX = event.clientX;
      lastY = event.clientY;
    });
    plot.addEventListener("mousemove", (event) => {
      if (!dragging) return;
      this.rotateBy((event.clientX - lastX) * 0.01, (event.clientY - lastY) * 0.01);
      lastX = event.clientX;
      lastY = event.clientY;
    });
    plot.addEventListener("mouseup", () => {
      dragging = false;
    });
    this.container.append(plot);

    const compare = el("button", { class: "pca-compare", disabled: "" }, [
      "Compare selected in merge view",
    ]);
    compare.addEventListener("click", () => {
      if (this.selected.length === 2) {
        this.onCompare(this.selected[0]!, this.selected[1]!);
      }
    });
    this.container.append(compare);
    this.renderScatter();
  }

  private renderScatter(): void {
    const plot = this.container.querySelector<HTMLElement>(".pca-plot");
    const compare = this.container.querySelector<HTMLButtonElement>(".pca-compare");
    if (!plot) return;
    clear(plot);
    if (!this.pcaData) {
      plot.append(el("p", { class: "pca-unavailable" }, [
        "Not enough embedded arcs for a 3D projection (need at least 4).",
      ]));
      if (compare) compare.disabled = true;
      return;
    }
    const ratios = this.pcaData.explained_variance_ratios;
    plot.append(
      el("div", { class: "pca-axes" }, [
        `variance explained: x ${(ratios[0]! * 100).toFixed(1)}% / ` +
          `y ${(ratios[1]! * 100).toFixed(1)}% / z ${(ratios[2]! * 100).toFixed(1)}%`,
      ]),
    );
    const projected = project(
      this.pcaData.points, this.yaw, this.pitch, PLOT_WIDTH, PLOT_HEIGHT,
    );
    this.pcaData.points.forEach((point, index) => {
      const screen = projected[index]!;
      const dot = el("div", {
        class: this.selected.includes(point.arc_id) ? "pca-point selected" : "pca-point",
        "data-arc-id": point.arc_id,
        title: this.titles.get(point.arc_id) ?? point.arc_id,
        style:
          `left:${screen.screenX.toFixed(1)}px;top:${screen.screenY.toFixed(1)}px;` +
          `z-index:${Math.round(1000 + screen.depth * 100)};position:absolute;`,
      });
      dot.addEventListener("click", () => this.toggleSelect(point.arc_id));
      plot.append(dot);
    });
    if (compare) compare.disabled = this.selected.length !== 2;
  }
}
