/** Application shell: three sections (timeline, vector explorer,
 * characters) over one API client. All state lives server-side; views
 * re-fetch after every mutation. */

import { ApiClient } from "./api.js";
import { ArcEditor } from "./arcEditor.js";
import { CharacterPanel } from "./characterPanel.js";
import { clear, el, option } from "./dom.js";
import { ClusterPcaExplorer } from "./explorer.js";
import { MergeView } from "./mergeView.js";
import { TimelineView } from "./timeline.js";

const SECTIONS = ["timeline", "explorer", "characters"] as const;
type Section = (typeof SECTIONS)[number];

function apiBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? "http://127.0.0.1:8764";
}

export class App {
  readonly api: ApiClient;
  series = "";
  season = 1;
  private section: Section = "timeline";

  readonly timeline: TimelineView;
  readonly arcEditor: ArcEditor;
  readonly mergeView: MergeView;
  readonly explorer: ClusterPcaExplorer;
  readonly characterPanel: CharacterPanel;

  private readonly sectionNodes: Record<Section, HTMLElement>;
  private readonly editorHost: HTMLElement;

  constructor(private readonly root: HTMLElement, baseUrl: string) {
    this.api = new ApiClient(baseUrl);
    this.sectionNodes = {
      timeline: el("div", { class: "section section-timeline" }),
      explorer: el("div", { class: "section section-explorer" }),
      characters: el("div", { class: "section section-characters" }),
    };
    this.editorHost = el("div", { class: "editor-host" });
    const mergeHost = el("div", { class: "merge-host" });
    this.sectionNodes.timeline.append(this.editorHost, mergeHost);

    const timelineGrid = el("div", { class: "timeline-grid" });
    this.sectionNodes.timeline.prepend(timelineGrid);

    this.timeline = new TimelineView(this.api, timelineGrid, {
      onEditArc: (arcId) => void this.openArcEditor(arcId),
      onEditCell: (arcId) => void this.openArcEditor(arcId),
    });
    this.arcEditor = new ArcEditor(this.api, this.editorHost, () => {
      void this.refreshTimeline();
    });
    this.mergeView = new MergeView(this.api, mergeHost, () => {
      void this.refreshTimeline();
    });
    this.explorer = new ClusterPcaExplorer(
      this.api,
      this.sectionNodes.explorer,
      (keepId, removeId) => {
        this.showSection("timeline");
        void this.mergeView.load(this.series, [keepId, removeId]);
      },
    );
    this.characterPanel = new CharacterPanel(this.api, this.sectionNodes.characters);
  }

  async start(): Promise<void> {
    const seriesList = await this.api.listSeries();
    this.series = seriesList[0]?.name ?? "";
    clear(this.root);

    const seriesSelect = el("select", { class: "series-select" });
    for (const info of seriesList) seriesSelect.append(option(info.name));
    seriesSelect.value = this.series;
    seriesSelect.addEventListener("change", () => {
      this.series = seriesSelect.value;
      void this.refreshAll();
    });

    const seasonInput = el("input", {
      class: "season-input", type: "number", min: "1", value: String(this.season),
    });
    seasonInput.addEventListener("change", () => {
      this.season = Number(seasonInput.value);
      void this.refreshTimeline();
    });

    const newArcButton = el("button", { class: "new-arc" }, ["New arc"]);
    newArcButton.addEventListener("click", () => void this.openArcEditor(null));

    const nav = el("nav", { class: "topbar" }, [seriesSelect, seasonInput, newArcButton]);
    for (const section of SECTIONS) {
      const button = el("button", { class: `nav-${section}` }, [section]);
      button.addEventListener("click", () => {
        this.showSection(section);
        void this.refreshSection(section);
      });
      nav.append(button);
    }
    this.root.append(nav);
    for (const section of SECTIONS) this.root.append(this.sectionNodes[section]);
    this.showSection("timeline");
    await this.refreshAll();
  }

  showSection(section: Section): void {
    this.section = section;
    for (const name of SECTIONS) {
      this.sectionNodes[name].style.display = name === section ? "block" : "none";
    }
  }

  async openArcEditor(arcId: string | null): Promise<void> {
    await this.arcEditor.open(this.series, arcId);
  }

  private async refreshTimeline(): Promise<void> {
    if (this.series) await this.timeline.load(this.series, this.season);
  }

  private async refreshSection(section: Section): Promise<void> {
    if (!this.series) return;
    if (section === "timeline") await this.refreshTimeline();
    if (section === "explorer") await this.explorer.load(this.series);
    if (section === "characters") await this.characterPanel.load(this.series);
  }

  private async refreshAll(): Promise<void> {
    await this.refreshSection(this.section);
    if (this.series) await this.mergeView.load(this.series);
  }
}

export function mount(root: HTMLElement, baseUrl: string = apiBaseUrl()): App {
  return new App(root, baseUrl);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = mount(document.getElementById("app")!);
  void app.start();
}
