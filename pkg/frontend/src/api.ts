/** Typed client for the narrarc HTTP service. Every UI mutation goes
 * through here; the UI itself holds no business logic. */

import type {
  Arc,
  ArcCreateBody,
  ArcUpdateBody,
  Character,
  Clusters,
  Pca3d,
  Progression,
  ProgressionCreateBody,
  RunReport,
  SeriesInfo,
  Suggestions,
  Timeline,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function parseDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText;
  }
}

export class ApiClient {
  constructor(public readonly baseUrl: string) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    query?: Record<string, string | number | undefined>,
  ): Promise<T> {
    let url = this.baseUrl + path;
    if (query) {
      const params = new URLSearchParams();
      for (const [key, value] of Object.entries(query)) {
        if (value !== undefined) params.set(key, String(value));
      }
      const encoded = params.toString();
      if (encoded) url += `?${encoded}`;
    }
    const response = await fetch(url, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await parseDetail(response));
    }
    if (response.status === 204) return undefined as T;
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  listSeries(): Promise<SeriesInfo[]> {
    return this.request("GET", "/series");
  }

  // -- arcs ----------------------------------------------------------------

  listArcs(series: string, arcType?: string): Promise<Arc[]> {
    return this.request("GET", "/arcs", undefined, { series, arc_type: arcType });
  }

  getArc(arcId: string): Promise<Arc> {
    return this.request("GET", `/arcs/${arcId}`);
  }

  createArc(body: ArcCreateBody): Promise<Arc> {
    return this.request("POST", "/arcs", body);
  }

  updateArc(arcId: string, body: ArcUpdateBody): Promise<Arc> {
    return this.request("PATCH", `/arcs/${arcId}`, body);
  }

  deleteArc(arcId: string): Promise<void> {
    return this.request("DELETE", `/arcs/${arcId}`);
  }

  mergeArcs(keepId: string, removeId: string): Promise<Arc> {
    return this.request("POST", `/arcs/${keepId}/merge/${removeId}`);
  }

  // -- progressions ----------------------------------------------------------

  listProgressions(arcId: string): Promise<Progression[]> {
    return this.request("GET", `/arcs/${arcId}/progressions`);
  }

  createProgression(arcId: string, body: ProgressionCreateBody): Promise<Progression> {
    return this.request("POST", `/arcs/${arcId}/progressions`, body);
  }

  updateProgression(
    progressionId: string,
    body: { content?: string; interfering_characters?: string[] },
  ): Promise<Progression> {
    return this.request("PATCH", `/progressions/${progressionId}`, body);
  }

  deleteProgression(progressionId: string): Promise<void> {
    return this.request("DELETE", `/progressions/${progressionId}`);
  }

  draftProgression(arcId: string, season: number, episode: number): Promise<{ content: string }> {
    return this.request("POST", `/arcs/${arcId}/progressions/draft`, { season, episode });
  }

  // -- characters --------------------------------------------------------------

  listCharacters(series: string): Promise<Character[]> {
    return this.request("GET", "/characters", undefined, { series });
  }

  createCharacter(body: {
    preferred_name: string;
    series: string;
    alternative_names?: string[];
  }): Promise<Character> {
    return this.request("POST", "/characters", body);
  }

  updateCharacter(
    characterId: string,
    body: { preferred_name?: string; alternative_names?: string[] },
  ): Promise<Character> {
    return this.request("PATCH", `/characters/${characterId}`, body);
  }

  deleteCharacter(characterId: string): Promise<void> {
    return this.request("DELETE", `/characters/${characterId}`);
  }

  suggestDuplicates(series: string, threshold?: number): Promise<Suggestions> {
    return this.request("GET", "/characters/suggest-duplicates", undefined, {
      series,
      threshold,
    });
  }

  dismissSuggestion(series: string, characterA: string, characterB: string): Promise<void> {
    return this.request("POST", "/characters/suggestions/dismiss", {
      series,
      character_a: characterA,
      character_b: characterB,
    });
  }

  mergeCharacters(keepId: string, removeId: string): Promise<Character> {
    return this.request("POST", "/characters/merge", {
      keep_id: keepId,
      remove_id: removeId,
    });
  }

  // -- views and runs -------------------------------------------------------------

  timeline(
    series: string,
    season: number,
    filters?: { arcType?: string; characterId?: string },
  ): Promise<Timeline> {
    return this.request("GET", "/timeline", undefined, {
      series,
      season,
      arc_type: filters?.arcType,
      character_id: filters?.characterId,
    });
  }

  clusters(series: string, threshold?: number): Promise<Clusters> {
    return this.request("GET", "/clusters", undefined, { series, threshold });
  }

  pca3d(series: string): Promise<Pca3d> {
    return this.request("GET", "/pca3d", undefined, { series });
  }

  runEpisode(series: string, season: number, episode: number): Promise<RunReport> {
    return this.request("POST", "/pipeline/run", { series, season, episode });
  }

  getRunReport(series: string, season: number, episode: number): Promise<RunReport> {
    return this.request("GET", `/runs/${encodeURIComponent(series)}/${season}/${episode}`);
  }
}
