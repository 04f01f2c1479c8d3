/** Wire types mirroring the server's canonical JSON encoding. */

export type ArcType = "Anthology" | "Soap" | "GenreSpecific";

export const ARC_TYPES: ArcType[] = ["Anthology", "Soap", "GenreSpecific"];

export interface Progression {
  progression_id: string;
  arc_id: string;
  content: string;
  series: string;
  season: number;
  episode: number;
  interfering_characters: string[];
}

export interface Arc {
  arc_id: string;
  title: string;
  description: string;
  arc_type: ArcType;
  series: string;
  main_characters: string[];
  progressions: Progression[];
}

export interface Character {
  character_id: string;
  preferred_name: string;
  series: string;
  alternative_names: string[];
}

export interface SeriesInfo {
  name: string;
  genre: string;
}

export interface TimelineCell {
  progression_id: string;
  content: string;
  interfering_characters: string[];
}

export interface TimelineEpisode {
  season: number;
  episode: number;
  label: string;
}

export interface TimelineRow {
  arc_id: string;
  title: string;
  arc_type: ArcType;
  main_characters: string[];
  cells: (TimelineCell | null)[];
}

export interface Timeline {
  series: string;
  season: number;
  episodes: TimelineEpisode[];
  rows: TimelineRow[];
}

export interface DuplicateSuggestion {
  first: Character;
  second: Character;
  score: number;
}

export interface Suggestions {
  threshold: number;
  suggestions: DuplicateSuggestion[];
}

export interface Clusters {
  threshold: number;
  clusters: string[][];
}

export interface PcaPoint {
  arc_id: string;
  x: number;
  y: number;
  z: number;
}

export interface Pca3d {
  points: PcaPoint[];
  explained_variance_ratios: number[];
}

export interface RunReport {
  series: string;
  season: number;
  episode: number;
  created_arcs: { arc_id: string; title: string; arc_type: ArcType }[];
  extended_arcs: { arc_id: string; title: string }[];
  merges: unknown[];
  drops: { stage: string; title: string; reason: string }[];
  warnings: string[];
  gateway_call_count: number;
}

export interface ArcCreateBody {
  title: string;
  description: string;
  arc_type: ArcType;
  series: string;
  main_characters?: string[];
}

export interface ArcUpdateBody {
  title?: string;
  description?: string;
  arc_type?: ArcType;
  main_characters?: string[];
}

export interface ProgressionCreateBody {
  content: string;
  season: number;
  episode: number;
  interfering_characters?: string[];
}
