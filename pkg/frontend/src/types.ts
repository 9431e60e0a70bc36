/**
 * Response shapes of the ranking service's HTTP API. The client renders
 * these fields verbatim; it never recomputes scores or statistics.
 */

export interface Activity {
  id: number;
  name: string;
}

export interface ActivityShare {
  activity_id: number;
  name: string;
  share: number;
}

export interface DestinationCard {
  destination_id: number;
  name: string;
  country_code: string;
  score: number;
  top_activities: ActivityShare[];
}

export interface SearchResponse {
  session: string;
  user: string;
  variant: string;
  ranker: string;
  query: number[];
  results: DestinationCard[];
}

export interface ClickResponse {
  status: "ok" | "duplicate";
}

export interface GTestSummary {
  g: number;
  p_value: number;
  confidence: number;
  significant_at_90: boolean;
}

export interface VariantRow {
  variant: string;
  ranker: string;
  control: boolean;
  users: number;
  clickers: number;
  conversion_rate: number;
  ci_halfwidth: number;
  g_test: GTestSummary | null;
}

export interface ExperimentReport {
  experiment: string;
  unit: string;
  level: number;
  variants: VariantRow[];
}

export interface HealthInfo {
  status: string;
  destinations: number;
  activities: number;
  alpha: number;
  source_digest: string;
  experiment: string | null;
}
