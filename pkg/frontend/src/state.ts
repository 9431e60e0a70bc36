import type { Activity, SearchResponse } from "./types";

/** Search page state that must survive a page reload via the URL. */
export interface SearchViewState {
  chips: string[];
  ranker: string | null;
}

/**
 * Encode chips and the optional ranker override as a query string,
 * e.g. "a=beach,nightlife&ranker=random". Chip order is preserved so a
 * shared URL reproduces the exact same query.
 */
export function encodeState(state: SearchViewState): string {
  const params = new URLSearchParams();
  if (state.chips.length > 0) {
    params.set("a", state.chips.map(encodeURIComponent).join(","));
  }
  if (state.ranker) params.set("ranker", state.ranker);
  return params.toString();
}

export function decodeState(queryString: string): SearchViewState {
  const params = new URLSearchParams(queryString);
  const raw = params.get("a") ?? "";
  const chips: string[] = [];
  for (const part of raw.split(",")) {
    const name = decodeURIComponent(part).trim();
    if (name && !chips.includes(name)) chips.push(name);
  }
  return { chips, ranker: params.get("ranker") || null };
}

/**
 * Type-ahead filter: case-insensitive substring match over the vocabulary,
 * excluding activities already picked. Purely local, issues no request.
 */
export function filterSuggestions(all: Activity[], text: string, chips: string[]): Activity[] {
  const needle = text.trim().toLowerCase();
  if (!needle) return [];
  const picked = new Set(chips.map((c) => c.toLowerCase()));
  return all.filter(
    (a) => !picked.has(a.name.toLowerCase()) && a.name.toLowerCase().includes(needle),
  );
}

type RunSearch = (
  chips: string[],
  ranker: string | null,
  signal: AbortSignal,
) => Promise<SearchResponse>;

export interface ControllerHooks {
  onResults(response: SearchResponse): void;
  onCleared(): void;
  onError(err: unknown): void;
  onStateChange?(state: SearchViewState): void;
}

/**
 * Owns the selected chips and the single in-flight search. Every chip or
 * ranker change issues exactly one request; a newer request aborts and
 * supersedes the previous one, so rendered results always correspond to
 * the last issued query. Removing the final chip clears the results
 * without any network call.
 */
export class SearchController {
  private chips: string[] = [];
  private ranker: string | null = null;
  private inflight: AbortController | null = null;
  private ticket = 0;

  constructor(
    private readonly runSearch: RunSearch,
    private readonly hooks: ControllerHooks,
  ) {}

  get state(): SearchViewState {
    return { chips: [...this.chips], ranker: this.ranker };
  }

  /** Returns false (and issues nothing) when the chip is already present. */
  addChip(name: string): boolean {
    const trimmed = name.trim();
    if (!trimmed || this.chips.includes(trimmed)) return false;
    this.chips.push(trimmed);
    this.issue();
    return true;
  }

  removeChip(name: string): boolean {
    const at = this.chips.indexOf(name);
    if (at === -1) return false;
    this.chips.splice(at, 1);
    this.issue();
    return true;
  }

  setRanker(ranker: string | null): void {
    const next = ranker || null;
    if (next === this.ranker) return;
    this.ranker = next;
    if (this.chips.length > 0) this.issue();
    else this.hooks.onStateChange?.(this.state);
  }

  /** Adopt URL state on load; issues at most one search. */
  restore(state: SearchViewState): void {
    this.chips = [...new Set(state.chips.map((c) => c.trim()).filter(Boolean))];
    this.ranker = state.ranker;
    this.issue();
  }

  /** Re-issue the current query after a failure. */
  retry(): void {
    this.issue();
  }

  private issue(): void {
    this.inflight?.abort();
    this.inflight = null;
    this.hooks.onStateChange?.(this.state);

    if (this.chips.length === 0) {
      this.hooks.onCleared();
      return;
    }

    const controller = new AbortController();
    this.inflight = controller;
    const ticket = ++this.ticket;
    this.runSearch([...this.chips], this.ranker, controller.signal).then(
      (response) => {
        if (ticket !== this.ticket) return; // superseded while resolving
        this.inflight = null;
        this.hooks.onResults(response);
      },
      (err) => {
        if (ticket !== this.ticket || controller.signal.aborted) return;
        this.inflight = null;
        this.hooks.onError(err);
      },
    );
  }
}
