import { ApiClient, clickWithRetry } from "./api";
import {
  decodeState,
  encodeState,
  filterSuggestions,
  SearchController,
  type SearchViewState,
} from "./state";
import {
  renderChips,
  renderDashboard,
  renderDetail,
  renderResults,
  renderSuggestions,
} from "./render";
import type { Activity, SearchResponse } from "./types";

const api = new ApiClient();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let vocabulary: Activity[] = [];
let lastResponse: SearchResponse | null = null;
let experimentName: string | null = null;

function syncUrl(state: SearchViewState): void {
  const encoded = encodeState(state);
  const url = encoded ? `${location.pathname}?${encoded}` : location.pathname;
  history.replaceState(null, "", url);
}

const controller = new SearchController(
  (chips, ranker, signal) => api.search(chips, { ranker, signal }),
  {
    onResults(response) {
      lastResponse = response;
      el("results").innerHTML = renderResults(response);
      el("search-error").hidden = true;
      el("result-meta").textContent =
        `variant ${response.variant} / ranker ${response.ranker}`;
    },
    onCleared() {
      lastResponse = null;
      el("results").innerHTML = "";
      el("result-meta").textContent = "";
      el("search-error").hidden = true;
    },
    onError() {
      el("search-error").hidden = false;
    },
    onStateChange(state) {
      el("chips").innerHTML = renderChips(state.chips);
      syncUrl(state);
    },
  },
);

function showDetail(destinationId: number): void {
  const card = lastResponse?.results.find((r) => r.destination_id === destinationId);
  if (!card) return;
  el("detail").innerHTML = renderDetail(card);
  el("detail-panel").hidden = false;
  el("search-panel").hidden = true;
}

function hideDetail(): void {
  el("detail-panel").hidden = true;
  el("search-panel").hidden = false;
}

function onResultClick(event: Event): void {
  const target = (event.target as HTMLElement).closest<HTMLElement>("[data-destination]");
  if (!target || !lastResponse) return;
  const destinationId = Number(target.dataset.destination);
  // Click beacon is fire-and-forget: the detail view must open even when
  // the POST fails, so we deliberately do not await the retry loop.
  void clickWithRetry(api, lastResponse.session, destinationId);
  showDetail(destinationId);
}

function wireSearch(): void {
  const input = el<HTMLInputElement>("activity-input");
  const suggestions = el("suggestions");

  input.addEventListener("input", () => {
    const matches = filterSuggestions(vocabulary, input.value, controller.state.chips);
    suggestions.innerHTML = renderSuggestions(matches.slice(0, 8));
  });
  input.addEventListener("keydown", (event) => {
    if (event.key !== "Enter") return;
    const matches = filterSuggestions(vocabulary, input.value, controller.state.chips);
    if (matches.length > 0) {
      controller.addChip(matches[0].name);
      input.value = "";
      suggestions.innerHTML = "";
    }
  });
  suggestions.addEventListener("click", (event) => {
    const item = (event.target as HTMLElement).closest<HTMLElement>("[data-activity]");
    if (!item) return;
    controller.addChip(item.dataset.activity ?? "");
    input.value = "";
    suggestions.innerHTML = "";
    input.focus();
  });
  el("chips").addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest<HTMLElement>(".chip-remove");
    if (button) controller.removeChip(button.dataset.chip ?? "");
  });
  el("results").addEventListener("click", onResultClick);
  el("retry-search").addEventListener("click", () => controller.retry());
  el("back-to-results").addEventListener("click", hideDetail);

  const rankerSelect = el<HTMLSelectElement>("ranker-select");
  rankerSelect.addEventListener("change", () => {
    controller.setRanker(rankerSelect.value || null);
  });
}

async function loadDashboard(): Promise<void> {
  const container = el("dashboard-container");
  if (!experimentName) {
    container.innerHTML = `<p class="empty-note">No experiment configured on the server.</p>`;
    return;
  }
  try {
    const report = await api.report(experimentName);
    container.innerHTML = renderDashboard(report);
  } catch {
    container.innerHTML = `<p class="empty-note">Could not load the experiment report.</p>`;
  }
}

function wireTabs(): void {
  const searchTab = el("tab-search");
  const dashTab = el("tab-dashboard");
  searchTab.addEventListener("click", () => {
    searchTab.classList.add("active");
    dashTab.classList.remove("active");
    el("search-view").hidden = false;
    el("dashboard-view").hidden = true;
  });
  dashTab.addEventListener("click", () => {
    dashTab.classList.add("active");
    searchTab.classList.remove("active");
    el("search-view").hidden = true;
    el("dashboard-view").hidden = false;
    void loadDashboard();
  });
  el("refresh-dashboard").addEventListener("click", () => void loadDashboard());
}

async function boot(): Promise<void> {
  wireSearch();
  wireTabs();
  try {
    vocabulary = await api.activities();
    const health = await api.health();
    experimentName = health.experiment;
  } catch {
    el("search-error").hidden = false;
    return;
  }

  const initial = decodeState(location.search);
  if (initial.ranker) {
    el<HTMLSelectElement>("ranker-select").value = initial.ranker;
  }
  controller.restore(initial);
}

document.addEventListener("DOMContentLoaded", () => void boot());
