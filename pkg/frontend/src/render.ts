import type { Activity, DestinationCard, ExperimentReport, SearchResponse } from "./types";

/** How many results get the large card treatment; the rest go in a compact list. */
export const CARD_COUNT = 4;

/** Rows are flagged once the reported confidence reaches this level. */
export const FLAG_CONFIDENCE = 0.9;

export function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function formatPercent(fraction: number, digits = 2): string {
  return `${(fraction * 100).toFixed(digits)}%`;
}

export function formatScore(score: number): string {
  return score.toFixed(3);
}

export function renderChips(chips: string[]): string {
  return chips
    .map(
      (name) => `<span class="chip">${escapeHtml(name)}<button class="chip-remove" ` +
        `data-chip="${escapeHtml(name)}" aria-label="Remove ${escapeHtml(name)}">&times;</button></span>`,
    )
    .join("");
}

export function renderSuggestions(matches: Activity[]): string {
  if (matches.length === 0) return "";
  const items = matches
    .map((a) => `<li class="suggestion" data-activity="${escapeHtml(a.name)}">${escapeHtml(a.name)}</li>`)
    .join("");
  return `<ul class="suggestion-list">${items}</ul>`;
}

function shareBars(card: DestinationCard, digits: number): string {
  return card.top_activities
    .map(
      (s) => `<div class="share-row">
        <span class="share-label">${escapeHtml(s.name)}</span>
        <span class="share-track"><span class="share-fill" style="width:${(s.share * 100).toFixed(1)}%"></span></span>
        <span class="share-value">${formatPercent(s.share, digits)}</span>
      </div>`,
    )
    .join("");
}

function cardHtml(card: DestinationCard): string {
  // data-score carries the score exactly as the API returned it; the
  // visible text is only a rounding of that same number.
  return `<article class="card" data-destination="${card.destination_id}" data-score="${String(card.score)}">
    <header class="card-head">
      <h3 class="card-name">${escapeHtml(card.name)}</h3>
      <span class="card-country">${escapeHtml(card.country_code)}</span>
    </header>
    <div class="card-score">score ${formatScore(card.score)}</div>
    <div class="card-shares">${shareBars(card, 0)}</div>
  </article>`;
}

/**
 * Render a search response: the first four destinations as full cards,
 * any remaining matches as compact rows. Scores and shares come straight
 * from the response fields.
 */
export function renderResults(response: SearchResponse): string {
  if (response.results.length === 0) {
    return `<p class="empty-note">No destinations match this query.</p>`;
  }
  const top = response.results.slice(0, CARD_COUNT).map(cardHtml).join("");
  const rest = response.results.slice(CARD_COUNT);
  let restHtml = "";
  if (rest.length > 0) {
    const rows = rest
      .map(
        (card) => `<li class="result-row" data-destination="${card.destination_id}" ` +
          `data-score="${String(card.score)}">` +
          `<span class="row-name">${escapeHtml(card.name)}</span>` +
          `<span class="row-country">${escapeHtml(card.country_code)}</span>` +
          `<span class="row-score">${formatScore(card.score)}</span></li>`,
      )
      .join("");
    restHtml = `<h3 class="more-head">More matches</h3><ul class="result-list">${rows}</ul>`;
  }
  return `<div class="card-grid">${top}</div>${restHtml}`;
}

/** Detail view: the destination's endorsement profile as labelled bars. */
export function renderDetail(card: DestinationCard): string {
  return `<article class="detail" data-destination="${card.destination_id}">
    <h2 class="detail-name">${escapeHtml(card.name)} <span class="card-country">${escapeHtml(card.country_code)}</span></h2>
    <p class="detail-sub">What past visitors endorsed</p>
    <div class="detail-shares">${shareBars(card, 1)}</div>
  </article>`;
}

export function dashboardIsEmpty(report: ExperimentReport): boolean {
  return report.variants.length === 0 || report.variants.every((v) => v.users === 0);
}

/**
 * Render the experiment report as a table. A row is visually flagged
 * when its reported confidence is at least 90%; the control row and
 * rows without a G-test show a plain dash in the confidence column.
 * Every number is taken from the report payload as-is.
 */
export function renderDashboard(report: ExperimentReport): string {
  if (dashboardIsEmpty(report)) {
    return `<p class="empty-note">No traffic recorded for this experiment yet.</p>`;
  }
  const rows = report.variants
    .map((v) => {
      const flagged = v.g_test !== null && v.g_test.confidence >= FLAG_CONFIDENCE;
      const confidence = v.g_test === null ? "-" : formatPercent(v.g_test.confidence, 0);
      const flag = flagged ? `<span class="flag" title="confidence at or above 90%">significant</span>` : "";
      const control = v.control ? `<span class="control-mark">control</span>` : "";
      return `<tr class="variant-row${flagged ? " flagged" : ""}" data-variant="${escapeHtml(v.variant)}">
        <td>${escapeHtml(v.variant)} ${control}</td>
        <td>${escapeHtml(v.ranker)}</td>
        <td class="num">${v.users}</td>
        <td class="num">${v.clickers}</td>
        <td class="num">${formatPercent(v.conversion_rate)} &plusmn; ${formatPercent(v.ci_halfwidth)}</td>
        <td class="num">${confidence} ${flag}</td>
      </tr>`;
    })
    .join("");
  return `<table class="dashboard">
    <thead><tr>
      <th>Variant</th><th>Ranker</th><th>Users</th><th>Clickers</th>
      <th>Conversion (&plusmn; ${formatPercent(report.level, 0)} CI half-width)</th>
      <th>G-test confidence</th>
    </tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}
