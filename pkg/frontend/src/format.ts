/** Display helpers shared by the views. */

export function formatScore(score: number): string {
  return score.toFixed(3);
}

export function formatMetric(value: number): string {
  return value.toFixed(3);
}

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function labelBadge(label: number): string {
  return label === 1
    ? '<span class="badge badge-high">high risk</span>'
    : '<span class="badge badge-low">low risk</span>';
}
