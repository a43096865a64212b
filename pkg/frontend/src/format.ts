// Score labels always show the server value to 7 decimals; the UI never
// recomputes similarity on its own.
export function formatScore(score: number): string {
  return score.toFixed(7);
}

export function formatYear(year: number | null | undefined): string {
  return year == null ? "n.d." : String(year);
}

export function formatAuthors(authors: string[]): string {
  return authors.length ? authors.join("; ") : "(no authors listed)";
}
