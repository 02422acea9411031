/**
 * Path helpers shared by the router.
 */

export function normalizePath(path: string): string {
  const squashed = path.replace(/\/+/g, "/");
  return squashed.endsWith("/") && squashed.length > 1 ? squashed.slice(0, -1) : squashed;
}

export function parseQuery(search: string): Record<string, string> {
  const out: Record<string, string> = {};
  const body = search.startsWith("?") ? search.slice(1) : search;
  for (const pair of body.split("&")) {
    if (!pair) {
      continue; // empty segment
    }
    const [k, v = ""] = pair.split("=");
    out[decodeURIComponent(k)] = decodeURIComponent(v);
  }
  return out;
}

export const joinPaths = (...parts: string[]): string => normalizePath(parts.join("/"));
