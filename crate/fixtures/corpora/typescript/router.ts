import * as http from "http";
import { URL } from "url";
import "reflect-metadata";
import {
  parseQuery,
  normalizePath,
} from "./paths";

type Handler = (req: http.IncomingMessage, params: Record<string, string>) => Promise<string>;

// A route pattern such as /users/:id
interface Route {
  method: string;
  parts: string[];
  handler: Handler;
}

export function splitPath(path: string): string[] {
  return normalizePath(path).split("/").filter((p) => p.length > 0);
}

function matchRoute(route: Route, parts: string[]): Record<string, string> | null {
  if (route.parts.length !== parts.length) {
    return null;
  }
  const params: Record<string, string> = {};
  for (let i = 0; i < parts.length; i++) {
    const pattern = route.parts[i];
    if (pattern.startsWith(":")) {
      params[pattern.slice(1)] = decodeURIComponent(parts[i]);
    } else if (pattern !== parts[i]) {
      return null;
    }
  }
  return params;
}

export class Router {
  private routes: Route[] = [];

  add(method: string, path: string, handler: Handler): this {
    this.routes.push({ method, parts: splitPath(path), handler });
    return this;
  }

  async dispatch(req: http.IncomingMessage): Promise<[number, string]> {
    const url = new URL(req.url ?? "/", "http://localhost");
    const query = parseQuery(url.search);
    for (const route of this.routes) {
      const params = route.method === req.method ? matchRoute(route, splitPath(url.pathname)) : null;
      if (params) {
        return [200, await route.handler(req, { ...query, ...params })];
      }
    }
    return [404, "not found: " + url.pathname + " // no route"];
  }
}

export function* routeNames(router: Router, names: string[]): Generator<string> {
  for (const n of names) {
    yield `${n} -> ${router ? "ok" : "missing"} /* template */`;
  }
}

const defaultHandler: Handler = async () => "ok";

export const helpers = {
  describe(route: Route): string {
    return `${route.method} /${route.parts.join("/")}`;
  },
  fallback: defaultHandler,
};
