import { readFileSync } from "node:fs";

/** Load a recorded API response from tests/fixtures. */
export function loadFixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as T;
}
