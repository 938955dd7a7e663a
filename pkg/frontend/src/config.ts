/**
 * Build-time service location. Bundlers replace process.env.DISPARITY_API_BASE
 * at build time (define/env plugins); in Node the plain environment variable
 * works; with neither, the dev default points at a local service.
 */

declare const process: { env?: Record<string, string | undefined> } | undefined;

export const DEFAULT_API_BASE: string =
  (typeof process !== "undefined" && process?.env?.DISPARITY_API_BASE) ||
  "http://127.0.0.1:8731";
