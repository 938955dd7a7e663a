/**
 * Local run history. Entries live only in the provided storage (browser
 * localStorage or an in-memory stand-in); nothing is sent anywhere.
 */

import { type FieldChange, type ScenarioForm, scenarioDiff } from "./scenario.js";
import type { AnalysisJson } from "./types.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export function memoryStorage(): StorageLike {
  const data = new Map<string, string>();
  return {
    getItem: (key) => data.get(key) ?? null,
    setItem: (key, value) => void data.set(key, value),
    removeItem: (key) => void data.delete(key),
  };
}

export interface HistoryEntry {
  at: string;
  form: ScenarioForm;
  analysis?: AnalysisJson;
}

const HISTORY_KEY = "disparity.history";
const MAX_ENTRIES = 50;

export class ScenarioHistory {
  private readonly storage: StorageLike;

  constructor(storage: StorageLike = memoryStorage()) {
    this.storage = storage;
  }

  entries(): HistoryEntry[] {
    const raw = this.storage.getItem(HISTORY_KEY);
    if (raw === null) return [];
    try {
      const parsed = JSON.parse(raw) as HistoryEntry[];
      return Array.isArray(parsed) ? parsed : [];
    } catch {
      return [];
    }
  }

  push(form: ScenarioForm, analysis?: AnalysisJson): HistoryEntry {
    const entry: HistoryEntry = {
      at: new Date().toISOString(),
      form: structuredClone(form),
      ...(analysis !== undefined ? { analysis } : {}),
    };
    const all = [...this.entries(), entry].slice(-MAX_ENTRIES);
    this.storage.setItem(HISTORY_KEY, JSON.stringify(all));
    return entry;
  }

  /** Diff between two stored runs, oldest-first indexing. */
  diff(i: number, j: number): FieldChange[] {
    const all = this.entries();
    const a = all[i];
    const b = all[j];
    if (a === undefined || b === undefined) {
      throw new RangeError(`history has ${all.length} entries, asked for ${i} and ${j}`);
    }
    return scenarioDiff(a.form, b.form);
  }

  /** What changed between the two most recent runs, if there are two. */
  latestDiff(): FieldChange[] | null {
    const all = this.entries();
    if (all.length < 2) return null;
    return this.diff(all.length - 2, all.length - 1);
  }

  clear(): void {
    this.storage.removeItem(HISTORY_KEY);
  }
}
