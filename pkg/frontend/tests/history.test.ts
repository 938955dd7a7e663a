import { describe, expect, it } from "vitest";
import { ScenarioHistory, memoryStorage } from "../src/history.js";
import { emptyScenario } from "../src/scenario.js";
import type { ScenarioForm } from "../src/scenario.js";

function formFor(county: string, priors: string[] = []): ScenarioForm {
  return {
    ...emptyScenario(),
    county,
    comparison: "Black",
    reference: "White",
    outcome: "third-striker",
    excludePriorCodes: priors,
  };
}

describe("ScenarioHistory", () => {
  it("starts empty and records pushes in order", () => {
    const history = new ScenarioHistory();
    expect(history.entries()).toEqual([]);
    history.push(formFor("Fresno"));
    history.push(formFor("Contra Costa"));
    const entries = history.entries();
    expect(entries).toHaveLength(2);
    expect(entries[0]!.form.county).toBe("Fresno");
    expect(entries[1]!.form.county).toBe("Contra Costa");
    expect(entries[0]!.at).toMatch(/^\d{4}-\d{2}-\d{2}T/);
  });

  it("stores a copy, not a live reference", () => {
    const history = new ScenarioHistory();
    const form = formFor("Fresno");
    history.push(form);
    form.county = "San Diego";
    expect(history.entries()[0]!.form.county).toBe("Fresno");
  });

  it("writes only to the provided storage, under its own key", () => {
    const storage = memoryStorage();
    const history = new ScenarioHistory(storage);
    history.push(formFor("Fresno"));
    expect(storage.getItem("disparity.history")).not.toBeNull();
    const reopened = new ScenarioHistory(storage);
    expect(reopened.entries()).toHaveLength(1);
  });

  it("diffs two stored runs and surfaces the latest change", () => {
    const history = new ScenarioHistory();
    history.push(formFor("Fresno"));
    history.push(formFor("Fresno", ["PC187"]));
    const changes = history.latestDiff()!;
    expect(changes).toHaveLength(1);
    expect(changes[0]!.field).toBe("excludePriorCodes");
    expect(history.diff(0, 1)).toEqual(changes);
  });

  it("returns null for latestDiff with fewer than two runs", () => {
    const history = new ScenarioHistory();
    expect(history.latestDiff()).toBeNull();
    history.push(formFor("Fresno"));
    expect(history.latestDiff()).toBeNull();
  });

  it("raises on out-of-range diff indices", () => {
    const history = new ScenarioHistory();
    history.push(formFor("Fresno"));
    expect(() => history.diff(0, 5)).toThrow(RangeError);
  });

  it("survives corrupted storage by starting over", () => {
    const storage = memoryStorage();
    storage.setItem("disparity.history", "{nope");
    const history = new ScenarioHistory(storage);
    expect(history.entries()).toEqual([]);
  });

  it("clears all entries", () => {
    const history = new ScenarioHistory();
    history.push(formFor("Fresno"));
    history.clear();
    expect(history.entries()).toEqual([]);
  });

  it("caps stored runs at fifty", () => {
    const history = new ScenarioHistory();
    for (let i = 0; i < 55; i++) history.push(formFor(`County ${i}`));
    const entries = history.entries();
    expect(entries).toHaveLength(50);
    expect(entries[0]!.form.county).toBe("County 5");
  });
});
