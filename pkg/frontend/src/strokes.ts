/**
 * Stroke log and selection algebra for the geodesic paint brush.
 *
 * The displayed selection is always a pure fold of the stroke log over the
 * brush-neighborhood cache; the server replays the same log and accepts a
 * submission only when both folds agree exactly.
 */

export type BrushMode = "draw" | "erase";

export interface Stroke {
  center: number;
  radius: number;
  mode: BrushMode;
}

/** Neighborhood tables keyed by radius: table[vertex] = sorted vertex ids. */
export class BrushCache {
  private tables = new Map<string, number[][]>();

  constructor(public readonly radii: number[]) {}

  private key(radius: number): string {
    return radius.toPrecision(12);
  }

  setTable(radius: number, table: number[][]): void {
    this.tables.set(this.key(radius), table);
  }

  hasRadius(radius: number): boolean {
    return this.tables.has(this.key(radius));
  }

  neighborhood(radius: number, vertex: number): readonly number[] {
    const table = this.tables.get(this.key(radius));
    if (!table) throw new Error(`brush cache missing radius ${radius}`);
    const ids = table[vertex];
    if (!ids) throw new Error(`vertex ${vertex} out of range`);
    return ids;
  }
}

/** Apply one stroke; returns a new set (inputs are never mutated). */
export function applyStroke(
  selection: ReadonlySet<number>,
  stroke: Stroke,
  cache: BrushCache,
): Set<number> {
  const next = new Set(selection);
  for (const v of cache.neighborhood(stroke.radius, stroke.center)) {
    if (stroke.mode === "draw") next.add(v);
    else next.delete(v);
  }
  return next;
}

/** Fold a whole log into the selected vertex set. */
export function replayLog(log: readonly Stroke[], cache: BrushCache): Set<number> {
  let selection = new Set<number>();
  for (const stroke of log) selection = applyStroke(selection, stroke, cache);
  return selection;
}

export function sortedVertices(selection: ReadonlySet<number>): number[] {
  return [...selection].sort((a, b) => a - b);
}
