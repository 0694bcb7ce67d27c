/**
 * Run-length mask codec matching the service wire format.
 *
 * "rle:1,2,1" on a 2x2 grid decodes row-major to [[0,1],[1,0]]: runs
 * alternate zero/one starting with zeros, and must sum to width*height.
 */

export function decodeRle(rle: string, width: number, height: number): Uint8Array {
  if (!rle.startsWith("rle:")) {
    throw new Error(`not an RLE string: ${rle.slice(0, 20)}`);
  }
  const runs = rle
    .slice(4)
    .split(",")
    .filter((r) => r.length > 0)
    .map((r) => {
      const n = Number(r);
      if (!Number.isInteger(n) || n < 0) throw new Error(`bad run length: ${r}`);
      return n;
    });
  const bits = new Uint8Array(width * height);
  let offset = 0;
  let value = 0;
  for (const run of runs) {
    if (value === 1) bits.fill(1, offset, offset + run);
    offset += run;
    value = 1 - value;
  }
  if (offset !== width * height) {
    throw new Error(`RLE covers ${offset} cells, grid has ${width * height}`);
  }
  return bits;
}

export function encodeRle(bits: Uint8Array | number[], width: number, height: number): string {
  if (bits.length !== width * height) {
    throw new Error(`mask has ${bits.length} cells, grid has ${width * height}`);
  }
  const runs: number[] = [];
  let value = 0;
  let run = 0;
  for (let i = 0; i < bits.length; i++) {
    const bit = bits[i] ? 1 : 0;
    if (bit === value) {
      run += 1;
    } else {
      runs.push(run);
      value = bit;
      run = 1;
    }
  }
  runs.push(run);
  return "rle:" + runs.join(",");
}

export interface RowRun {
  /** grid row */
  y: number;
  /** first set column */
  x: number;
  /** run length in columns */
  length: number;
}

/**
 * Set cells as per-row horizontal runs — the natural unit for drawing a
 * hatched mask overlay as a handful of rectangles instead of w*h cells.
 */
export function maskRowRuns(bits: Uint8Array, width: number, height: number): RowRun[] {
  const runs: RowRun[] = [];
  for (let y = 0; y < height; y++) {
    let x = 0;
    while (x < width) {
      if (bits[y * width + x]) {
        let end = x;
        while (end < width && bits[y * width + end]) end++;
        runs.push({ y, x, length: end - x });
        x = end;
      } else {
        x++;
      }
    }
  }
  return runs;
}

export function maskArea(bits: Uint8Array): number {
  let area = 0;
  for (let i = 0; i < bits.length; i++) area += bits[i];
  return area;
}
