import { describe, expect, it } from "vitest";

import { decodeRle, encodeRle, maskArea, maskRowRuns } from "../src/rle.js";

describe("decodeRle", () => {
  it("decodes the documented example", () => {
    // runs alternate starting with zeros: 1 zero, 2 ones, 1 zero
    expect(Array.from(decodeRle("rle:1,2,1", 2, 2))).toEqual([0, 1, 1, 0]);
  });

  it("decodes an all-zero and an all-one mask", () => {
    expect(Array.from(decodeRle("rle:9", 3, 3))).toEqual(new Array(9).fill(0));
    expect(Array.from(decodeRle("rle:0,9", 3, 3))).toEqual(new Array(9).fill(1));
  });

  it("round-trips with encodeRle", () => {
    const bits = Uint8Array.from([0, 1, 1, 0, 0, 0, 1, 0, 1, 1, 1, 1]);
    const rle = encodeRle(bits, 4, 3);
    expect(Array.from(decodeRle(rle, 4, 3))).toEqual(Array.from(bits));
  });

  it("matches the server's encoding of a centered box", () => {
    // 8/32..., the demo cube mask: rows 8-15, cols 12-19 on a 32x32 grid
    const rle = "rle:268,8,24,8,24,8,24,8,24,8,24,8,24,8,24,8,524";
    const bits = decodeRle(rle, 32, 32);
    expect(maskArea(bits)).toBe(64);
    expect(bits[8 * 32 + 12]).toBe(1);
    expect(bits[8 * 32 + 11]).toBe(0);
    expect(bits[15 * 32 + 19]).toBe(1);
    expect(bits[16 * 32 + 19]).toBe(0);
  });

  it("rejects malformed strings", () => {
    expect(() => decodeRle("raw:1,2,1", 2, 2)).toThrow(/not an RLE/);
    expect(() => decodeRle("rle:1,x,1", 2, 2)).toThrow(/bad run/);
    expect(() => decodeRle("rle:1,2", 2, 2)).toThrow(/covers 3 cells/);
    expect(() => decodeRle("rle:1,-2,5", 2, 2)).toThrow(/bad run/);
  });
});

describe("maskRowRuns", () => {
  it("splits a mask into per-row horizontal runs", () => {
    const bits = Uint8Array.from([
      0, 1, 1, 0,
      1, 0, 0, 1,
      0, 0, 0, 0,
    ]);
    expect(maskRowRuns(bits, 4, 3)).toEqual([
      { y: 0, x: 1, length: 2 },
      { y: 1, x: 0, length: 1 },
      { y: 1, x: 3, length: 1 },
    ]);
  });

  it("covers exactly the set cells", () => {
    const bits = decodeRle("rle:268,8,24,8,24,8,24,8,24,8,24,8,24,8,24,8,524", 32, 32);
    const runs = maskRowRuns(bits, 32, 32);
    expect(runs.length).toBe(8); // one run per mask row
    const covered = runs.reduce((acc, r) => acc + r.length, 0);
    expect(covered).toBe(maskArea(bits));
  });
});
