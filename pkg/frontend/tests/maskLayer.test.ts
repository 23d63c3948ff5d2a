import { describe, expect, it } from "vitest";

import { MAX_UNDO, MaskLayer } from "../src/maskLayer.js";

describe("MaskLayer painting", () => {
  it("starts fully known", () => {
    const layer = new MaskLayer(32, 32);
    expect(layer.holeFraction()).toBe(0);
  });

  it("paints a circle of holes", () => {
    const layer = new MaskLayer(32, 32);
    layer.paintStroke([{ x: 16, y: 16 }], 5, "paint");
    expect(layer.isHole(16, 16)).toBe(true);
    expect(layer.isHole(0, 0)).toBe(false);
    expect(layer.holeFraction()).toBeGreaterThan(0);
  });

  it("erase restores known pixels", () => {
    const layer = new MaskLayer(32, 32);
    layer.paintStroke([{ x: 16, y: 16 }], 6, "paint");
    layer.paintStroke([{ x: 16, y: 16 }], 8, "erase");
    expect(layer.holeFraction()).toBe(0);
  });

  it("erase over untouched area is a no-op on pixels", () => {
    const layer = new MaskLayer(16, 16);
    const before = layer.snapshot();
    layer.paintStroke([{ x: 8, y: 8 }], 4, "erase");
    expect(layer.snapshot()).toEqual(before);
  });

  it("stamps along the whole path without gaps", () => {
    const layer = new MaskLayer(64, 16);
    layer.paintStroke([{ x: 4, y: 8 }, { x: 60, y: 8 }], 3, "paint");
    for (let x = 4; x <= 60; x++) {
      expect(layer.isHole(x, 8)).toBe(true);
    }
  });

  it("clamps stamps at the borders", () => {
    const layer = new MaskLayer(16, 16);
    layer.paintStroke([{ x: 0, y: 0 }, { x: -10, y: -10 }], 6, "paint");
    expect(layer.isHole(0, 0)).toBe(true);
    expect(layer.holeFraction()).toBeLessThan(1);
  });
});

describe("MaskLayer undo", () => {
  it("one undo entry per stroke restores exactly", () => {
    const layer = new MaskLayer(32, 32);
    layer.paintStroke([{ x: 8, y: 8 }], 4, "paint");
    const afterFirst = layer.snapshot();
    layer.paintStroke(
      [{ x: 20, y: 20 }, { x: 24, y: 26 }, { x: 28, y: 30 }],
      5,
      "paint",
    );
    expect(layer.undoDepth).toBe(2);
    expect(layer.undo()).toBe(true);
    expect(layer.snapshot()).toEqual(afterFirst);
    expect(layer.undo()).toBe(true);
    expect(layer.holeFraction()).toBe(0);
    expect(layer.undo()).toBe(false);
  });

  it("undo depth is bounded", () => {
    const layer = new MaskLayer(16, 16);
    for (let i = 0; i < MAX_UNDO + 10; i++) {
      layer.paintStroke([{ x: i % 16, y: 8 }], 2, "paint");
    }
    expect(layer.undoDepth).toBe(MAX_UNDO);
  });

  it("undo after erase restores the erased holes", () => {
    const layer = new MaskLayer(32, 32);
    layer.paintStroke([{ x: 10, y: 10 }], 5, "paint");
    const painted = layer.snapshot();
    layer.paintStroke([{ x: 10, y: 10 }], 6, "erase");
    layer.undo();
    expect(layer.snapshot()).toEqual(painted);
  });
});

describe("MaskLayer export", () => {
  it("round trips through mask bytes bit-faithfully", () => {
    const layer = new MaskLayer(24, 18);
    layer.paintStroke([{ x: 5, y: 5 }, { x: 18, y: 12 }], 4, "paint");
    const bytes = layer.toMaskBytes();
    expect(new Set(bytes)).toEqual(new Set([0, 255]));
    const back = MaskLayer.fromMaskBytes(bytes, 24, 18);
    expect(back.equals(layer)).toBe(true);
  });

  it("painted pixel exports as hole (0), untouched as known (255)", () => {
    const layer = new MaskLayer(8, 8);
    layer.paintStroke([{ x: 2, y: 2 }], 1, "paint");
    const bytes = layer.toMaskBytes();
    expect(bytes[2 * 8 + 2]).toBe(0);
    expect(bytes[7 * 8 + 7]).toBe(255);
  });
});
