import { describe, expect, it } from "vitest";

import { MaskLayer } from "../src/maskLayer.js";
import { MAX_ZOOM, MIN_ZOOM, ViewTransform } from "../src/transform.js";

describe("ViewTransform", () => {
  it("round trips screen to image and back", () => {
    const view = new ViewTransform();
    view.setZoom(2.5);
    view.panBy(40, -12);
    const p = { x: 123, y: 45 };
    const back = view.imageToScreen(view.screenToImage(p));
    expect(back.x).toBeCloseTo(p.x, 9);
    expect(back.y).toBeCloseTo(p.y, 9);
  });

  it("clamps zoom to the allowed range", () => {
    const view = new ViewTransform();
    view.setZoom(100);
    expect(view.zoom).toBe(MAX_ZOOM);
    view.setZoom(0.0001);
    expect(view.zoom).toBe(MIN_ZOOM);
  });

  it("zooming around a pivot keeps that point fixed", () => {
    const view = new ViewTransform();
    view.panBy(10, 20);
    const pivot = { x: 200, y: 150 };
    const before = view.screenToImage(pivot);
    view.setZoom(3, pivot);
    const after = view.screenToImage(pivot);
    expect(after.x).toBeCloseTo(before.x, 9);
    expect(after.y).toBeCloseTo(before.y, 9);
  });

  it("painting over the same image pixels at different zooms marks the same mask", () => {
    // the user paints over one image region while zoom/pan vary: the screen
    // paths differ, but after the inverse transform the painted pixels and
    // the brush footprint (image-space radius) must match exactly
    const imagePath = [
      { x: 20.3, y: 30.7 },
      { x: 33.1, y: 38.2 },
      { x: 47.6, y: 51.9 },
    ];
    const masks: MaskLayer[] = [];
    for (const [zoom, panX, panY] of [
      [1, 0, 0],
      [3.7, 120, -45],
      [0.4, -8, 14],
    ] as const) {
      const view = new ViewTransform();
      view.setZoom(zoom);
      view.panBy(panX, panY);
      const screenPath = imagePath.map((p) => view.imageToScreen(p));
      const layer = new MaskLayer(64, 64);
      layer.paintStroke(
        screenPath.map((p) => view.screenToImage(p)),
        5,
        "paint",
      );
      masks.push(layer);
    }
    expect(masks[0].equals(masks[1])).toBe(true);
    expect(masks[0].equals(masks[2])).toBe(true);
    expect(masks[0].holeFraction()).toBeGreaterThan(0);
  });
});
