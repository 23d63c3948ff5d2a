/**
 * Binary hole mask painted over the source image.
 *
 * Stored as one byte per pixel: 1 = hole (painted), 0 = known. Exported in
 * the service's file convention (white = known, black = hole). The layer is
 * DOM-free so undo/export round trips are unit-testable; rendering adapters
 * live in main.ts.
 */

export type BrushMode = "paint" | "erase";

export interface StrokePoint {
  x: number;
  y: number;
}

export const MAX_UNDO = 32;

export class MaskLayer {
  readonly width: number;
  readonly height: number;
  private holes: Uint8Array;
  private undoStack: Uint8Array[] = [];

  constructor(width: number, height: number) {
    if (width < 1 || height < 1) {
      throw new Error(`mask layer needs positive dimensions, got ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.holes = new Uint8Array(width * height);
  }

  isHole(x: number, y: number): boolean {
    return this.holes[y * this.width + x] === 1;
  }

  holeFraction(): number {
    let count = 0;
    for (const v of this.holes) count += v;
    return count / this.holes.length;
  }

  snapshot(): Uint8Array {
    return this.holes.slice();
  }

  restore(snapshot: Uint8Array): void {
    if (snapshot.length !== this.holes.length) {
      throw new Error("snapshot size does not match layer");
    }
    this.holes = snapshot.slice();
  }

  clear(): void {
    this.pushUndo();
    this.holes.fill(0);
  }

  private pushUndo(): void {
    this.undoStack.push(this.holes.slice());
    if (this.undoStack.length > MAX_UNDO) {
      this.undoStack.shift();
    }
  }

  get undoDepth(): number {
    return this.undoStack.length;
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.holes = prev;
    return true;
  }

  private stampCircle(cx: number, cy: number, radius: number, value: 0 | 1): void {
    const r = Math.max(radius, 0.5);
    const x0 = Math.max(0, Math.floor(cx - r));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + r));
    const y0 = Math.max(0, Math.floor(cy - r));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + r));
    const r2 = r * r;
    for (let y = y0; y <= y1; y++) {
      const dy = y + 0.5 - cy;
      for (let x = x0; x <= x1; x++) {
        const dx = x + 0.5 - cx;
        if (dx * dx + dy * dy <= r2) {
          this.holes[y * this.width + x] = value;
        }
      }
    }
  }

  /**
   * Stamp circles along a path given in image coordinates. One undo entry
   * per stroke regardless of path length.
   */
  paintStroke(points: StrokePoint[], radius: number, mode: BrushMode): void {
    if (points.length === 0) return;
    this.pushUndo();
    const value: 0 | 1 = mode === "paint" ? 1 : 0;
    const step = Math.max(radius / 2, 0.75);
    let prev = points[0];
    this.stampCircle(prev.x, prev.y, radius, value);
    for (const point of points.slice(1)) {
      const dist = Math.hypot(point.x - prev.x, point.y - prev.y);
      const steps = Math.max(1, Math.ceil(dist / step));
      for (let i = 1; i <= steps; i++) {
        const t = i / steps;
        this.stampCircle(
          prev.x + (point.x - prev.x) * t,
          prev.y + (point.y - prev.y) * t,
          radius,
          value,
        );
      }
      prev = point;
    }
  }

  /** Raw grayscale bytes in the file convention: 255 = known, 0 = hole. */
  toMaskBytes(): Uint8Array {
    const out = new Uint8Array(this.holes.length);
    for (let i = 0; i < this.holes.length; i++) {
      out[i] = this.holes[i] === 1 ? 0 : 255;
    }
    return out;
  }

  /** Inverse of toMaskBytes, thresholding soft values at 128. */
  static fromMaskBytes(bytes: Uint8Array, width: number, height: number): MaskLayer {
    if (bytes.length !== width * height) {
      throw new Error("byte length does not match dimensions");
    }
    const layer = new MaskLayer(width, height);
    for (let i = 0; i < bytes.length; i++) {
      layer.holes[i] = bytes[i] < 128 ? 1 : 0;
    }
    return layer;
  }

  equals(other: MaskLayer): boolean {
    if (other.width !== this.width || other.height !== this.height) return false;
    for (let i = 0; i < this.holes.length; i++) {
      if (this.holes[i] !== other.holes[i]) return false;
    }
    return true;
  }
}
