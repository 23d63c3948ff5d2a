/**
 * Zoom/pan view transform between screen and image coordinates.
 *
 * Brush geometry is defined in image space, so painting at any zoom level
 * marks the same pixels.
 */

export const MIN_ZOOM = 0.1;
export const MAX_ZOOM = 8;

export interface Point {
  x: number;
  y: number;
}

export class ViewTransform {
  zoom = 1;
  panX = 0;
  panY = 0;

  setZoom(zoom: number, pivot?: Point): void {
    const next = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, zoom));
    if (pivot) {
      // keep the pivot's image coordinate fixed on screen
      const before = this.screenToImage(pivot);
      this.zoom = next;
      const after = this.imageToScreen(before);
      this.panX += pivot.x - after.x;
      this.panY += pivot.y - after.y;
    } else {
      this.zoom = next;
    }
  }

  panBy(dx: number, dy: number): void {
    this.panX += dx;
    this.panY += dy;
  }

  screenToImage(p: Point): Point {
    return { x: (p.x - this.panX) / this.zoom, y: (p.y - this.panY) / this.zoom };
  }

  imageToScreen(p: Point): Point {
    return { x: p.x * this.zoom + this.panX, y: p.y * this.zoom + this.panY };
  }
}
