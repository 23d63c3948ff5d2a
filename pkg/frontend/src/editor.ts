/**
 * Editor session state: source, mask layer, brush, view transform, and the
 * run/promote workflow against the service. No DOM access here; main.ts
 * binds this to canvases and buttons.
 */

import { ApiClient, InpaintOptions } from "./api.js";
import { BrushMode, MaskLayer, StrokePoint } from "./maskLayer.js";
import { Point, ViewTransform } from "./transform.js";

export interface EditorCallbacks {
  onMaskChanged?: () => void;
  onResult?: (png: Blob) => void;
  onError?: (message: string) => void;
  onBusyChanged?: (busy: boolean) => void;
}

export type MaskEncoder = (layer: MaskLayer) => Promise<Blob>;

export class Editor {
  readonly view = new ViewTransform();
  brushRadius = 16;
  mode: BrushMode = "paint";
  mask: MaskLayer | null = null;
  sessionId: string | null = null;
  imageWidth = 0;
  imageHeight = 0;
  lastResult: Blob | null = null;
  private busy = false;
  private activeStroke: StrokePoint[] | null = null;

  constructor(
    private api: ApiClient,
    private encodeMask: MaskEncoder,
    private callbacks: EditorCallbacks = {},
  ) {}

  get isBusy(): boolean {
    return this.busy;
  }

  private setBusy(value: boolean): void {
    this.busy = value;
    this.callbacks.onBusyChanged?.(value);
  }

  async openImage(png: Blob): Promise<void> {
    const info = await this.api.uploadImage(png);
    this.sessionId = info.session_id;
    this.imageWidth = info.width;
    this.imageHeight = info.height;
    this.mask = new MaskLayer(info.width, info.height);
    this.lastResult = null;
    this.callbacks.onMaskChanged?.();
  }

  /** True when a run makes sense: some hole painted, but not the whole frame. */
  canRun(): boolean {
    if (!this.mask || !this.sessionId || this.busy) return false;
    const fraction = this.mask.holeFraction();
    return fraction > 0 && fraction < 1;
  }

  beginStroke(screenPoint: Point): void {
    if (!this.mask) return;
    this.activeStroke = [this.view.screenToImage(screenPoint)];
  }

  extendStroke(screenPoint: Point): void {
    if (!this.activeStroke) return;
    this.activeStroke.push(this.view.screenToImage(screenPoint));
  }

  endStroke(): void {
    if (!this.mask || !this.activeStroke) return;
    this.mask.paintStroke(this.activeStroke, this.brushRadius, this.mode);
    this.activeStroke = null;
    this.callbacks.onMaskChanged?.();
  }

  undo(): boolean {
    if (!this.mask) return false;
    const undone = this.mask.undo();
    if (undone) this.callbacks.onMaskChanged?.();
    return undone;
  }

  async runInpaint(options: InpaintOptions = {}): Promise<Blob | null> {
    if (!this.canRun() || !this.mask || !this.sessionId) {
      this.callbacks.onError?.("paint a hole first");
      return null;
    }
    this.setBusy(true);
    try {
      const maskPng = await this.encodeMask(this.mask);
      const result = await this.api.inpaint(this.sessionId, maskPng, options);
      this.lastResult = result;
      this.callbacks.onResult?.(result);
      return result;
    } catch (err) {
      this.callbacks.onError?.(err instanceof Error ? err.message : String(err));
      return null;
    } finally {
      this.setBusy(false);
    }
  }

  /** Adopt the last result as the new source; clears mask and result. */
  async promoteResult(): Promise<boolean> {
    if (!this.sessionId || !this.lastResult) return false;
    try {
      const info = await this.api.promote(this.sessionId);
      this.imageWidth = info.width;
      this.imageHeight = info.height;
      this.mask = new MaskLayer(info.width, info.height);
      this.lastResult = null;
      this.callbacks.onMaskChanged?.();
      return true;
    } catch (err) {
      this.callbacks.onError?.(err instanceof Error ? err.message : String(err));
      return false;
    }
  }
}
