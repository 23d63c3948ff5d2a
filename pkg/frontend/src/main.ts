/**
 * Browser shell: binds the Editor to canvases and controls.
 *
 * Layout: a file picker, brush controls, a zoomable canvas stack (source +
 * red hole overlay), a run button with spinner, and a before/after slider
 * once a result arrives.
 */

import { ApiClient } from "./api.js";
import { Editor } from "./editor.js";
import { MaskLayer } from "./maskLayer.js";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

/** Encode the mask layer as a PNG blob via an offscreen canvas. */
async function encodeMaskWithCanvas(layer: MaskLayer): Promise<Blob> {
  const canvas = document.createElement("canvas");
  canvas.width = layer.width;
  canvas.height = layer.height;
  const ctx = canvas.getContext("2d")!;
  const imageData = ctx.createImageData(layer.width, layer.height);
  const bytes = layer.toMaskBytes();
  for (let i = 0; i < bytes.length; i++) {
    imageData.data[4 * i] = bytes[i];
    imageData.data[4 * i + 1] = bytes[i];
    imageData.data[4 * i + 2] = bytes[i];
    imageData.data[4 * i + 3] = 255;
  }
  ctx.putImageData(imageData, 0, 0);
  return new Promise((resolve, reject) =>
    canvas.toBlob(
      (blob) => (blob ? resolve(blob) : reject(new Error("mask encode failed"))),
      "image/png",
    ),
  );
}

function toast(message: string): void {
  const box = el<HTMLDivElement>("toasts");
  const item = document.createElement("div");
  item.className = "toast";
  item.textContent = message;
  box.appendChild(item);
  setTimeout(() => item.remove(), 4000);
}

class CanvasView {
  private sourceBitmap: ImageBitmap | null = null;
  private resultBitmap: ImageBitmap | null = null;
  private sliderPosition = 0.5;
  showResult = false;

  constructor(
    private canvas: HTMLCanvasElement,
    private editor: Editor,
  ) {}

  async setSource(blob: Blob): Promise<void> {
    this.sourceBitmap = await createImageBitmap(blob);
    this.resultBitmap = null;
    this.showResult = false;
    this.fitView();
    this.render();
  }

  async setResult(blob: Blob): Promise<void> {
    this.resultBitmap = await createImageBitmap(blob);
    this.showResult = true;
    this.render();
  }

  setSlider(value: number): void {
    this.sliderPosition = value;
    this.render();
  }

  fitView(): void {
    if (!this.sourceBitmap) return;
    const scale = Math.min(
      this.canvas.width / this.sourceBitmap.width,
      this.canvas.height / this.sourceBitmap.height,
      1,
    );
    this.editor.view.zoom = Math.max(scale, 0.1);
    this.editor.view.panX =
      (this.canvas.width - this.sourceBitmap.width * this.editor.view.zoom) / 2;
    this.editor.view.panY =
      (this.canvas.height - this.sourceBitmap.height * this.editor.view.zoom) / 2;
  }

  render(): void {
    const ctx = this.canvas.getContext("2d")!;
    ctx.save();
    ctx.fillStyle = "#1c1f26";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (!this.sourceBitmap) {
      ctx.restore();
      return;
    }
    const { zoom, panX, panY } = this.editor.view;
    ctx.translate(panX, panY);
    ctx.scale(zoom, zoom);
    ctx.imageSmoothingEnabled = zoom < 1;
    ctx.drawImage(this.sourceBitmap, 0, 0);

    if (this.showResult && this.resultBitmap) {
      // before/after split at the slider position
      const split = this.sourceBitmap.width * this.sliderPosition;
      ctx.save();
      ctx.beginPath();
      ctx.rect(split, 0, this.sourceBitmap.width - split, this.sourceBitmap.height);
      ctx.clip();
      ctx.drawImage(this.resultBitmap, 0, 0);
      ctx.restore();
      ctx.fillStyle = "#ffffff";
      ctx.fillRect(split - 0.75 / zoom, 0, 1.5 / zoom, this.sourceBitmap.height);
    } else if (this.editor.mask) {
      // translucent red hole overlay
      const mask = this.editor.mask;
      const overlay = new OffscreenCanvas(mask.width, mask.height);
      const octx = overlay.getContext("2d")!;
      const data = octx.createImageData(mask.width, mask.height);
      const bytes = mask.toMaskBytes();
      for (let i = 0; i < bytes.length; i++) {
        if (bytes[i] === 0) {
          data.data[4 * i] = 235;
          data.data[4 * i + 1] = 64;
          data.data[4 * i + 2] = 52;
          data.data[4 * i + 3] = 140;
        }
      }
      octx.putImageData(data, 0, 0);
      ctx.drawImage(overlay, 0, 0);
    }
    ctx.restore();
  }
}

function bind(): void {
  const canvas = el<HTMLCanvasElement>("editor-canvas");
  const runButton = el<HTMLButtonElement>("run");
  const undoButton = el<HTMLButtonElement>("undo");
  const promoteButton = el<HTMLButtonElement>("promote");
  const slider = el<HTMLInputElement>("compare");
  const brushSize = el<HTMLInputElement>("brush-size");
  const modeToggle = el<HTMLSelectElement>("mode");
  const fileInput = el<HTMLInputElement>("file");
  const spinner = el<HTMLSpanElement>("spinner");

  const api = new ApiClient("");
  let view: CanvasView;
  let sourceBlob: Blob | null = null;

  const editor = new Editor(api, encodeMaskWithCanvas, {
    onMaskChanged: () => {
      view.showResult = false;
      slider.disabled = true;
      promoteButton.disabled = true;
      refresh();
    },
    onResult: (png) => {
      void view.setResult(png);
      slider.disabled = false;
      promoteButton.disabled = false;
    },
    onError: (message) => toast(message),
    onBusyChanged: (busy) => {
      spinner.classList.toggle("hidden", !busy);
      refresh();
    },
  });
  view = new CanvasView(canvas, editor);

  function refresh(): void {
    runButton.disabled = !editor.canRun();
    undoButton.disabled = !editor.mask || editor.mask.undoDepth === 0;
    view.render();
  }

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    try {
      await editor.openImage(file);
      sourceBlob = file;
      await view.setSource(file);
      refresh();
    } catch (err) {
      toast(err instanceof Error ? err.message : String(err));
    }
  });

  promoteButton.addEventListener("click", async () => {
    const result = editor.lastResult;
    if (await editor.promoteResult()) {
      sourceBlob = result;
      if (sourceBlob) await view.setSource(sourceBlob);
      refresh();
    }
  });

  runButton.addEventListener("click", () => void editor.runInpaint());
  undoButton.addEventListener("click", () => {
    editor.undo();
    refresh();
  });
  brushSize.addEventListener("input", () => {
    editor.brushRadius = Number(brushSize.value);
  });
  modeToggle.addEventListener("change", () => {
    editor.mode = modeToggle.value === "erase" ? "erase" : "paint";
  });
  slider.addEventListener("input", () => view.setSlider(Number(slider.value) / 100));

  let painting = false;
  let panning = false;
  let lastPan = { x: 0, y: 0 };

  const canvasPoint = (ev: PointerEvent) => {
    const rect = canvas.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  };

  canvas.addEventListener("pointerdown", (ev) => {
    const p = canvasPoint(ev);
    if (ev.button === 1 || ev.shiftKey) {
      panning = true;
      lastPan = p;
    } else if (editor.mask && !view.showResult) {
      painting = true;
      editor.beginStroke(p);
    }
    canvas.setPointerCapture(ev.pointerId);
  });
  canvas.addEventListener("pointermove", (ev) => {
    const p = canvasPoint(ev);
    if (panning) {
      editor.view.panBy(p.x - lastPan.x, p.y - lastPan.y);
      lastPan = p;
      view.render();
    } else if (painting) {
      editor.extendStroke(p);
      view.render();
    }
  });
  const finish = () => {
    if (painting) {
      editor.endStroke();
      painting = false;
    }
    panning = false;
    refresh();
  };
  canvas.addEventListener("pointerup", finish);
  canvas.addEventListener("pointerleave", finish);
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.15 : 1 / 1.15;
    editor.view.setZoom(editor.view.zoom * factor, canvasPoint(ev as unknown as PointerEvent));
    view.render();
  });

  void api
    .health()
    .then((h) => {
      if (h.status !== "ok") toast("service degraded: no checkpoint loaded");
    })
    .catch(() => toast("service unreachable"));
}

document.addEventListener("DOMContentLoaded", bind);
