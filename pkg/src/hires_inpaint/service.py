"""HTTP facade for interactive inpainting.

Upload an image to open a session, POST a mask PNG (white = known,
black = hole) to get the filled result back as PNG. Sessions are
in-memory, expire after 30 minutes, and allow one in-flight inpaint at a
time; model weights are shared read-only across requests.
"""

from __future__ import annotations

import hashlib
import io
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Form, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image as PILImage, UnidentifiedImageError

from .coarse import CoarseConfig
from .imagecore import Image, Mask, mask_from_bool, to_rgb
from .refiner import RefinerModel, inpaint, load_checkpoint

DEFAULT_MAX_PIXELS = 32_000_000
DEFAULT_SESSION_TTL_S = 30 * 60


@dataclass
class Session:
    id: str
    source: Image
    created: float
    expires: float
    last_mask: Mask | None = None
    last_result: Image | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class _ModelHolder:
    """Read-only model shared across requests; swaps are atomic."""

    def __init__(self, model: RefinerModel | None, checkpoint_id: str | None):
        self._lock = threading.Lock()
        self._model = model
        self._checkpoint_id = checkpoint_id

    def get(self) -> tuple[RefinerModel | None, str | None]:
        with self._lock:
            return self._model, self._checkpoint_id

    def swap(self, model: RefinerModel, checkpoint_id: str) -> None:
        with self._lock:
            self._model = model
            self._checkpoint_id = checkpoint_id


class SessionStore:
    def __init__(self, ttl_s: float = DEFAULT_SESSION_TTL_S):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.ttl_s = ttl_s

    def create(self, source: Image) -> Session:
        now = time.monotonic()
        session = Session(
            id=secrets.token_urlsafe(32),  # 256 bits of entropy
            source=source,
            created=now,
            expires=now + self.ttl_s,
        )
        with self._lock:
            self._purge(now)
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        now = time.monotonic()
        with self._lock:
            self._purge(now)
            session = self._sessions.get(session_id)
            if session is not None:
                session.expires = now + self.ttl_s
            return session

    def _purge(self, now: float) -> None:
        dead = [sid for sid, s in self._sessions.items() if s.expires <= now]
        for sid in dead:
            del self._sessions[sid]

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


def _decode_image(data: bytes, max_pixels: int) -> Image | JSONResponse:
    try:
        pil = PILImage.open(io.BytesIO(data))
        if pil.width * pil.height > max_pixels:
            return JSONResponse(
                {"detail": f"image exceeds {max_pixels} pixels"}, status_code=413
            )
        pil = pil.convert("RGB")
    except (UnidentifiedImageError, OSError):
        return JSONResponse({"detail": "cannot decode image"}, status_code=415)
    arr = np.asarray(pil, dtype=np.uint8).astype(np.float32) / 255.0
    return Image(arr)


def _decode_mask(data: bytes) -> Mask | JSONResponse:
    try:
        pil = PILImage.open(io.BytesIO(data)).convert("L")
    except (UnidentifiedImageError, OSError):
        return JSONResponse({"detail": "cannot decode mask"}, status_code=415)
    arr = np.asarray(pil, dtype=np.uint8)
    return mask_from_bool(arr >= 128)


def _encode_png(img: Image) -> bytes:
    arr = np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)
    pil = PILImage.fromarray(arr[:, :, 0] if img.channels == 1 else arr)
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def create_app(
    checkpoint_path: str | Path | None = None,
    ui_dir: str | Path | None = None,
    max_pixels: int = DEFAULT_MAX_PIXELS,
    session_ttl_s: float = DEFAULT_SESSION_TTL_S,
    model: RefinerModel | None = None,
) -> FastAPI:
    app = FastAPI(title="hires-inpaint service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    checkpoint_id = None
    if model is None and checkpoint_path is not None:
        model, _, _ = load_checkpoint(checkpoint_path)
        checkpoint_id = hashlib.sha256(Path(checkpoint_path).read_bytes()).hexdigest()
    elif model is not None and checkpoint_path is not None:
        checkpoint_id = hashlib.sha256(Path(checkpoint_path).read_bytes()).hexdigest()
    holder = _ModelHolder(model, checkpoint_id)
    sessions = SessionStore(session_ttl_s)
    started = time.monotonic()
    app.state.sessions = sessions
    app.state.model_holder = holder

    @app.get("/api/v1/health")
    def health():
        current, ckpt_id = holder.get()
        return {
            "status": "ok" if current is not None else "degraded",
            "checkpoint_id": ckpt_id,
            "uptime_s": time.monotonic() - started,
        }

    @app.post("/api/v1/images")
    async def upload_image(image: UploadFile):
        data = await image.read()
        decoded = _decode_image(data, max_pixels)
        if isinstance(decoded, JSONResponse):
            return decoded
        session = sessions.create(decoded)
        return {
            "session_id": session.id,
            "width": decoded.width,
            "height": decoded.height,
        }

    @app.post("/api/v1/sessions/{session_id}/inpaint")
    async def run_inpaint(
        session_id: str,
        mask: UploadFile,
        coarse_backend: str = Form("builtin_pyramid"),
        shift_fraction: float = Form(0.20),
        external_coarse: str | None = Form(None),
    ):
        session = sessions.get(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        current, _ = holder.get()
        if current is None:
            return JSONResponse({"detail": "model not loaded"}, status_code=503)
        decoded = _decode_mask(await mask.read())
        if isinstance(decoded, JSONResponse):
            return decoded
        if (decoded.height, decoded.width) != (session.source.height, session.source.width):
            return JSONResponse(
                {
                    "detail": f"mask {decoded.width}x{decoded.height} does not match "
                    f"source {session.source.width}x{session.source.height}"
                },
                status_code=409,
            )
        if not session.lock.acquire(blocking=False):
            return JSONResponse(
                {"detail": "inpaint already running for this session"}, status_code=409
            )
        try:
            cfg = CoarseConfig(
                backend=coarse_backend,
                external_path=Path(external_coarse) if external_coarse else None,
            )
            result = inpaint(
                current, to_rgb(session.source), decoded, cfg, shift_fraction
            )
            session.last_mask = decoded
            session.last_result = result
        finally:
            session.lock.release()
        return Response(content=_encode_png(result), media_type="image/png")

    @app.post("/api/v1/sessions/{session_id}/promote")
    def promote(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        if session.last_result is None:
            return JSONResponse({"detail": "no result to promote"}, status_code=409)
        session.source = session.last_result
        session.last_result = None
        session.last_mask = None
        return {
            "session_id": session.id,
            "width": session.source.width,
            "height": session.source.height,
        }

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
