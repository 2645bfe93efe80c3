"""HTTP session service: live interactive-adaptation sessions over JSON.

One shared model instance serves all sessions; every forward pass and every
parameter update passes through a single lock, so model versions are totally
ordered and no update is lost. Clicks within a session are strictly ordered:
a second click arriving while one is being processed is rejected.

Masks travel as run-length-encoded class rasters (row-major [value, length]
pairs) inside JSON; `GET /sessions/{id}/mask.png` serves the same mask as an
indexed PNG. All payloads carry a schema version field `v` (currently 1).
"""
from __future__ import annotations

import base64
import hashlib
import itertools
import threading
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .core import AdaptationConfig, Click, ClickSet, Image, LabelMask
from .dataio import image_to_png_bytes, load_dataset, mask_to_png_bytes, png_bytes_to_image
from .engine import SessionState, mi_step, pi_adapt, plain_step
from .errors import (
    BadImage,
    ClickAdaptError,
    ConcurrentClick,
    ConfigError,
    CorruptCheckpoint,
    NoModelLoaded,
    OutOfBounds,
    SessionNotFound,
)
from .metrics import foreground_dice
from .model import AdamUpdater, ClickSegmenter
from .rng import image_rngs

WIRE_VERSION = 1

_STATUS_CODES = {
    BadImage: 400,
    OutOfBounds: 400,
    ConfigError: 400,
    CorruptCheckpoint: 400,
    SessionNotFound: 404,
    ConcurrentClick: 409,
    NoModelLoaded: 503,
}


def encode_mask_rle(mask: LabelMask) -> dict:
    """Row-major run-length encoding: {"v", "shape", "runs": [[value, n], ...]}."""
    flat = mask.labels.reshape(-1)
    runs: list[list[int]] = []
    if flat.size:
        change = np.flatnonzero(np.diff(flat)) + 1
        starts = np.concatenate([[0], change])
        ends = np.concatenate([change, [flat.size]])
        runs = [[int(flat[s]), int(e - s)] for s, e in zip(starts, ends)]
    return {
        "v": WIRE_VERSION,
        "shape": [mask.height, mask.width],
        "runs": runs,
    }


def decode_mask_rle(payload: dict, num_classes: int) -> LabelMask:
    h, w = payload["shape"]
    flat = np.empty(h * w, dtype=np.int64)
    pos = 0
    for value, length in payload["runs"]:
        flat[pos : pos + length] = value
        pos += length
    if pos != h * w:
        raise ValueError("RLE runs do not cover the raster")
    return LabelMask(flat.reshape(h, w), num_classes)


class CreateSessionRequest(BaseModel):
    v: int = WIRE_VERSION
    image_b64: Optional[str] = None
    dataset_id: Optional[str] = None
    config: Optional[dict] = None


class ClickRequest(BaseModel):
    v: int = WIRE_VERSION
    row: int
    col: int
    class_label: int


class FinishRequest(BaseModel):
    v: int = WIRE_VERSION
    accept: bool


class LoadCheckpointRequest(BaseModel):
    v: int = WIRE_VERSION
    path: Optional[str] = None
    blob_b64: Optional[str] = None


@dataclass
class ServiceSettings:
    checkpoint: Optional[str] = None
    dataset: Optional[str] = None
    config: AdaptationConfig = dc_field(default_factory=AdaptationConfig)
    ui_dir: Optional[str] = None


@dataclass
class _Session:
    session_id: str
    index: int
    state: SessionState
    cfg: AdaptationConfig
    gt: Optional[LabelMask]
    adapt_rng: np.random.Generator
    open_version: int
    closed: bool = False
    lock: threading.Lock = dc_field(default_factory=threading.Lock)

    @property
    def last_mask(self) -> Optional[LabelMask]:
        return self.state.masks[-1] if self.state.masks else None


class ServiceCore:
    """Model, optimizer, and session registry behind the HTTP surface."""

    def __init__(self, settings: ServiceSettings):
        self.settings = settings
        self.config = settings.config
        self.model: Optional[ClickSegmenter] = None
        self.updater: Optional[AdamUpdater] = None
        self.checkpoint_id: Optional[str] = None
        self.sessions: dict[str, _Session] = {}
        self.model_lock = threading.Lock()
        self._counter = itertools.count()
        self.dataset: dict[str, tuple[Image, Optional[LabelMask]]] = {}
        if settings.dataset:
            samples, _ = load_dataset(settings.dataset)
            self.dataset = {s.image_id: (s.image, s.mask) for s in samples}
        if settings.checkpoint:
            self.load_checkpoint_blob(Path(settings.checkpoint).read_bytes())

    def load_checkpoint_blob(self, blob: bytes) -> dict:
        model = ClickSegmenter.restore(blob)
        with self.model_lock:
            self.model = model
            self.updater = AdamUpdater(model, self.config.lr_mi)
            self.checkpoint_id = hashlib.sha256(blob).hexdigest()[:12]
            self.sessions.clear()  # parameter lineage changed; old sessions are void
        return {"checkpoint_id": self.checkpoint_id, "model_version": model.version}

    def _require_model(self) -> ClickSegmenter:
        if self.model is None:
            raise NoModelLoaded("load a checkpoint before opening sessions")
        return self.model

    def create_session(self, req: CreateSessionRequest) -> dict:
        model = self._require_model()
        gt: Optional[LabelMask] = None
        if req.image_b64 is not None:
            try:
                raw = base64.b64decode(req.image_b64)
            except Exception as exc:
                raise BadImage(f"invalid base64 image payload: {exc}")
            image = png_bytes_to_image(raw)
        elif req.dataset_id is not None:
            if req.dataset_id not in self.dataset:
                raise BadImage(f"unknown dataset id {req.dataset_id!r}")
            image, gt = self.dataset[req.dataset_id]
        else:
            raise BadImage("provide image_b64 or dataset_id")
        if image.channels != model.spec.image_channels:
            raise BadImage(
                f"model expects {model.spec.image_channels}-channel images"
            )
        cfg = self.config
        if req.config:
            try:
                cfg = cfg.replace(**req.config)
            except (TypeError, ConfigError) as exc:
                raise ConfigError(f"bad config overrides: {exc}")
        index = next(self._counter)
        session_id = f"s{index:06d}"
        _, adapt_rng = image_rngs(cfg.rng_seed, index)
        self.sessions[session_id] = _Session(
            session_id=session_id,
            index=index,
            state=SessionState(image=image, config=cfg),
            cfg=cfg,
            gt=gt,
            adapt_rng=adapt_rng,
            open_version=model.version,
        )
        return {
            "v": WIRE_VERSION,
            "session_id": session_id,
            "height": image.height,
            "width": image.width,
            "num_classes": model.spec.num_classes,
            "model_version": model.version,
            "evaluation": gt is not None,
        }

    def _get_session(self, session_id: str) -> _Session:
        session = self.sessions.get(session_id)
        if session is None or session.closed:
            raise SessionNotFound(f"no open session {session_id!r}")
        return session

    def submit_click(self, session_id: str, req: ClickRequest) -> dict:
        session = self._get_session(session_id)
        model = self._require_model()
        image = session.state.image
        if not (0 <= req.row < image.height and 0 <= req.col < image.width):
            raise OutOfBounds(f"click ({req.row}, {req.col}) outside the image")
        if not 0 <= req.class_label < model.spec.num_classes:
            raise OutOfBounds(f"class {req.class_label} out of range")
        if (req.row, req.col) in session.state.click_history.positions():
            raise OutOfBounds(f"pixel ({req.row}, {req.col}) already clicked")
        if not session.lock.acquire(blocking=False):
            raise ConcurrentClick("a click for this session is still processing")
        try:
            click = Click(row=req.row, col=req.col, class_label=req.class_label)
            t0 = time.perf_counter()
            with self.model_lock:
                if session.state.t == 0 or not session.cfg.mi_enabled:
                    mask = plain_step(session.state, click, model)
                else:
                    mask = mi_step(session.state, click, model, self.updater)
            elapsed = time.perf_counter() - t0
            return {
                "v": WIRE_VERSION,
                "session_id": session_id,
                "t": session.state.t,
                "model_version": model.version,
                "mask": encode_mask_rle(mask),
                "timings": {"total_s": elapsed},
            }
        finally:
            session.lock.release()

    def finish_session(self, session_id: str, req: FinishRequest) -> dict:
        session = self._get_session(session_id)
        model = self._require_model()
        if session.state.t < 1:
            raise ConfigError("submit at least one click before finishing")
        if not session.lock.acquire(blocking=False):
            raise ConcurrentClick("a click for this session is still processing")
        try:
            updates = 0
            if req.accept and session.cfg.pi_enabled:
                session.state.p_final = session.state.masks[-1]
                with self.model_lock:
                    updates = pi_adapt(
                        session.state, model, self.updater, session.adapt_rng
                    )
            session.closed = True
            out = {
                "v": WIRE_VERSION,
                "session_id": session_id,
                "updates_applied": updates,
                "model_version": model.version,
            }
            if session.gt is not None and session.state.masks:
                _, mean = foreground_dice(
                    session.state.masks[-1], session.gt, model.spec.num_classes
                )
                out["dice"] = mean
            return out
        finally:
            session.lock.release()

    def mask_png(self, session_id: str) -> bytes:
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionNotFound(f"no session {session_id!r}")
        mask = session.last_mask
        if mask is None:
            raise SessionNotFound("session has no mask yet")
        return mask_to_png_bytes(mask)

    def image_png(self, session_id: str) -> bytes:
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionNotFound(f"no session {session_id!r}")
        return image_to_png_bytes(session.state.image)

    def status(self) -> dict:
        open_sessions = sum(1 for s in self.sessions.values() if not s.closed)
        return {
            "v": WIRE_VERSION,
            "model_loaded": self.model is not None,
            "model_version": self.model.version if self.model else None,
            "checkpoint_id": self.checkpoint_id,
            "num_classes": self.model.spec.num_classes if self.model else None,
            "open_sessions": open_sessions,
            "config": self.config.to_dict(),
        }


def create_app(settings: Optional[ServiceSettings] = None) -> FastAPI:
    settings = settings or ServiceSettings()
    core = ServiceCore(settings)
    app = FastAPI(title="clickadapt session service")
    app.state.core = core

    @app.exception_handler(ClickAdaptError)
    async def _domain_error(_, exc: ClickAdaptError):
        code = _STATUS_CODES.get(type(exc), 500)
        return JSONResponse(
            status_code=code,
            content={"v": WIRE_VERSION, "error": type(exc).__name__, "detail": str(exc)},
        )

    def _check_version(v: int) -> None:
        if v != WIRE_VERSION:
            raise ConfigError(f"unsupported wire version {v}")

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        _check_version(req.v)
        return core.create_session(req)

    @app.post("/sessions/{session_id}/clicks")
    def submit_click(session_id: str, req: ClickRequest):
        _check_version(req.v)
        return core.submit_click(session_id, req)

    @app.post("/sessions/{session_id}/finish")
    def finish_session(session_id: str, req: FinishRequest):
        _check_version(req.v)
        return core.finish_session(session_id, req)

    @app.get("/sessions/{session_id}/mask.png")
    def mask_png(session_id: str):
        return Response(content=core.mask_png(session_id), media_type="image/png")

    @app.get("/sessions/{session_id}/image.png")
    def image_png(session_id: str):
        return Response(content=core.image_png(session_id), media_type="image/png")

    @app.get("/status")
    def status():
        return core.status()

    @app.post("/model/checkpoint")
    def load_checkpoint(req: LoadCheckpointRequest):
        _check_version(req.v)
        if req.blob_b64:
            blob = base64.b64decode(req.blob_b64)
        elif req.path:
            p = Path(req.path)
            if not p.exists():
                raise ConfigError(f"checkpoint not found: {req.path}")
            blob = p.read_bytes()
        else:
            raise ConfigError("provide path or blob_b64")
        out = core.load_checkpoint_blob(blob)
        return {"v": WIRE_VERSION, **out}

    if settings.ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=settings.ui_dir, html=True), name="ui")

    return app
