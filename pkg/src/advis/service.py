"""HTTP JSON service exposing the budgeted label-query loop.

A session runs the pipeline up to the mode ranking, then hands out one label
query at a time (the top-ranked pixels, in rank order).  After the budget's
worth of answers arrive, the fallback and propagation stages run and the
finished segmentation becomes available.  Sessions persist as JSON manifests
(config + query log) and are rebuilt by deterministic replay after a
restart.  An automated mode answers the queries from the ground-truth file
instead, for headless use.
"""

from __future__ import annotations

import base64
import io
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from pydantic import BaseModel, Field

from . import evaluation, hsi
from .segmentation import (Provenance, Pipeline, RunConfig,
                           assign_mode_labels, propagate)

__all__ = ["create_app"]

PREPARING = "preparing"
AWAITING = "awaiting-label"
COMPLETE = "complete"


class SessionConfig(BaseModel):
    neighbors: int = Field(gt=0)
    classes: int = Field(gt=0)
    sigma0: float = Field(gt=0)
    time: int = Field(ge=0)
    budget: int = Field(ge=0)
    seed: int = 0
    purity_runs: int = 10
    num_materials: int | None = None
    symmetrize: str = "mutual-or"


class SessionRequest(BaseModel):
    cube: str
    labels: str | None = None
    scope: str = "labeled-only"
    normalization: str = "global-max"
    auto_oracle: bool = False
    class_names: list[str] | None = None
    config: SessionConfig


class LabelRequest(BaseModel):
    pixel: int
    label: int = Field(alias="class")

    model_config = {"populate_by_name": True}


@dataclass
class Session:
    id: str
    created: str
    request: SessionRequest
    points: hsi.PointCloud
    shape: tuple[int, int]
    cube_data: np.ndarray
    pipeline: Pipeline
    zeta: np.ndarray
    ranking: object
    state: str = PREPARING
    query_log: list[tuple[int, int]] = field(default_factory=list)
    segmentation: object = None
    nmi: float | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def effective_budget(self) -> int:
        return min(self.request.config.budget, len(self.points))

    @property
    def cursor(self) -> int:
        return len(self.query_log)


def _palette_hex(n_classes: int) -> list[str]:
    # class colors only (the raster palette additionally has an
    # unlabeled color at index 0)
    return ["#%02x%02x%02x" % c
            for c in evaluation.default_palette(n_classes)[1:]]


def _false_color(cube_data: np.ndarray) -> np.ndarray:
    """Stretch three spread-out bands to an (rows, cols, 3) uint8 composite."""
    bands = cube_data.shape[2]
    picks = [int(round(f * (bands - 1))) for f in (0.75, 0.5, 0.25)]
    layers = []
    for b in picks:
        layer = cube_data[:, :, b].astype(np.float64)
        lo, hi = np.percentile(layer, [2, 98])
        if hi <= lo:
            hi = lo + 1.0
        layers.append(np.clip((layer - lo) / (hi - lo), 0.0, 1.0))
    return (np.stack(layers, axis=2) * 255).astype(np.uint8)


def _png_bytes(array: np.ndarray) -> bytes:
    from PIL import Image

    buffer = io.BytesIO()
    Image.fromarray(array).save(buffer, format="PNG")
    return buffer.getvalue()


def create_app(data_root: Path, sessions_dir: Path | None = None,
               frontend_dir: Path | None = None) -> FastAPI:
    """Build the service around a directory of prepared datasets."""
    data_root = Path(data_root).resolve()
    sessions_dir = Path(sessions_dir) if sessions_dir else data_root / "sessions"
    sessions_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="advis label service", version="0.1.0")
    store: dict[str, Session] = {}
    store_lock = threading.Lock()

    def resolve(relative: str) -> Path:
        path = (data_root / relative).resolve()
        if not path.is_relative_to(data_root):
            raise HTTPException(400, "dataset path escapes the data root")
        if not path.exists():
            raise HTTPException(404, f"no such dataset file: {relative}")
        return path

    def manifest_path(session_id: str) -> Path:
        return sessions_dir / f"{session_id}.json"

    def persist(session: Session) -> None:
        payload = {
            "id": session.id,
            "created": session.created,
            "request": session.request.model_dump(),
            "state": session.state,
            "query_log": [list(q) for q in session.query_log],
        }
        manifest_path(session.id).write_text(json.dumps(payload, indent=2))

    def build_session(request: SessionRequest, session_id: str,
                      created: str) -> Session:
        cube = hsi.load_cube(resolve(request.cube))
        label_map = (hsi.load_labels(resolve(request.labels))
                     if request.labels else None)
        if request.scope == "labeled-only" and label_map is None:
            raise HTTPException(400, "labeled-only scope requires a label map")
        points = hsi.flatten(cube, label_map, scope=request.scope,
                             normalization=request.normalization)
        cfg = request.config
        config = RunConfig(
            n_neighbors=cfg.neighbors,
            n_classes=cfg.classes,
            sigma0=cfg.sigma0,
            time=cfg.time,
            budget=cfg.budget,
            purity_runs=cfg.purity_runs,
            seed=cfg.seed,
            num_materials=cfg.num_materials,
            symmetrize=cfg.symmetrize,
        )
        pipeline = Pipeline(points, config)
        try:
            zeta, ranking = pipeline.seed_state(cfg.seed)
        except ValueError as exc:
            raise HTTPException(422, f"pipeline rejected the configuration: {exc}")
        return Session(
            id=session_id,
            created=created,
            request=request,
            points=points,
            shape=(cube.rows, cube.cols),
            cube_data=cube.data,
            pipeline=pipeline,
            zeta=zeta,
            ranking=ranking,
        )

    def finalize(session: Session) -> None:
        answers = [label for _, label in session.query_log]
        partial = assign_mode_labels(session.ranking,
                                     session.request.config.classes, answers)
        session.segmentation = propagate(
            partial, session.zeta, session.pipeline.operator,
            session.request.config.time, dists=session.pipeline.dists)
        gt = session.points.gt
        if gt is not None:
            mask = gt > 0
            session.nmi = evaluation.nmi(session.segmentation.labels[mask],
                                         gt[mask])
        session.state = COMPLETE

    def advance(session: Session) -> None:
        """Run the automated oracle and/or complete a filled budget."""
        if session.state == COMPLETE:
            return
        if session.request.auto_oracle:
            if session.points.gt is None:
                raise HTTPException(400, "auto oracle requires a label map")
            while session.cursor < session.effective_budget:
                pixel = int(session.ranking.ordering[session.cursor])
                session.query_log.append((pixel, int(session.points.gt[pixel])))
        if session.cursor >= session.effective_budget:
            finalize(session)
        else:
            session.state = AWAITING

    def load_session(session_id: str) -> Session:
        with store_lock:
            if session_id in store:
                return store[session_id]
        manifest = manifest_path(session_id)
        if not manifest.exists():
            raise HTTPException(404, f"unknown session {session_id}")
        payload = json.loads(manifest.read_text())
        request = SessionRequest(**payload["request"])
        session = build_session(request, payload["id"], payload["created"])
        # replay the logged answers
        for k, (pixel, label) in enumerate(payload["query_log"]):
            expected = int(session.ranking.ordering[k])
            if pixel != expected:
                raise HTTPException(
                    500, f"manifest query {k} targets pixel {pixel}, "
                         f"ranking says {expected}; dataset changed?")
            session.query_log.append((int(pixel), int(label)))
        advance(session)
        with store_lock:
            store[session_id] = session
        return session

    def session_meta(session: Session) -> dict:
        cfg = session.request.config
        names = session.request.class_names or [
            f"class {k}" for k in range(1, cfg.classes + 1)]
        return {
            "id": session.id,
            "created": session.created,
            "state": session.state,
            "budget": cfg.budget,
            "effective_budget": session.effective_budget,
            "cursor": session.cursor,
            "classes": cfg.classes,
            "class_names": names,
            "palette": _palette_hex(cfg.classes),
            "rows": session.shape[0],
            "cols": session.shape[1],
            "n_points": len(session.points),
            "auto_oracle": session.request.auto_oracle,
            "config": session.request.config.model_dump(),
        }

    @app.post("/sessions", status_code=201)
    def create_session(request: SessionRequest):
        session_id = uuid.uuid4().hex[:12]
        created = time.strftime("%Y-%m-%dT%H:%M:%S")
        session = build_session(request, session_id, created)
        advance(session)
        persist(session)
        with store_lock:
            store[session_id] = session
        return session_meta(session)

    @app.get("/sessions")
    def list_sessions():
        ids = sorted(p.stem for p in sessions_dir.glob("*.json"))
        return {"sessions": ids}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return session_meta(load_session(session_id))

    @app.get("/sessions/{session_id}/query")
    def next_query(session_id: str):
        session = load_session(session_id)
        with session.lock:
            if session.state != AWAITING:
                raise HTTPException(409, f"session is {session.state}; "
                                         "no label query is open")
            k = session.cursor
            pixel = int(session.ranking.ordering[k])
            row, col = (int(v) for v in session.points.pixel_index[pixel])
            composite = _false_color(session.cube_data)
            half = 16
            r0, r1 = max(0, row - half), min(session.shape[0], row + half + 1)
            c0, c1 = max(0, col - half), min(session.shape[1], col + half + 1)
            tile = composite[r0:r1, c0:c1]
            return {
                "pixel": pixel,
                "row": row,
                "col": col,
                "rank": k + 1,
                "budget": session.effective_budget,
                "spectrum": [float(v) for v in session.points.points[pixel]],
                "context_tile": {
                    "png_base64": base64.b64encode(_png_bytes(tile)).decode(),
                    "row_offset": r0,
                    "col_offset": c0,
                },
            }

    @app.post("/sessions/{session_id}/label")
    def submit_label(session_id: str, body: LabelRequest):
        session = load_session(session_id)
        with session.lock:
            classes = session.request.config.classes
            # idempotent repeat of the most recent submission
            if session.query_log and session.query_log[-1] == (body.pixel,
                                                               body.label):
                return session_meta(session)
            if session.state != AWAITING:
                raise HTTPException(409, f"session is {session.state}")
            expected = int(session.ranking.ordering[session.cursor])
            if body.pixel != expected:
                raise HTTPException(
                    409, f"out-of-order submission: expected pixel {expected}, "
                         f"got {body.pixel}")
            if not 1 <= body.label <= classes:
                raise HTTPException(422, f"class must be in 1..{classes}")
            session.query_log.append((int(body.pixel), int(body.label)))
            if session.cursor >= session.effective_budget:
                finalize(session)
            persist(session)
            return session_meta(session)

    @app.get("/sessions/{session_id}/segmentation")
    def get_segmentation(session_id: str):
        session = load_session(session_id)
        with session.lock:
            seg = session.segmentation
            if session.state == COMPLETE:
                labels = seg.labels
                provenance = seg.provenance
            else:
                # partial view: queried pixels only
                labels = np.zeros(len(session.points), dtype=np.int32)
                provenance = np.zeros(len(session.points), dtype=np.int8)
                for k, (pixel, label) in enumerate(session.query_log):
                    labels[pixel] = label
                    provenance[pixel] = Provenance.QUERIED
            return {
                "state": session.state,
                "n_classes": session.request.config.classes,
                "labels": labels.tolist(),
                "provenance": provenance.tolist(),
                "pixel_index": session.points.pixel_index.tolist(),
                "query_log": [{"pixel": p, "class": c}
                              for p, c in session.query_log],
                "nmi": session.nmi,
            }

    def _label_raster(session: Session) -> np.ndarray:
        raster = np.zeros(session.shape, dtype=np.int32)
        if session.segmentation is not None:
            index = session.points.pixel_index
            raster[index[:, 0], index[:, 1]] = session.segmentation.labels
        else:
            for pixel, label in session.query_log:
                row, col = session.points.pixel_index[pixel]
                raster[row, col] = label
        return raster

    @app.get("/sessions/{session_id}/image")
    def label_image(session_id: str):
        session = load_session(session_id)
        with session.lock:
            raster = _label_raster(session)
            palette = evaluation.default_palette(session.request.config.classes)
            rgb = np.array(palette, dtype=np.uint8)[raster]
            return Response(content=_png_bytes(rgb), media_type="image/png")

    @app.get("/sessions/{session_id}/context")
    def context_image(session_id: str):
        session = load_session(session_id)
        return Response(content=_png_bytes(_false_color(session.cube_data)),
                        media_type="image/png")

    if frontend_dir is not None and Path(frontend_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=Path(frontend_dir), html=True),
                  name="frontend")

    return app
