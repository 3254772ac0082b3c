"""HTTP service around a trained checkpoint: generation, editing, jobs.

Async job model with a bounded in-memory queue and an on-disk artifact store
(runs/{job_id}/). Small generation jobs run inline and return their motions
in the response body.
"""
from __future__ import annotations

import json
import math
import os
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .baselines import make_generator
from .datagen import config_hash, load_dataset
from .denoiser import load_checkpoint
from .diffusion import SamplerConfig, make_schedule, sample_batch
from .longform import constrained_sample
from .metrics import evaluate
from .motion import Motion, Pose, PoseLayout
from .observation import Keyframe, KeyframeSet, ObservationSignal, place_on_timeline
from .skeleton import Skeleton

DEFAULT_QUEUE_DEPTH = 8
INLINE_SAMPLE_BUDGET = 4  # num_samples * windows at or below this runs inline


class KeyframePayload(BaseModel):
    frame: int = Field(ge=0)
    pose: list[float]


class GenerateRequest(BaseModel):
    keyframes: list[KeyframePayload]
    F_total: int = Field(default=60, ge=2)
    num_samples: int = Field(default=1, ge=1, le=64)
    seed: int = 0
    mode: str = "model"  # model | interp
    imputation_C: int | None = None


class EditRequest(BaseModel):
    base_motion_id: str
    keep_ranges: list[tuple[int, int]]
    keyframes: list[KeyframePayload] = []
    F_total: int | None = None
    num_samples: int = Field(default=1, ge=1, le=64)
    seed: int = 0
    imputation_C: int | None = None


class EvalRequest(BaseModel):
    testset_dir: str
    baseline: str = "LT"
    num_samples: int = Field(default=1, ge=1, le=16)
    seed: int = 0
    imputation_C: int = 0
    max_pairs: int | None = None


@dataclass
class JobRecord:
    job_id: str
    kind: str  # generate | train | eval
    status: str = "queued"  # queued -> running -> done | failed
    created_at: float = field(default_factory=time.time)
    started_at: float | None = None
    finished_at: float | None = None
    result_uri: str | None = None
    error: str | None = None
    motion_ids: list[str] = field(default_factory=list)
    metrics: dict | None = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "status": self.status,
            "created_at": self.created_at,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "result_uri": self.result_uri,
            "error": self.error,
            "motion_ids": self.motion_ids,
            "metrics": self.metrics,
        }


def artifact_root(override=None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get("LOOSEKEY_HOME", ".loosekey"))


class ServiceState:
    def __init__(self, checkpoint_path, artifacts=None, queue_depth=DEFAULT_QUEUE_DEPTH):
        self.model, self.header = load_checkpoint(checkpoint_path)
        self.checkpoint_path = str(checkpoint_path)
        self.layout = PoseLayout.from_dict(self.header["layout"])
        self.skeleton = Skeleton.from_dict(self.header["skeleton"])
        self.fps = float(self.header.get("fps", 30.0))
        sched = self.header.get("schedule", {"kind": "cosine", "num_steps": 100})
        self.schedule_kind = sched["kind"]
        self.num_steps = int(sched["num_steps"])
        self.schedule = make_schedule(self.schedule_kind, self.num_steps)
        self.root = artifact_root(artifacts)
        (self.root / "runs").mkdir(parents=True, exist_ok=True)
        self.jobs: dict[str, JobRecord] = {}
        self.motions: dict[str, Path] = {}
        self.lock = threading.Lock()
        self.queue: queue.Queue = queue.Queue()
        self.queue_depth = queue_depth
        self.workers = [
            threading.Thread(target=self._work_loop, daemon=True) for _ in range(2)
        ]
        for w in self.workers:
            w.start()

    # -- job plumbing ------------------------------------------------------

    def submit(self, record: JobRecord, fn) -> None:
        with self.lock:
            queued = sum(1 for j in self.jobs.values() if j.status in ("queued", "running"))
            if queued >= self.queue_depth:
                raise HTTPException(status_code=409, detail="server busy: job queue full")
            self.jobs[record.job_id] = record
        self.queue.put((record, fn))

    def run_inline(self, record: JobRecord, fn) -> JobRecord:
        with self.lock:
            self.jobs[record.job_id] = record
        self._execute(record, fn)
        if record.status == "failed":
            raise HTTPException(status_code=500, detail=record.error)
        return record

    def _work_loop(self):
        while True:
            record, fn = self.queue.get()
            self._execute(record, fn)

    def _execute(self, record: JobRecord, fn):
        record.status = "running"
        record.started_at = time.time()
        try:
            fn(record)
            record.status = "done"
        except Exception as e:  # surfaced through the job record
            record.status = "failed"
            record.error = f"{type(e).__name__}: {e}"
        record.finished_at = time.time()

    def job_dir(self, job_id: str) -> Path:
        d = self.root / "runs" / job_id
        d.mkdir(parents=True, exist_ok=True)
        return d

    def store_motion(self, job_id: str, index: int, motion: Motion) -> str:
        motion_id = f"{job_id}-{index}"
        path = self.job_dir(job_id) / f"motion_{index}.json"
        doc = {
            "version": 1,
            "fps": motion.fps,
            "layout": motion.layout.to_dict(),
            "frames": motion.frames.tolist(),
        }
        path.write_text(json.dumps(doc))
        with self.lock:
            self.motions[motion_id] = path
        return motion_id

    # -- generation --------------------------------------------------------

    def build_signal(self, payloads: list[KeyframePayload], total: int) -> ObservationSignal:
        problems = []
        if not payloads:
            problems.append("keyframes: at least one constraint is required")
        seen = set()
        for i, kp in enumerate(payloads):
            if kp.frame >= total:
                problems.append(f"keyframes[{i}].frame: {kp.frame} >= F_total={total}")
            if kp.frame in seen:
                problems.append(f"keyframes[{i}].frame: duplicate index {kp.frame}")
            seen.add(kp.frame)
            if len(kp.pose) != self.layout.dim:
                problems.append(
                    f"keyframes[{i}].pose: length {len(kp.pose)} != layout dim {self.layout.dim}"
                )
        if problems:
            raise HTTPException(status_code=400, detail=problems)
        entries = tuple(
            Keyframe(frame=kp.frame, pose=Pose(layout=self.layout, values=np.asarray(kp.pose)))
            for kp in sorted(payloads, key=lambda k: k.frame)
        )
        keys = KeyframeSet(entries=entries, length=total, fps=self.fps)
        return place_on_timeline(keys)

    def generate_motions(self, signal: ObservationSignal, num_samples, seed, mode, imputation_c):
        cfg = SamplerConfig(
            num_steps=self.num_steps,
            schedule=self.schedule_kind,
            imputation_c=-1 if imputation_c is None else imputation_c,
            seed=seed,
            num_samples=num_samples,
        )
        if mode == "interp":
            from .observation import infill_linear

            return [infill_linear(signal)] * num_samples
        if signal.num_frames == self.model.config.frames:
            return [
                Motion(layout=signal.layout, fps=signal.fps, frames=f)
                for f in sample_batch([signal] * num_samples, self.model, self.schedule, cfg)
            ]
        return [
            constrained_sample(signal, self.model, self.schedule, cfg, sample_index=i)
            for i in range(num_samples)
        ]


def create_app(
    checkpoint_path, artifacts=None, queue_depth=DEFAULT_QUEUE_DEPTH, ui_dir=None
) -> FastAPI:
    state = ServiceState(checkpoint_path, artifacts=artifacts, queue_depth=queue_depth)
    app = FastAPI(title="loosekey", version="0.1.0")
    app.state.service = state
    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/studio", StaticFiles(directory=ui_dir, html=True), name="studio")

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        details = [
            f"{'.'.join(str(p) for p in err['loc'] if p != 'body')}: {err['msg']}"
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": details})

    @app.get("/health")
    def health():
        return {"status": "ok", "checkpoint": state.checkpoint_path}

    @app.get("/skeleton")
    def skeleton():
        rest = state.skeleton.rest_positions()
        return {
            "skeleton": state.skeleton.to_dict(),
            "layout": state.layout.to_dict(),
            "fps": state.fps,
            "frames": state.model.config.frames,
            "max_shift": int(state.header.get("max_shift", 5)),
            "rest_positions": rest.tolist(),
        }

    def _min_total(requested: int) -> int:
        if requested < state.model.config.frames:
            raise HTTPException(
                status_code=400,
                detail=[f"F_total: must be >= model window {state.model.config.frames}"],
            )
        return requested

    def _launch_generation(kind: str, signal, num_samples, seed, mode, imputation_c):
        job_id = uuid.uuid4().hex[:12]
        record = JobRecord(job_id=job_id, kind=kind)

        def run(rec: JobRecord):
            motions = state.generate_motions(signal, num_samples, seed, mode, imputation_c)
            rec.motion_ids = [
                state.store_motion(job_id, i, m) for i, m in enumerate(motions)
            ]
            # per-sample keypose error against the submitted constraints (UI badge)
            keyposes = [
                Pose(layout=state.layout, values=signal.buffer[f])
                for f in signal.constrained_indices()
            ]
            if keyposes:
                from .metrics import kpe

                rec.metrics = {
                    "kpe_per_motion": [
                        float(np.mean([kpe(m, kp, state.skeleton) for kp in keyposes]))
                        for m in motions
                    ]
                }
            rec.result_uri = f"/jobs/{job_id}"
            meta = {
                "kind": kind,
                "seed": seed,
                "mode": mode,
                "num_samples": num_samples,
                "imputation_C": imputation_c,
                "config_hash": config_hash(state.header.get("net", {})),
            }
            (state.job_dir(job_id) / "job.json").write_text(json.dumps(meta, sort_keys=True))

        windows = max(1, math.ceil(signal.num_frames / state.model.config.frames))
        if num_samples * windows <= INLINE_SAMPLE_BUDGET:
            record = state.run_inline(record, run)
            body = {
                "job_id": job_id,
                "status": record.status,
                "motion_ids": record.motion_ids,
                "metrics": record.metrics,
            }
            body["motions"] = [
                json.loads(state.motions[mid].read_text()) for mid in record.motion_ids
            ]
            return body
        state.submit(record, run)
        return {"job_id": job_id, "status": record.status}

    @app.post("/generate")
    def generate(req: GenerateRequest):
        total = _min_total(req.F_total)
        signal = state.build_signal(req.keyframes, total)
        return _launch_generation(
            "generate", signal, req.num_samples, req.seed, req.mode, req.imputation_C
        )

    @app.post("/edit")
    def edit(req: EditRequest):
        with state.lock:
            path = state.motions.get(req.base_motion_id)
        if path is None:
            raise HTTPException(status_code=404, detail=f"unknown motion {req.base_motion_id!r}")
        doc = json.loads(path.read_text())
        base = np.asarray(doc["frames"], dtype=np.float64)
        total = _min_total(req.F_total or base.shape[0])
        problems = []
        mask = np.zeros(total, dtype=bool)
        buf = np.zeros((total, state.layout.dim))
        for i, (a, b) in enumerate(req.keep_ranges):
            if not 0 <= a < b <= base.shape[0] or b > total:
                problems.append(f"keep_ranges[{i}]: [{a}, {b}) invalid for length {base.shape[0]}")
                continue
            mask[a:b] = True
            buf[a:b] = base[a:b]
        for i, kp in enumerate(req.keyframes):
            if kp.frame >= total:
                problems.append(f"keyframes[{i}].frame: {kp.frame} >= F_total={total}")
            elif mask[kp.frame]:
                problems.append(f"keyframes[{i}].frame: {kp.frame} collides with a kept range")
            elif len(kp.pose) != state.layout.dim:
                problems.append(
                    f"keyframes[{i}].pose: length {len(kp.pose)} != layout dim {state.layout.dim}"
                )
            else:
                buf[kp.frame] = kp.pose
                mask[kp.frame] = True
        if problems:
            raise HTTPException(status_code=400, detail=problems)
        if not mask.any():
            raise HTTPException(status_code=400, detail=["constraints: nothing kept or added"])
        buf[:, state.layout.contacts] = 0.0
        signal = ObservationSignal(layout=state.layout, fps=state.fps, buffer=buf, mask=mask)
        return _launch_generation(
            "generate", signal, req.num_samples, req.seed, "model", req.imputation_C
        )

    @app.post("/eval")
    def eval_endpoint(req: EvalRequest):
        try:
            manifest, pairs = load_dataset(req.testset_dir)
        except FileNotFoundError as e:
            raise HTTPException(status_code=400, detail=[f"testset_dir: {e}"])
        if req.max_pairs:
            pairs = pairs[: req.max_pairs]
        cfg = SamplerConfig(
            num_steps=state.num_steps,
            schedule=state.schedule_kind,
            seed=req.seed,
            num_samples=req.num_samples,
        )
        try:
            generator = make_generator(
                req.baseline,
                model=state.model,
                schedule=state.schedule,
                sampler_cfg=cfg,
                imputation_c=req.imputation_C,
            )
        except ValueError as e:
            raise HTTPException(status_code=400, detail=[f"baseline: {e}"])
        job_id = uuid.uuid4().hex[:12]
        record = JobRecord(job_id=job_id, kind="eval")

        def run(rec: JobRecord):
            report = evaluate(generator, pairs, state.skeleton, num_samples=req.num_samples)
            rec.metrics = report.to_dict()
            rec.result_uri = f"/metrics/{job_id}"
            (state.job_dir(job_id) / "report.json").write_text(
                json.dumps(rec.metrics, sort_keys=True)
            )

        state.submit(record, run)
        return {"job_id": job_id, "status": record.status}

    @app.get("/jobs/{job_id}")
    def job(job_id: str):
        with state.lock:
            record = state.jobs.get(job_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return record.to_dict()

    @app.get("/jobs")
    def jobs():
        with state.lock:
            return [r.to_dict() for r in state.jobs.values()]

    @app.get("/motions/{motion_id}")
    def motion(motion_id: str):
        with state.lock:
            path = state.motions.get(motion_id)
        if path is None:
            raise HTTPException(status_code=404, detail=f"unknown motion {motion_id!r}")
        return json.loads(path.read_text())

    @app.get("/metrics/{job_id}")
    def metrics(job_id: str):
        with state.lock:
            record = state.jobs.get(job_id)
        if record is None or record.kind != "eval":
            raise HTTPException(status_code=404, detail=f"no eval job {job_id!r}")
        if record.status != "done":
            return {"job_id": job_id, "status": record.status}
        return {"job_id": job_id, "status": "done", "metrics": record.metrics}

    return app
