"""HTTP API hosting run lifecycle management, the scenario library, config
validation, scene previews and live metric streaming.

One process hosts the API and the trainer; training runs execute on a
single-worker queue. All cross-boundary communication happens through the
metrics stream and immutable artifacts under the data directory
(REACHSIM_DATA_DIR, default ./reachsim_data).
"""

import json
import os
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import PlainTextResponse, StreamingResponse

from . import configio
from .errors import ValidationError
from .metrics import MetricsSink

DATA_DIR_ENV = "REACHSIM_DATA_DIR"

PENDING, RUNNING_S, EVALUATING, COMPLETED, FAILED, STOPPED = (
    "Pending", "Running", "Evaluating", "Completed", "Failed", "Stopped",
)

N_REPLAY_TRAJECTORIES = 5


@dataclass
class RunHandle:
    run_id: str
    name: str
    status: str = PENDING
    steps: int = 0
    budget: int = 0
    started_at: float = None
    run_dir: str = ""
    error: str = ""

    def to_dict(self):
        return {
            "run_id": self.run_id,
            "name": self.name,
            "status": self.status,
            "steps": self.steps,
            "budget": self.budget,
            "started_at": self.started_at,
            "artifacts": {
                "metrics": os.path.join(self.run_dir, "metrics.jsonl"),
                "checkpoint": os.path.join(self.run_dir, "checkpoint_final.bin"),
                "eval_latest": os.path.join(self.run_dir, "eval_latest.json"),
                "trajectories": [
                    os.path.join(self.run_dir, f"trajectory_{i}.jsonl")
                    for i in range(N_REPLAY_TRAJECTORIES)
                ],
            },
            "error": self.error,
        }


class _TrackingSink(MetricsSink):
    """Metrics sink that mirrors the latest step onto the run handle."""

    def __init__(self, path, run_id, handle):
        super().__init__(path, run_id)
        self._handle = handle

    def emit(self, record):
        super().emit(record)
        if record.step > self._handle.steps:
            self._handle.steps = record.step


class RunManager:
    """Owns run handles and executes queued training runs one at a time."""

    def __init__(self, data_dir=None):
        self.data_dir = data_dir or os.environ.get(DATA_DIR_ENV, "reachsim_data")
        os.makedirs(self.data_dir, exist_ok=True)
        self._runs = {}
        self._sinks = {}
        self._stops = {}
        self._lock = threading.Lock()
        self._queue = queue.Queue()
        self._worker = threading.Thread(target=self._work, daemon=True)
        self._worker.start()

    def start_run(self, saved):
        violations = configio.validate_config(saved)
        if violations:
            raise ValidationError("; ".join(violations))
        run_id = uuid.uuid4().hex[:12]
        run_dir = os.path.join(self.data_dir, run_id)
        os.makedirs(run_dir, exist_ok=True)
        configio.save_config(saved, os.path.join(run_dir, "config.cfg"))
        handle = RunHandle(
            run_id=run_id, name=saved.name, budget=saved.hyper.total_steps,
            run_dir=run_dir,
        )
        sink = _TrackingSink(os.path.join(run_dir, "metrics.jsonl"), run_id, handle)
        stop = threading.Event()
        with self._lock:
            self._runs[run_id] = handle
            self._sinks[run_id] = sink
            self._stops[run_id] = stop
        self._queue.put((handle, saved, sink, stop))
        return handle

    def _work(self):
        import torch

        from . import ppo
        from .metrics import evaluation_run

        while True:
            handle, saved, sink, stop = self._queue.get()
            handle.status = RUNNING_S
            handle.started_at = time.time()

            def on_phase(phase, step, handle=handle):
                if handle.status in (RUNNING_S, EVALUATING):
                    handle.status = EVALUATING if phase == "evaluating" else RUNNING_S

            try:
                torch.set_num_threads(1)
                final = ppo.train(
                    saved.config, saved.hyper, sink=sink, run_dir=handle.run_dir,
                    stop_event=stop, run_id=handle.run_id, on_phase=on_phase,
                )
                handle.steps = final.step
                # record replay trajectories with the final policy
                net, config, _ = ppo.policy_from_checkpoint(final)
                _, trajs = evaluation_run(
                    ppo.make_policy_fn(net), config, N_REPLAY_TRAJECTORIES,
                    seed=saved.hyper.seed + 1, record_trajectories=True,
                )
                for i, traj in enumerate(trajs):
                    path = os.path.join(handle.run_dir, f"trajectory_{i}.jsonl")
                    with open(path, "w", encoding="utf-8") as fh:
                        header = {"targets": traj["targets"], "success": traj["success"]}
                        fh.write(json.dumps(header) + "\n")
                        for s in traj["samples"]:
                            fh.write(json.dumps(s) + "\n")
                handle.status = STOPPED if stop.is_set() else COMPLETED
                if final.extra.get("status") == "unstable":
                    handle.status = FAILED
                    handle.error = "run flagged Unstable after 3 aborted updates"
            except Exception as exc:  # noqa: BLE001 - surfaced on the handle
                handle.status = FAILED
                handle.error = str(exc)
            finally:
                sink.close()

    def get(self, run_id):
        with self._lock:
            handle = self._runs.get(run_id)
        if handle is None:
            raise KeyError(run_id)
        return handle

    def stop(self, run_id):
        handle = self.get(run_id)
        self._stops[run_id].set()
        return handle

    def sink(self, run_id):
        return self._sinks.get(run_id)


def create_app(data_dir=None):
    app = FastAPI(title="reachsim API")
    manager = RunManager(data_dir=data_dir)
    app.state.manager = manager

    @app.get("/api/scenarios")
    def scenarios():
        out = []
        for name, saved in configio.list_scenarios().items():
            out.append(
                {
                    "name": name,
                    "n_subtasks": saved.config.task.n_subtasks,
                    "budget": saved.hyper.total_steps,
                    "mode": saved.mode,
                    "config_text": configio.serialize_saved(saved),
                }
            )
        return out

    def _parse_body(text):
        try:
            return configio.parse_saved(text)
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/api/configs/validate")
    def validate(body: str = Body(..., media_type="text/plain")):
        violations = configio.validate_config(body)
        return {"ok": not violations, "violations": violations}

    @app.post("/api/preview")
    def preview(body: str = Body(..., media_type="text/plain")):
        return configio.scene_preview(_parse_body(body))

    @app.get("/api/preview")
    def preview_scenario(scenario: str):
        all_scen = configio.list_scenarios()
        if scenario not in all_scen:
            raise HTTPException(status_code=404, detail=f"unknown scenario {scenario!r}")
        return configio.scene_preview(all_scen[scenario])

    @app.post("/api/runs")
    def start_run(body: str = Body(..., media_type="text/plain")):
        saved = _parse_body(body)
        try:
            handle = manager.start_run(saved)
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc).split("; "))
        return handle.to_dict()

    def _handle(run_id):
        try:
            return manager.get(run_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")

    @app.get("/api/runs/{run_id}")
    def run_status(run_id: str):
        return _handle(run_id).to_dict()

    @app.post("/api/runs/{run_id}/stop")
    def stop_run(run_id: str):
        return manager.stop(_handle(run_id).run_id).to_dict()

    @app.get("/api/runs/{run_id}/metrics/stream")
    def stream_metrics(run_id: str, from_step: int = 0):
        handle = _handle(run_id)
        sink = manager.sink(run_id)

        def generate():
            sub = None
            sid = None
            if sink is not None and not sink.closed:
                sid, sub = sink.subscribe()
            try:
                replayed = 0
                path = os.path.join(handle.run_dir, "metrics.jsonl")
                if os.path.exists(path):
                    with open(path, encoding="utf-8") as fh:
                        for line in fh:
                            line = line.strip()
                            if not line:
                                continue
                            replayed += 1
                            if json.loads(line)["step"] >= from_step:
                                yield f"data: {line}\n\n"
                while sub is not None:
                    try:
                        seq, line = sub.get(timeout=1.0)
                    except queue.Empty:
                        if sink.closed or handle.status in (COMPLETED, FAILED, STOPPED):
                            break
                        continue
                    if seq <= replayed:
                        continue  # already replayed from the file
                    if json.loads(line)["step"] >= from_step:
                        yield f"data: {line}\n\n"
                yield "event: end\ndata: {}\n\n"
            finally:
                if sid is not None:
                    sink.unsubscribe(sid)

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/api/runs/{run_id}/trajectories/{n}")
    def trajectory(run_id: str, n: int):
        handle = _handle(run_id)
        path = os.path.join(handle.run_dir, f"trajectory_{n}.jsonl")
        if not os.path.exists(path):
            raise HTTPException(status_code=404, detail=f"no trajectory {n} for run {run_id!r}")
        with open(path, encoding="utf-8") as fh:
            return PlainTextResponse(fh.read())

    @app.get("/api/runs/{run_id}/eval/latest")
    def eval_latest(run_id: str):
        handle = _handle(run_id)
        path = os.path.join(handle.run_dir, "eval_latest.json")
        if not os.path.exists(path):
            raise HTTPException(status_code=404, detail="no evaluation yet")
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    return app
