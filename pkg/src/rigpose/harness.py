"""Monte Carlo experiment driver and the comparative error report.

Each run draws one scene and one trajectory, renders the union of both
rigs' cameras once (shared cameras render once, so every method sees the
same pixels), and executes all requested estimators:

    4cameras  - both stereo pairs feeding one pose EKF
    2cameras  - the front stereo pair alone
    cam1..4   - each non-overlapping camera on its own
    RC        - the rigidity-constrained fusion of the four

The report holds the per-method mean absolute error of the six pose
parameters averaged over frames and runs. Runs that abort (too few
features, non-finite filter state, low visibility) invalidate only
themselves and are listed in the metadata. Aggregation is a reduction in
run-index order over per-run results, so any worker count produces a
byte-identical CSV.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .ekf import FilterTuning
from .errors import InputError, RigPoseError
from .geometry import (
    CameraRig,
    default_nonoverlap_rig,
    default_overlap_rig,
    rig_from_dict,
    rig_to_dict,
)
from .pipeline import (
    PipelineConfig,
    pose_error_report,
    run_nonoverlap_sequence,
    run_stereo_sequence,
)
from .simulate import (
    SimConfig,
    build_union,
    gen_scene,
    gen_trajectory,
    render_sequence,
    run_seed_sequences,
    run_streams,
    slice_stream,
    visible_counts,
)

ALL_METHODS = ["4cameras", "2cameras", "cam1", "cam2", "cam3", "cam4", "RC"]
PARAM_NAMES = ["tx", "ty", "tz", "alpha", "beta", "gamma"]


@dataclass
class ExperimentSetup:
    """Everything one Monte Carlo run needs (picklable for worker pools)."""

    sim: SimConfig
    rig_overlap: CameraRig
    rig_nonoverlap: CameraRig
    tuning: FilterTuning = field(default_factory=FilterTuning)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    methods: tuple = tuple(ALL_METHODS)
    min_visible: int = 100
    ideal_init: bool = False


@dataclass
class ExperimentReport:
    """Per-method mean absolute pose errors plus run metadata."""

    methods: list[str]
    rows: dict[str, np.ndarray]
    metadata: dict

    def to_csv_text(self) -> str:
        lines = ["method," + ",".join(PARAM_NAMES)]
        for method in self.methods:
            row = self.rows[method]
            lines.append(method + "," + ",".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())

    def write_json(self, path) -> None:
        payload = {
            "rows": {m: [float(x) for x in self.rows[m]] for m in self.methods},
            "columns": PARAM_NAMES,
            "metadata": self.metadata,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def parse_report_csv(path) -> dict[str, np.ndarray]:
    rows: dict[str, np.ndarray] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "method," + ",".join(PARAM_NAMES):
            raise InputError(f"{path}: line 1: unexpected report header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise InputError(f"{path}: line {lineno}: expected 7 fields")
            rows[parts[0]] = np.array([float(x) for x in parts[1:]])
    return rows


def _run_one(args):
    """Execute every requested method for one run; returns
    (run_index, rows dict | None, error message | None)."""
    index, seed_seq, setup = args
    sim = setup.sim
    try:
        scene_rng, traj_rng, noise_ss = run_streams(seed_seq)
        scene = gen_scene(sim, scene_rng)
        traj = gen_trajectory(sim, traj_rng)

        rig_front = CameraRig(setup.rig_overlap.cameras[:2], layout="overlapping")
        union, (map_non, map_over) = build_union(
            [setup.rig_nonoverlap, setup.rig_overlap]
        )
        frames = render_sequence(scene, traj, union, sim.noise_sigma, noise_ss)
        counts = visible_counts(frames, frame=0)
        if min(counts) < setup.min_visible:
            return index, None, f"visibility {min(counts)} < {setup.min_visible} at frame 0"

        rows: dict[str, np.ndarray] = {}
        methods = set(setup.methods)
        common = dict(tuning=setup.tuning, pcfg=setup.pipeline,
                      truth=traj, ideal_init=setup.ideal_init)
        if "4cameras" in methods:
            series = run_stereo_sequence(
                slice_stream(frames, map_over), setup.rig_overlap, **common
            )
            rows["4cameras"] = pose_error_report(series, traj)
        if "2cameras" in methods:
            series = run_stereo_sequence(
                slice_stream(frames, map_over[:2]), rig_front, **common
            )
            rows["2cameras"] = pose_error_report(series, traj)
        if methods & {"cam1", "cam2", "cam3", "cam4", "RC"}:
            non = run_nonoverlap_sequence(
                slice_stream(frames, map_non), setup.rig_nonoverlap,
                scene=scene, **common,
            )
            for name, series in non.items():
                if name in methods:
                    rows[name] = pose_error_report(series, traj)
        return index, rows, None
    except RigPoseError as exc:
        return index, None, f"{type(exc).__name__}: {exc}"


def monte_carlo(
    sim: SimConfig,
    rig_overlap: CameraRig | None = None,
    rig_nonoverlap: CameraRig | None = None,
    tuning: FilterTuning | None = None,
    pipeline_cfg: PipelineConfig | None = None,
    methods=None,
    workers: int = 1,
    min_visible: int = 100,
    ideal_init: bool = False,
) -> ExperimentReport:
    """Run the comparative study and average the error rows over runs.

    Deterministic for a given seed at any worker count: every run derives
    its own random streams from the master seed and the reduction happens
    in run-index order.
    """
    setup = ExperimentSetup(
        sim=sim,
        rig_overlap=rig_overlap or default_overlap_rig(),
        rig_nonoverlap=rig_nonoverlap or default_nonoverlap_rig(),
        tuning=tuning or FilterTuning(),
        pipeline=pipeline_cfg or PipelineConfig(),
        methods=tuple(methods) if methods else tuple(ALL_METHODS),
        min_visible=min_visible,
        ideal_init=ideal_init,
    )
    for m in setup.methods:
        if m not in ALL_METHODS:
            raise InputError(f"unknown method {m!r}; choose from {ALL_METHODS}")

    started = time.monotonic()
    seeds = run_seed_sequences(sim.seed, sim.n_runs)
    tasks = [(i, seeds[i], setup) for i in range(sim.n_runs)]
    if workers <= 1:
        outcomes = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, tasks))
    outcomes.sort(key=lambda out: out[0])

    sums = {m: np.zeros(6) for m in setup.methods}
    n_ok = 0
    failures = []
    for index, rows, err in outcomes:
        if rows is None:
            failures.append({"run": index, "reason": err})
            continue
        for m in setup.methods:
            sums[m] += rows[m]
        n_ok += 1
    if n_ok == 0:
        raise RigPoseError(f"all {sim.n_runs} runs failed; first: {failures[0]['reason']}")

    rows = {m: sums[m] / n_ok for m in setup.methods}
    metadata = {
        "config_hash": setup_hash(setup),
        "seed": sim.seed,
        "runs": sim.n_runs,
        "valid_runs": n_ok,
        "frames": sim.n_frames,
        "n_points": sim.n_points,
        "noise_sigma": sim.noise_sigma,
        "failed_runs": failures,
        "workers": workers,
        "wall_time_s": round(time.monotonic() - started, 3),
    }
    return ExperimentReport(methods=list(setup.methods), rows=rows, metadata=metadata)


def setup_hash(setup: ExperimentSetup) -> str:
    payload = {
        "sim": asdict(setup.sim),
        "rig_overlap": rig_to_dict(setup.rig_overlap),
        "rig_nonoverlap": rig_to_dict(setup.rig_nonoverlap),
        "tuning": asdict(setup.tuning),
        "pipeline": asdict(setup.pipeline),
        "methods": list(setup.methods),
        "min_visible": setup.min_visible,
        "ideal_init": setup.ideal_init,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Harness config file
# ---------------------------------------------------------------------------

def _build(cls, block: dict, what: str):
    try:
        return cls(**block)
    except TypeError as exc:
        raise InputError(f"config block {what!r}: {exc}") from exc


def load_config(path) -> dict:
    """Load the JSON harness config.

    Blocks (all optional): "sim", "rigs" {"overlapping", "non-overlapping"},
    "tuning", "pipeline", "min_visible". Returns a dict of constructed
    objects with defaults filled in.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be a JSON object")
    known = {"sim", "rigs", "tuning", "pipeline", "min_visible"}
    unknown = set(data) - known
    if unknown:
        raise InputError(f"{path}: unknown config blocks {sorted(unknown)}")

    rigs = data.get("rigs", {})
    overlap = (
        rig_from_dict(rigs["overlapping"])
        if "overlapping" in rigs
        else default_overlap_rig()
    )
    nonoverlap = (
        rig_from_dict(rigs["non-overlapping"])
        if "non-overlapping" in rigs
        else default_nonoverlap_rig()
    )
    return {
        "sim": _build(SimConfig, data.get("sim", {}), "sim"),
        "rig_overlap": overlap,
        "rig_nonoverlap": nonoverlap,
        "tuning": _build(FilterTuning, data.get("tuning", {}), "tuning"),
        "pipeline": _build(PipelineConfig, data.get("pipeline", {}), "pipeline"),
        "min_visible": int(data.get("min_visible", 100)),
    }
