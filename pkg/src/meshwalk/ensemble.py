"""Disorder-ensemble execution: levels x realizations, deterministic and parallel.

A sweep evaluates a grid of disorder levels; each level propagates N
independently-seeded realizations and reduces them to a per-mode ensemble
mean and standard error.  Every realization's stream is derived from
``(master_seed, level_index, realization_index)``, each level is reduced in
fixed realization order with exact compensated summation, and records are
assembled sorted by ``(level_index, read_layer)`` — so the result is
bit-identical no matter how many workers ran it.

Persistence is one JSON document per sweep (plan echo, generator identity,
one record per level and read layer) plus an optional flat CSV table.  A
running sweep checkpoints each record to ``<out>.ckpt`` and can resume by
skipping completed records after validating the plan hash.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lattice import MeshSpec, cell_unitary, wrap_angle
from .programs import (
    GENERATOR_IDENTITY,
    DisorderSpec,
    MeshProgram,
    SeedProvenance,
    SymmetryPolicy,
    mode_signs,
    realization_rng,
)

DOCUMENT_FORMAT = "meshwalk-sweep-result/1"
CSV_HEADER = "c_tid,c_td,layer,mode,mean,std_error"

# Realizations are processed in fixed-size chunks: bounded memory, and a
# constant independent of worker count so reductions never reorder.
_CHUNK = 8192


def make_grid(n_tid: int, n_td: int) -> list[DisorderSpec]:
    """Row-major lattice of disorder levels over [0, 1] x [0, 1]."""
    tids = np.linspace(0.0, 1.0, n_tid) if n_tid > 1 else np.array([0.0])
    tds = np.linspace(0.0, 1.0, n_td) if n_td > 1 else np.array([0.0])
    return [DisorderSpec(float(a), float(b)) for a in tids for b in tds]


@dataclass(frozen=True)
class SweepPlan:
    spec: MeshSpec
    grid: tuple[DisorderSpec, ...]
    realizations_per_level: int
    master_seed: int
    read_layers: tuple[int, ...] = ()
    policy: SymmetryPolicy = SymmetryPolicy.MIRRORED_SIGN

    def __post_init__(self):
        if self.realizations_per_level < 1:
            raise ValueError("realizations_per_level must be >= 1")
        if not self.grid:
            raise ValueError("grid must be non-empty")
        object.__setattr__(self, "grid", tuple(self.grid))
        layers = tuple(self.read_layers) or (self.spec.depth,)
        for t in layers:
            if not 1 <= t <= self.spec.depth:
                raise ValueError(f"read layer {t} outside [1, {self.spec.depth}]")
        object.__setattr__(self, "read_layers", layers)

    def to_dict(self) -> dict:
        return {
            "num_modes": self.spec.num_modes,
            "depth": self.spec.depth,
            "injection_mode": self.spec.injection_mode,
            "grid": [[lvl.c_tid, lvl.c_td] for lvl in self.grid],
            "realizations_per_level": self.realizations_per_level,
            "master_seed": self.master_seed,
            "read_layers": list(self.read_layers),
            "policy": self.policy.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepPlan":
        return cls(
            spec=MeshSpec(data["num_modes"], data["depth"], data["injection_mode"]),
            grid=tuple(DisorderSpec(a, b) for a, b in data["grid"]),
            realizations_per_level=data["realizations_per_level"],
            master_seed=data["master_seed"],
            read_layers=tuple(data["read_layers"]),
            policy=SymmetryPolicy(data["policy"]),
        )

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class LevelRecord:
    level_index: int
    read_layer: int
    level: DisorderSpec
    mean: np.ndarray
    std_error: np.ndarray
    n: int

    def to_dict(self) -> dict:
        return {
            "level_index": self.level_index,
            "read_layer": self.read_layer,
            "c_tid": self.level.c_tid,
            "c_td": self.level.c_td,
            "n": self.n,
            "mean": self.mean.tolist(),
            "std_error": self.std_error.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LevelRecord":
        return cls(
            level_index=data["level_index"],
            read_layer=data["read_layer"],
            level=DisorderSpec(data["c_tid"], data["c_td"]),
            mean=np.asarray(data["mean"], dtype=float),
            std_error=np.asarray(data["std_error"], dtype=float),
            n=data["n"],
        )


@dataclass
class EnsembleResult:
    plan: SweepPlan
    records: dict[tuple[int, int], LevelRecord]
    metadata: dict = field(default_factory=dict)
    io_errors: list[str] = field(default_factory=list)

    def record(self, level_index: int, read_layer: int | None = None) -> LevelRecord:
        layer = read_layer if read_layer is not None else self.plan.spec.depth
        return self.records[(level_index, layer)]

    def to_document(self) -> dict:
        # Deliberately no timestamps: rerunning a plan must reproduce the
        # document byte for byte.
        return {
            "format": DOCUMENT_FORMAT,
            "plan": self.plan.to_dict(),
            "plan_hash": self.plan.hash(),
            "generator": GENERATOR_IDENTITY,
            "records": [self.records[key].to_dict() for key in sorted(self.records)],
        }

    def save(self, path: str) -> None:
        with open(path, "w", newline="\n") as fh:
            json.dump(self.to_document(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "EnsembleResult":
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != DOCUMENT_FORMAT:
            raise ValueError(f"{path}: not a {DOCUMENT_FORMAT} document")
        plan = SweepPlan.from_dict(doc["plan"])
        records = {}
        for rec in doc["records"]:
            record = LevelRecord.from_dict(rec)
            records[(record.level_index, record.read_layer)] = record
        return cls(plan, records, metadata={"plan_hash": doc["plan_hash"],
                                            "generator": doc["generator"]})

    def to_rows(self) -> list[tuple[float, float, int, int, float, float]]:
        """Flat (c_tid, c_td, layer, mode, mean, std_error) rows, one per mode."""
        rows = []
        for key in sorted(self.records):
            rec = self.records[key]
            for mode in range(1, self.plan.spec.num_modes + 1):
                rows.append(
                    (rec.level.c_tid, rec.level.c_td, rec.read_layer, mode,
                     float(rec.mean[mode - 1]), float(rec.std_error[mode - 1]))
                )
        return rows

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for c_tid, c_td, layer, mode, mean, se in self.to_rows():
                fh.write(f"{c_tid!r},{c_td!r},{layer},{mode},{mean!r},{se!r}\n")


def _layer_matrices(spec: MeshSpec, program: MeshProgram) -> list[np.ndarray]:
    mats = []
    for t in range(1, spec.depth + 1):
        mats.append(np.stack([cell_unitary(program.cell_settings[c])
                              for c in spec.layer_cells(t)]))
    return mats


def _sample_block(num_modes: int, depth: int, master_seed: int, level_index: int,
                  lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Raw uniform(-pi, pi) fields for realizations lo..hi-1, unscaled.

    Each realization consumes num_modes static draws then num_modes*depth
    dynamic draws from its own derived stream; a single uniform call
    produces the identical values.
    """
    count = hi - lo
    static = np.empty((count, num_modes))
    dynamic = np.empty((count, num_modes, depth))
    size = num_modes * (depth + 1)
    for r in range(lo, hi):
        rng = realization_rng(SeedProvenance(master_seed, level_index, r))
        buf = rng.uniform(-np.pi, np.pi, size)
        static[r - lo] = buf[:num_modes]
        dynamic[r - lo] = buf[num_modes:].reshape(num_modes, depth)
    return static, dynamic


def _propagate_block(spec: MeshSpec, mats: list[np.ndarray], screens: np.ndarray,
                     read_layers: tuple[int, ...]) -> dict[int, np.ndarray]:
    """Vectorized propagation of one block of realizations.

    ``screens`` carries the total (program + disorder) phase per
    (realization, mode, layer).  A mode-major state layout keeps each cell's
    2x2 update contiguous across realizations.  Returns per-realization
    intensity stacks for every requested read layer.
    """
    m = spec.num_modes
    count = screens.shape[0]
    last = max(read_layers)
    phases = np.ascontiguousarray(screens.transpose(2, 1, 0))  # (depth, m, count)
    factors = np.empty_like(phases, dtype=complex)
    np.cos(phases, out=factors.real)
    np.sin(phases, out=factors.imag)

    stacks = {t: None for t in read_layers}
    state = np.zeros((m, count), dtype=complex)
    state[spec.injection_mode - 1] = 1.0
    for t in range(1, last + 1):
        start = m // 2 - t  # 0-based top mode of the layer's first cell
        cells = mats[t - 1]
        for k in range(t):
            i = start + 2 * k
            u = cells[k]
            top = u[0, 0] * state[i] + u[0, 1] * state[i + 1]
            state[i + 1] = u[1, 0] * state[i] + u[1, 1] * state[i + 1]
            state[i] = top
        state *= factors[t - 1]
        if t in stacks:
            stacks[t] = (state.real**2 + state.imag**2).T
    return stacks


def _level_intensity_stacks(spec: MeshSpec, program: MeshProgram, level: DisorderSpec,
                            n: int, master_seed: int, level_index: int,
                            read_layers: tuple[int, ...],
                            policy: SymmetryPolicy) -> dict[int, np.ndarray]:
    """Per-realization intensities of one level, in realization order.

    Returns, for each requested read layer, an (n, num_modes) float array.
    Realizations are processed in fixed-size chunks regardless of worker
    count, so the stacking order never varies.
    """
    m, depth = spec.num_modes, spec.depth
    if not program.covers(spec):
        raise ValueError("program does not cover the mesh spec")
    mats = _layer_matrices(spec, program)
    signs = mode_signs(m, policy)
    stacks = {t: np.empty((n, m)) for t in read_layers}

    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        static, dynamic = _sample_block(m, depth, master_seed, level_index, lo, hi)
        screens = wrap_angle(
            program.phase_screens[None, :, :]
            + signs[None, :, None] * wrap_angle(level.c_tid * static[:, :, None]
                                                + level.c_td * dynamic)
        )
        for t, stack in _propagate_block(spec, mats, screens, read_layers).items():
            stacks[t][lo:hi] = stack
    return stacks


def _reduce(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-order compensated mean and standard error over realizations."""
    n, m = stack.shape
    mean = np.array([math.fsum(stack[:, x]) / n for x in range(m)])
    if n < 2:
        return mean, np.zeros(m)
    var = np.array(
        [math.fsum((stack[:, x] - mean[x]) ** 2) / (n - 1) for x in range(m)]
    )
    return mean, np.sqrt(var / n)


def run_level(spec: MeshSpec, program: MeshProgram, level: DisorderSpec, n: int,
              master_seed: int, level_index: int = 0, read_layer: int | None = None,
              policy: SymmetryPolicy = SymmetryPolicy.MIRRORED_SIGN,
              ) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean and standard error of one disorder level."""
    if n < 1:
        raise ValueError("n must be >= 1")
    layer = read_layer if read_layer is not None else spec.depth
    stacks = _level_intensity_stacks(spec, program, level, n, master_seed,
                                     level_index, (layer,), policy)
    return _reduce(stacks[layer])


def _level_task(args) -> tuple[int, dict[int, tuple[np.ndarray, np.ndarray]]]:
    spec, program, level, level_index, n, master_seed, read_layers, policy = args
    stacks = _level_intensity_stacks(spec, program, level, n, master_seed,
                                     level_index, read_layers, policy)
    return level_index, {t: _reduce(stack) for t, stack in stacks.items()}


def _read_checkpoint(path: str, plan_hash: str) -> dict[tuple[int, int], LevelRecord]:
    records: dict[tuple[int, int], LevelRecord] = {}
    if not os.path.exists(path):
        return records
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("plan_hash") != plan_hash:
            raise ValueError(
                f"{path}: checkpoint belongs to a different plan "
                f"({header.get('plan_hash')!r} != {plan_hash!r})"
            )
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = LevelRecord.from_dict(json.loads(line))
            records[(rec.level_index, rec.read_layer)] = rec
    return records


def run_sweep(plan: SweepPlan, program: MeshProgram | None = None,
              out_path: str | None = None, workers: int | None = None,
              resume: bool = False, progress=None) -> EnsembleResult:
    """Run every (level, read_layer) of the plan and persist the result.

    ``workers`` > 1 distributes levels over processes; the reduction happens
    inside each level in fixed order, so the outcome does not depend on the
    worker count.  With ``out_path`` set, each finished record is appended to
    ``<out_path>.ckpt``; ``resume=True`` skips records already present there.
    """
    from .programs import build_symmetric_qw

    if program is None:
        program = build_symmetric_qw(plan.spec)
    plan_hash = plan.hash()
    io_errors: list[str] = []

    done: dict[tuple[int, int], LevelRecord] = {}
    ckpt_path = out_path + ".ckpt" if out_path else None
    if resume and ckpt_path:
        done = _read_checkpoint(ckpt_path, plan_hash)

    ckpt = None
    if ckpt_path:
        try:
            mode = "a" if (resume and os.path.exists(ckpt_path)) else "w"
            ckpt = open(ckpt_path, mode, newline="\n")
            if mode == "w":
                ckpt.write(json.dumps({"plan_hash": plan_hash}) + "\n")
                ckpt.flush()
        except OSError as exc:
            io_errors.append(f"checkpoint open failed: {exc}")
            ckpt = None

    pending = [
        (plan.spec, program, level, idx, plan.realizations_per_level,
         plan.master_seed, plan.read_layers, plan.policy)
        for idx, level in enumerate(plan.grid)
        if any((idx, t) not in done for t in plan.read_layers)
    ]

    records = dict(done)

    def _absorb(level_index: int, per_layer: dict) -> None:
        for t, (mean, se) in per_layer.items():
            rec = LevelRecord(level_index, t, plan.grid[level_index], mean, se,
                              plan.realizations_per_level)
            records[(level_index, t)] = rec
            if ckpt is not None:
                try:
                    ckpt.write(json.dumps(rec.to_dict()) + "\n")
                    ckpt.flush()
                except OSError as exc:
                    io_errors.append(f"level {level_index}: checkpoint write failed: {exc}")
        if progress:
            progress(len(records), len(plan.grid) * len(plan.read_layers))

    nworkers = workers if workers is not None else (os.cpu_count() or 1)
    try:
        if nworkers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=nworkers) as pool:
                for level_index, per_layer in pool.map(_level_task, pending):
                    _absorb(level_index, per_layer)
        else:
            for args in pending:
                _absorb(*_level_task(args))
    finally:
        if ckpt is not None:
            ckpt.close()

    result = EnsembleResult(
        plan,
        records,
        metadata={
            "plan_hash": plan_hash,
            "generator": GENERATOR_IDENTITY,
            "numpy_version": np.__version__,
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
            "n": plan.realizations_per_level,
        },
        io_errors=io_errors,
    )
    if out_path:
        result.save(out_path)
    return result
