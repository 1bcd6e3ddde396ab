"""Reproducible, parallel execution of many realizations and their
aggregation into ensemble means with standard errors.

Every realization draws from three streams keyed by (master seed, index,
tag), so results do not depend on scheduling or worker count; aggregation
always runs in index order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .dynamics import TrajectoryRecord, choose_dt, evolve, sample_se_schedule
from .errors import EnsembleFailedError, IntegrationDivergedError, InvalidParameterError
from .model import SimulationConfig, initial_state, sample_disorder

log = logging.getLogger(__name__)

WORKERS_ENV = "DANSE_THREADS"
STREAM_TAGS = {"disorder": 0, "phases": 1, "se": 2}
MAX_FAILED_FRACTION = 0.1

Streams = namedtuple("Streams", ["disorder", "phases", "se"])


@dataclass(frozen=True)
class EnsembleSpec:
    """``freeze`` names streams ("disorder", "phases", "se") that are shared
    by all realizations (drawn from index 0) instead of resampled."""

    config: SimulationConfig
    n_realizations: int = 50
    master_seed: int | None = None
    freeze: tuple = ()

    def __post_init__(self):
        if int(self.n_realizations) != self.n_realizations or self.n_realizations < 1:
            raise InvalidParameterError("n_realizations must be a positive integer")
        bad = set(self.freeze) - set(STREAM_TAGS)
        if bad:
            raise InvalidParameterError(f"unknown stream(s) to freeze: {sorted(bad)}")
        object.__setattr__(self, "freeze", tuple(sorted(set(self.freeze))))
        if self.master_seed is None:
            object.__setattr__(self, "master_seed", int(self.config.seed))
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidParameterError("master_seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {"config": config_to_dict(self.config), "n_realizations": int(self.n_realizations),
                "master_seed": int(self.master_seed), "freeze": list(self.freeze)}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class EnsembleResult:
    sample_times: np.ndarray
    p_mean: np.ndarray
    p_sem: np.ndarray
    x2_mean: np.ndarray
    x2_sem: np.ndarray
    density_mean: dict
    p_final: np.ndarray
    n_failed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_ok(self) -> int:
        return int(self.p_final.size)


def config_to_dict(config: SimulationConfig) -> dict:
    absorber = None
    if config.absorber is not None:
        absorber = {"n_abs": int(config.absorber.n_abs),
                    "amplitude": float(config.absorber.amplitude),
                    "shape": config.absorber.shape}
    return {
        "L": int(config.L), "L0": int(config.L0), "W": float(config.W), "g": float(config.g),
        "gamma": float(config.gamma), "t_max": float(config.t_max), "dt_max": float(config.dt_max),
        "integrator": config.integrator, "absorber": absorber, "seed": int(config.seed),
        "snapshot_times": [float(t) for t in config.snapshot_times],
        "samples_per_decade": int(config.samples_per_decade), "t_min": float(config.t_min),
    }


def realization_streams(master_seed: int, index: int) -> Streams:
    """Independent generators for disorder, initial phases and SE events."""
    def make(tag):
        seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index), tag))
        return np.random.Generator(np.random.PCG64(seq))
    return Streams(*(make(STREAM_TAGS[name]) for name in Streams._fields))


def run_realization(config: SimulationConfig, master_seed: int, index: int,
                    freeze=()) -> TrajectoryRecord:
    def stream(name):
        return realization_streams(master_seed, 0 if name in freeze else index)._asdict()[name]
    disorder = sample_disorder(config.W, config.L, stream("disorder"))
    state0 = initial_state(config.L0, config.L, stream("phases"))
    schedule = sample_se_schedule(config.gamma, config.t_max, stream("se"))
    return evolve(config, disorder, state0, schedule)


def _task(args):
    config, master_seed, index, freeze = args
    try:
        return index, run_realization(config, master_seed, index, freeze), None
    except IntegrationDivergedError as exc:
        return index, None, exc.time


def resolve_workers(workers=None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    workers = int(workers)
    if workers < 1:
        raise InvalidParameterError("worker count must be >= 1")
    return workers


class _Checkpoint:
    """Completed realizations stored in one .npz, rewritten atomically."""

    def __init__(self, path, spec: EnsembleSpec, every: int = 10):
        self.path = Path(path)
        self.digest = spec.digest()
        self.every = every
        self.pending = 0

    def load(self) -> dict:
        if not self.path.exists():
            return {}
        with np.load(self.path, allow_pickle=False) as z:
            if str(z["digest"]) != self.digest:
                raise InvalidParameterError(f"checkpoint {self.path} belongs to a different spec")
            snap_times = list(z["snap_times"])
            done = {}
            for k, idx in enumerate(z["indices"]):
                if z["failed"][k]:
                    done[int(idx)] = None
                    continue
                snaps = {float(t): z["snapshots"][k, j] for j, t in enumerate(snap_times)}
                done[int(idx)] = TrajectoryRecord(z["times"], z["survival"][k], z["x2"][k],
                                                  snaps, int(z["events"][k]))
        log.info("resuming %d realizations from %s", len(done), self.path)
        return done

    def save(self, done: dict, force: bool = False):
        self.pending += 1
        if not force and self.pending < self.every:
            return
        self.pending = 0
        ok = [r for r in done.values() if r is not None]
        if not ok:
            return
        proto = ok[0]
        snap_times = sorted(proto.snapshots)
        idx = sorted(done)
        T, L = proto.sample_times.size, (next(iter(proto.snapshots.values())).size if snap_times else 0)
        surv = np.zeros((len(idx), T))
        x2 = np.zeros((len(idx), T))
        snaps = np.zeros((len(idx), len(snap_times), L))
        events = np.zeros(len(idx), dtype=np.int64)
        failed = np.zeros(len(idx), dtype=bool)
        for k, i in enumerate(idx):
            rec = done[i]
            if rec is None:
                failed[k] = True
                continue
            surv[k], x2[k], events[k] = rec.survival, rec.second_moment, rec.se_event_count
            for j, t in enumerate(snap_times):
                snaps[k, j] = rec.snapshots[t]
        tmp = self.path.with_name(self.path.name + ".tmp.npz")
        np.savez(tmp, digest=self.digest, indices=np.array(idx), times=proto.sample_times,
                 survival=surv, x2=x2, snapshots=snaps, snap_times=np.array(snap_times),
                 events=events, failed=failed)
        os.replace(tmp, self.path)


def _nan_mean_sem(X):
    finite = np.isfinite(X)
    count = finite.sum(axis=0)
    Z = np.where(finite, X, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = Z.sum(axis=0) / count
        dev = np.where(finite, X - mean, 0.0)
        var = (dev**2).sum(axis=0) / (count - 1)
        sem = np.where(count > 1, np.sqrt(var / count), 0.0)
    return mean, sem


def aggregate(spec: EnsembleSpec, records: list) -> EnsembleResult:
    """Ordered reduction of per-realization records (None marks a failure)."""
    n = len(records)
    failed = [i for i, r in enumerate(records) if r is None]
    if len(failed) > MAX_FAILED_FRACTION * n or len(failed) == n:
        raise EnsembleFailedError(len(failed), n)
    ok = [r for r in records if r is not None]
    P = np.stack([r.survival for r in ok])
    X = np.stack([r.second_moment for r in ok])
    m = len(ok)
    p_mean = P.mean(axis=0)
    p_sem = P.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.zeros_like(p_mean)
    x2_mean, x2_sem = _nan_mean_sem(X)
    density = {t: np.mean([r.snapshots[t] for r in ok], axis=0) for t in sorted(ok[0].snapshots)}
    config = spec.config
    meta = {
        "spec": spec.to_dict(),
        "n_failed": len(failed),
        "failed_indices": failed,
        "code_version": __version__,
        "backend": kernels.BACKEND,
        "mean_se_events": float(np.mean([r.se_event_count for r in ok])),
        "profile_note": "density profiles are ensemble averages of |c_n|^2 (averaged before any fit)",
    }
    if config is not None:
        meta["integrator"] = config.integrator
    return EnsembleResult(ok[0].sample_times.copy(), p_mean, p_sem, x2_mean, x2_sem, density,
                          P[:, -1].copy(), len(failed), meta)


def run_ensemble(spec: EnsembleSpec, workers=None, checkpoint=None, progress=None) -> EnsembleResult:
    """Run all realizations of ``spec`` and aggregate them.

    ``workers`` defaults to $DANSE_THREADS or the CPU count. ``checkpoint`` is
    an optional .npz path used to resume interrupted runs. ``progress`` is
    called as progress(done, total).
    """
    n = int(spec.n_realizations)
    workers = min(resolve_workers(workers), n)
    ckpt = _Checkpoint(checkpoint, spec) if checkpoint else None
    done = ckpt.load() if ckpt else {}
    todo = [i for i in range(n) if i not in done]
    args = [(spec.config, int(spec.master_seed), i, spec.freeze) for i in todo]
    failures = {}

    def record(index, rec, fail_time):
        done[index] = rec
        if rec is None:
            failures[index] = fail_time
            log.warning("realization %d diverged at t=%g", index, fail_time)
        if ckpt:
            ckpt.save(done)
        if progress:
            progress(len(done), n)

    if workers == 1:
        for a in args:
            record(*_task(a))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_task, a) for a in args]
            for fut in as_completed(futures):
                record(*fut.result())
    if ckpt and todo:
        ckpt.save(done, force=True)
    result = aggregate(spec, [done[i] for i in range(n)])
    state_dt = choose_dt(spec.config, initial_state(spec.config.L0, spec.config.L,
                                                    np.random.default_rng(0)))
    result.meta["dt"] = state_dt
    if failures:
        result.meta["failure_times"] = {str(k): v for k, v in sorted(failures.items())}
    return result
