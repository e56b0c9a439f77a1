"""Quantum-jump unraveling of a :class:`~linamp.lindblad.LindbladSpec`.

For ladder-power jumps every ``L^+ L`` is diagonal in the Fock basis, so the
no-jump propagator ``exp(-t/2 sum_k rate_k L_k^+ L_k)`` is a diagonal of
exponentials and is applied exactly. Jump times come from the waiting-time
method: draw ``u ~ U(0, 1)`` and jump when the unnormalised norm squared
decays to ``u``. The crossing is bracketed and solved with Brent's method.

Trajectory ``i`` draws from ``SeedSequence(seed, spawn_key=(i,))``. Each
trajectory therefore sees the same stream whatever the worker count, and
results are reduced in index order, so runs are bit-reproducible.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, GuardExceeded, ToleranceError, TruncationError
from .fock import tail_mass_of
from .lindblad import LindbladSpec

NORM_TOL = 1e-10


@dataclass(frozen=True)
class TrajectoryConfig:
    n_traj: int
    seed: int
    t: float
    norm_threshold_sampling: bool = True
    max_jumps: int = 100_000
    dt: float = 1e-3
    tail_tol: float = 1e-6
    workers: int = 1

    def __post_init__(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise DomainError(f"n_traj must be a positive integer, got {self.n_traj}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if not (math.isfinite(self.t) and self.t >= 0):
            raise DomainError(f"t must be finite and >= 0, got {self.t}")
        if self.max_jumps < 0 or self.dt <= 0 or self.workers < 1:
            raise DomainError("max_jumps >= 0, dt > 0 and workers >= 1 are required")


@dataclass(frozen=True)
class TrajectoryStats:
    n_traj: int
    mean_n: float
    stderr_n: float | None
    mean_amp: complex
    stderr_amp: float | None
    jump_counts: dict = field(default_factory=dict)
    jump_histograms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"n_traj": self.n_traj, "mean_n": self.mean_n, "stderr_n": self.stderr_n,
                "mean_amp": [self.mean_amp.real, self.mean_amp.imag], "stderr_amp": self.stderr_amp,
                "jump_counts": dict(self.jump_counts), "jump_histograms": dict(self.jump_histograms)}


class _Unraveling:
    """Per-dimension tables shared by all trajectories of one run."""

    def __init__(self, spec: LindbladSpec, dim: int):
        self.dim = dim
        self.terms = [t for t in spec.terms if t.rate > 0]
        self.labels = [f"{t.op}({t.power})" for t in spec.terms]
        self.term_index = [spec.terms.index(t) for t in self.terms]
        self.amps = [t.coefficients(dim) for t in self.terms]
        self.rates = np.array([t.rate for t in self.terms])
        self.decay = np.zeros(dim)
        for t, a in zip(self.terms, self.amps):
            self.decay += t.rate * a * a
        self.shift = [-t.power if t.op == "lower" else t.power for t in self.terms]

    def jump(self, psi, j):
        out = np.zeros_like(psi)
        k = self.shift[j]
        src = psi * self.amps[j]
        if k < 0:
            out[:k] = src[-k:]
        else:
            out[k:] = src[: self.dim - k]
        return out

    def no_jump(self, psi, tau):
        return psi * np.exp(-0.5 * self.decay * tau)


def _waiting_time(p, gam, u, horizon):
    """First ``tau <= horizon`` with ``sum p exp(-gam tau) = u``, or None."""
    def f(tau):
        return float(p @ np.exp(-gam * tau)) - u

    if f(horizon) > 0:
        return None
    if len(p) == 1:
        return min(horizon, -math.log(u / p[0]) / gam[0])
    return brentq(f, 0.0, horizon, xtol=1e-14 * max(horizon, 1e-300), rtol=4 * np.finfo(float).eps)


def run_single(model: _Unraveling, psi0, t, rng, cfg: TrajectoryConfig, log=None):
    """Evolve one trajectory to time ``t``; returns (psi, jumps per term)."""
    psi = np.array(psi0, dtype=complex)
    counts = np.zeros(len(model.terms), dtype=int)
    clock = 0.0
    n_jumps = 0
    while clock < t:
        remaining = t - clock
        if model.terms and not cfg.norm_threshold_sampling:
            step = min(cfg.dt, remaining)
            weights = model.rates * np.array([np.sum(a * a * np.abs(psi) ** 2) for a in model.amps])
            dp = step * weights.sum()
            if dp > 0.1:
                raise ToleranceError(f"jump probability {dp:.3g} per step is too large; reduce dt")
            if rng.random() < dp:
                tau = step
            else:
                psi = model.no_jump(psi, step)
                psi /= np.linalg.norm(psi)
                clock += step
                continue
        else:
            idx = np.flatnonzero(psi)
            p = np.abs(psi[idx]) ** 2
            tau = _waiting_time(p, model.decay[idx], rng.random(), remaining) if model.terms else None
            if tau is None:
                psi = model.no_jump(psi, remaining)
                psi /= np.linalg.norm(psi)
                break
        psi = model.no_jump(psi, tau)
        clock += tau
        prob = np.abs(psi) ** 2
        weights = model.rates * np.array([np.dot(a * a, prob) for a in model.amps])
        j = int(np.searchsorted(np.cumsum(weights), rng.random() * weights.sum(), side="right"))
        j = min(j, len(weights) - 1)
        psi = model.jump(psi, j)
        psi /= np.linalg.norm(psi)
        counts[j] += 1
        n_jumps += 1
        if log is not None:
            log.append({"t": clock, "term": model.labels[model.term_index[j]]})
        if n_jumps > cfg.max_jumps:
            raise GuardExceeded(f"trajectory made more than {cfg.max_jumps} jumps before t={t}")
        tail = tail_mass_of(np.abs(psi) ** 2)
        if tail >= cfg.tail_tol:
            raise TruncationError(f"a jump pushed {tail:.3e} of the trajectory into the top levels "
                                  f"of dim={model.dim}", tail_mass=tail, dim=model.dim)
    return psi, counts


def _observables(psi):
    prob = np.abs(psi) ** 2
    n = np.arange(len(psi))
    amp = np.sum(np.sqrt(n[1:]) * psi[:-1].conj() * psi[1:])
    return float(n @ prob), complex(amp)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index``, derived from the run seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _run_chunk(args):
    spec, psi0, cfg, indices, want_log = args
    model = _Unraveling(spec, len(psi0))
    out = []
    for i in indices:
        log = [] if want_log else None
        psi, counts = run_single(model, psi0, cfg.t, trajectory_rng(cfg.seed, i), cfg, log)
        n, amp = _observables(psi)
        out.append((n, amp, counts, [{"traj": int(i), **e} for e in log] if want_log else None))
    return out


def run_trajectories(spec: LindbladSpec, psi0, cfg: TrajectoryConfig, jump_log: list | None = None) -> TrajectoryStats:
    """Ensemble statistics at ``cfg.t``.

    When ``jump_log`` is a list, one ``{"traj", "t", "term"}`` entry per jump
    is appended to it in trajectory order.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.ndim != 1 or len(psi0) < 2:
        raise DomainError("psi0 must be a state vector with at least two levels")
    if abs(np.linalg.norm(psi0) - 1) > NORM_TOL:
        raise DomainError(f"psi0 is not normalised (norm {np.linalg.norm(psi0):.15g})")
    order = np.arange(cfg.n_traj)
    want_log = jump_log is not None
    if cfg.workers == 1:
        results = _run_chunk((spec, psi0, cfg, order, want_log))
    else:
        chunks = np.array_split(order, cfg.workers)
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, [(spec, psi0, cfg, c, want_log) for c in chunks]))
        results = [r for part in parts for r in part]
    if want_log:
        for r in results:
            jump_log.extend(r[3])

    ns = np.array([r[0] for r in results])
    amps = np.array([r[1] for r in results])
    counts = np.array([r[2] for r in results]).reshape(cfg.n_traj, -1)
    N = cfg.n_traj
    stderr_n = float(ns.std(ddof=1) / math.sqrt(N)) if N > 1 else None
    stderr_amp = float(math.sqrt(np.sum(np.abs(amps - amps.mean()) ** 2) / (N - 1) / N)) if N > 1 else None

    model = _Unraveling(spec, len(psi0))
    totals = {label: 0 for label in model.labels}
    hists = {label: [] for label in model.labels}
    for col, ti in enumerate(model.term_index):
        label = model.labels[ti]
        totals[label] += int(counts[:, col].sum())
        hists[label] = np.bincount(counts[:, col]).tolist()
    return TrajectoryStats(N, float(ns.mean()), stderr_n, complex(amps.mean()), stderr_amp, totals, hists)
