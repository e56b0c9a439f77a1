"""Purely dissipative Lindblad generators built from ladder-power jump terms.

Every jump operator here is ``a^k`` or ``a^+k``. Such generators commute with
phase shifts, so they map the ``d``-th subdiagonal of ``rho`` onto itself.
The solvers exploit this: :func:`evolve_moments` and :func:`evolve_populations`
integrate only the diagonals that carry the observables, which lets the
cutoff grow to 10^5 levels when the photon distribution has a heavy tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .errors import DegenerateInput, DomainError, ToleranceError, TruncationError
from .fock import (
    DensityMatrix,
    FockSpace,
    MomentReport,
    lowering_coefficients,
    moments,
    moments_from_diagonals,
    phase_shift,
    tail_mass_of,
    trace_distance,
)

METHODS = ("auto", "adaptive_rk", "bdf", "dense_expm")
DENSE_EXPM_MAX_DIM = 64
# Above this many e-folds of the fastest decay rate an explicit stepper is
# stability-limited; switch to BDF.
RK_STIFFNESS_BUDGET = 2000.0


@dataclass(frozen=True)
class JumpTerm:
    """``rate * D[L]`` with ``L = a^power`` (lower) or ``a^+power`` (raise)."""

    rate: float
    op: str
    power: int = 1

    def __post_init__(self):
        if self.op not in ("lower", "raise"):
            raise DomainError(f"jump op must be 'lower' or 'raise', got {self.op!r}")
        if int(self.power) != self.power or self.power < 1:
            raise DomainError(f"ladder power must be an integer >= 1, got {self.power!r}")
        if not math.isfinite(self.rate) or self.rate < 0:
            raise DomainError(f"rate must be finite and >= 0, got {self.rate!r}")

    @property
    def label(self) -> str:
        return f"{self.op}({self.power})"

    def to_dict(self) -> dict:
        return {"rate": self.rate, "op": self.op, "power": self.power}

    def coefficients(self, dim: int) -> np.ndarray:
        """``amp[n]``: amplitude of ``L|n>``, which lands on ``n -/+ power``."""
        c = lowering_coefficients(dim, self.power)
        if self.op == "lower":
            return c
        up = np.zeros(dim)
        up[: dim - self.power] = c[self.power:]
        return up

    def decay(self, dim: int) -> np.ndarray:
        """Diagonal of ``L^+ L`` in the truncated space."""
        return self.coefficients(dim) ** 2

    def matrix(self, dim: int) -> np.ndarray:
        amp = self.coefficients(dim)
        k = self.power
        if self.op == "lower":
            return np.diag(amp[k:], k=k).astype(complex)
        return np.diag(amp[: dim - k], k=-k).astype(complex)


@dataclass(frozen=True)
class LindbladSpec:
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise DomainError("a LindbladSpec needs at least one jump term")
        for t in terms:
            if not isinstance(t, JumpTerm):
                raise DomainError(f"not a JumpTerm: {t!r}")
        object.__setattr__(self, "terms", terms)

    def to_json(self) -> list:
        return [t.to_dict() for t in self.terms]

    @classmethod
    def from_json(cls, doc: list) -> "LindbladSpec":
        return cls(tuple(JumpTerm(float(d["rate"]), d["op"], int(d.get("power", 1))) for d in doc))

    def max_decay_rate(self, dim: int) -> float:
        total = np.zeros(dim)
        for term in self.terms:
            total += term.rate * term.decay(dim)
        return float(total.max())


@dataclass(frozen=True)
class EvolveConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = np.inf
    method: str = "auto"
    tail_tol: float = 1e-6

    def __post_init__(self):
        if not 0 < self.rel_tol < 1:
            raise DomainError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.abs_tol <= 0:
            raise DomainError("abs_tol must be positive")
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {self.method!r}")


def rhs(spec: LindbladSpec, rho) -> np.ndarray:
    """``d rho/dt`` applied term by term; no superoperator is formed.

    ``a^k rho a^+k`` and its raising twin are index shifts scaled by the
    outer product of the jump amplitudes.
    """
    e = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    dim = e.shape[0]
    out = np.zeros_like(e, dtype=complex)
    for term in spec.terms:
        if term.rate == 0:
            continue
        k = term.power
        amp = term.coefficients(dim)
        dec = amp ** 2
        if k < dim:
            if term.op == "lower":
                out[: dim - k, : dim - k] += term.rate * np.outer(amp[k:], amp[k:]) * e[k:, k:]
            else:
                a = amp[: dim - k]
                out[k:, k:] += term.rate * np.outer(a, a) * e[: dim - k, : dim - k]
        out -= 0.5 * term.rate * (dec[:, None] * e + e * dec[None, :])
    return out


def superoperator(spec: LindbladSpec, dim: int) -> np.ndarray:
    """Dense generator acting on row-major ``vec(rho)``; oracle use only."""
    eye = np.eye(dim)
    sup = np.zeros((dim * dim, dim * dim), dtype=complex)
    for term in spec.terms:
        L = term.matrix(dim)
        LdL = L.conj().T @ L
        sup += term.rate * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    return sup


def offset_generator(spec: LindbladSpec, dim: int, offset: int) -> sp.csr_matrix:
    """Real generator for ``v[i] = rho[i+offset, i]``, ``i < dim - offset``."""
    m = dim - offset
    i = np.arange(m)
    rows, cols, vals = [], [], []
    diag = np.zeros(m)
    for term in spec.terms:
        if term.rate == 0:
            continue
        k = term.power
        amp = term.coefficients(dim)
        dec = amp ** 2
        diag -= 0.5 * term.rate * (dec[i + offset] + dec[i])
        if term.op == "lower":
            src = i[i + k < m]
            w = amp[src + offset + k] * amp[src + k]
            rows.append(src)
            cols.append(src + k)
        else:
            src = i[i >= k]
            w = amp[src + offset - k] * amp[src - k]
            rows.append(src)
            cols.append(src - k)
        vals.append(term.rate * w)
    rows.append(i)
    cols.append(i)
    vals.append(diag)
    g = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    return g.tocsr()


def _integrate_offsets(spec, dim, blocks: dict, times: Sequence[float], cfg: EvolveConfig,
                       method: str) -> list[dict]:
    """Evolve the given subdiagonals; returns one ``{offset: vector}`` per time."""
    offsets = sorted(blocks)
    gens = [offset_generator(spec, dim, d) for d in offsets]
    sizes = [g.shape[0] for g in gens]
    splits = np.cumsum(sizes)[:-1]
    y0c = np.concatenate([np.asarray(blocks[d], dtype=complex) for d in offsets])
    complex_data = bool(np.any(y0c.imag != 0))
    G = sp.block_diag(gens, format="csr")
    if complex_data:
        G = sp.block_diag([G, G], format="csr")
        y0 = np.concatenate([y0c.real, y0c.imag])
    else:
        y0 = y0c.real.copy()

    times = [float(t) for t in times]
    results = []
    pending = [(idx, t) for idx, t in enumerate(times)]
    out = [None] * len(times)
    nonzero = [(idx, t) for idx, t in pending if t > 0]
    for idx, t in pending:
        if t == 0:
            out[idx] = y0.copy()
    if nonzero:
        t_eval = sorted({t for _, t in nonzero})
        if method == "dense_expm":
            Gd = G.toarray()
            for t in t_eval:
                y = sla.expm(Gd * t) @ y0
                for idx, tt in nonzero:
                    if tt == t:
                        out[idx] = y
        else:
            solver = "BDF" if method == "bdf" else "DOP853"
            kwargs = {"jac": G} if solver == "BDF" else {}
            sol = solve_ivp(lambda _t, y: G @ y, (0.0, t_eval[-1]), y0, method=solver,
                            t_eval=t_eval, rtol=cfg.rel_tol, atol=cfg.abs_tol,
                            max_step=cfg.max_step, **kwargs)
            if sol.status != 0:
                raise ToleranceError(f"{solver} step control failed: {sol.message}")
            for j, t in enumerate(sol.t):
                for idx, tt in nonzero:
                    if tt == t:
                        out[idx] = sol.y[:, j]
    for y in out:
        if complex_data:
            half = len(y) // 2
            y = y[:half] + 1j * y[half:]
        parts = np.split(y, splits)
        results.append(dict(zip(offsets, parts)))
    return results


def _resolve_method(spec, dim, t, cfg) -> str:
    if cfg.method != "auto":
        return cfg.method
    stiff = spec.max_decay_rate(dim) * t
    return "adaptive_rk" if stiff <= RK_STIFFNESS_BUDGET else "bdf"


def _check_tail(pops, tail_tol, dim, t):
    tail = tail_mass_of(pops)
    if tail >= tail_tol:
        raise TruncationError(f"state at t={t:g} leaks {tail:.3e} into the top levels of dim={dim}",
                              tail_mass=tail, dim=dim)
    return tail


def evolve(rho0: DensityMatrix, spec: LindbladSpec, t: float, cfg: EvolveConfig | None = None) -> DensityMatrix:
    """``exp(L t) rho0`` as a dense density matrix.

    ``adaptive_rk`` integrates ``vec(rho)`` with an embedded 8(5,3) Runge-Kutta
    pair, ``bdf`` integrates the subdiagonals implicitly (for stiff, large
    cutoffs) and ``dense_expm`` exponentiates the full superoperator.
    """
    cfg = cfg or EvolveConfig()
    if t < 0:
        raise DomainError(f"evolution time must be >= 0, got {t}")
    if t == 0:
        return rho0
    dim = rho0.dim
    method = _resolve_method(spec, dim, t, cfg)
    if method == "adaptive_rk":
        sol = solve_ivp(lambda _t, y: rhs(spec, y.reshape(dim, dim)).ravel(), (0.0, t),
                        rho0.entries.ravel().astype(complex), method="DOP853",
                        rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step)
        if sol.status != 0:
            raise ToleranceError(f"DOP853 step control failed: {sol.message}")
        e = sol.y[:, -1].reshape(dim, dim)
    elif method == "dense_expm":
        if dim > DENSE_EXPM_MAX_DIM:
            raise DomainError(f"dense_expm is limited to dim <= {DENSE_EXPM_MAX_DIM}")
        e = (sla.expm(superoperator(spec, dim) * t) @ rho0.entries.ravel()).reshape(dim, dim)
    else:
        e = _evolve_full_offsets(rho0.entries, spec, t, cfg, method)
    tail = _check_tail(np.diagonal(e).real, cfg.tail_tol, dim, t)
    return DensityMatrix(FockSpace(dim), e, tail_mass=tail)


def _evolve_hermitian(h, spec, t, cfg, method):
    """Evolve a Hermitian matrix through its lower triangle and mirror it."""
    dim = h.shape[0]
    lower = {d: np.diagonal(h, -d).copy() for d in range(dim) if np.any(np.diagonal(h, -d) != 0)}
    out = np.zeros((dim, dim), dtype=complex)
    if not lower:
        return out
    res = _integrate_offsets(spec, dim, lower, [t], cfg, method)[0]
    for d, v in res.items():
        i = np.arange(dim - d)
        out[i + d, i] = v
        out[i, i + d] = v.conj()
    out[np.diag_indices(dim)] = out.diagonal().real
    return out


def _evolve_full_offsets(e, spec, t, cfg, method):
    # The generator maps rho^+ to (L rho)^+, so split into Hermitian parts.
    herm = 0.5 * (e + e.conj().T)
    anti = 0.5j * (e.conj().T - e)  # Hermitian, with e = herm + i * anti
    out = _evolve_hermitian(herm, spec, t, cfg, method)
    if np.any(anti != 0):
        out = out + 1j * _evolve_hermitian(anti, spec, t, cfg, method)
    return out


def evolve_populations(p0, spec: LindbladSpec, times, cfg: EvolveConfig | None = None,
                       dim: int | None = None) -> list[np.ndarray]:
    """Photon-number distributions of an initially diagonal state.

    A diagonal state stays diagonal under these generators, so only the
    populations are integrated. ``p0`` is zero-padded to ``dim``.
    """
    cfg = cfg or EvolveConfig()
    p0 = np.asarray(p0, dtype=float)
    dim = len(p0) if dim is None else dim
    if dim < len(p0):
        raise DomainError("dim must not be smaller than the input distribution")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise DomainError("evolution times must be >= 0")
    padded = np.zeros(dim)
    padded[: len(p0)] = p0
    method = _resolve_method(spec, dim, float(times.max()), cfg)
    if method == "adaptive_rk":
        method = "rk"
    res = _integrate_offsets(spec, dim, {0: padded}, times, cfg, method)
    pops = [r[0].real for r in res]
    for p, t in zip(pops, times):
        _check_tail(p, cfg.tail_tol, dim, t)
    return pops


def moment_trajectory(rho0: DensityMatrix, spec: LindbladSpec, times, cfg: EvolveConfig | None = None,
                      dim: int | None = None, phis: Sequence[float] = ()) -> list[MomentReport]:
    """Moments of ``exp(L t) rho0`` for each ``t`` without forming the state.

    Only the main diagonal and the first two subdiagonals are integrated;
    they decouple from the rest, so the result is the same as slicing the
    full solution. ``rho0`` is zero-padded to the working cutoff ``dim``.
    """
    cfg = cfg or EvolveConfig()
    dim = rho0.dim if dim is None else dim
    if dim < rho0.dim:
        raise DomainError("dim must not be smaller than the input state's cutoff")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise DomainError("evolution times must be >= 0")
    blocks = {}
    for d in (0, 1, 2):
        v = np.diagonal(rho0.entries, -d)
        if d == 0 or np.any(v != 0):
            padded = np.zeros(dim - d, dtype=complex)
            padded[: len(v)] = v
            blocks[d] = padded
    method = _resolve_method(spec, dim, float(times.max()), cfg)
    if method == "dense_expm" and dim > DENSE_EXPM_MAX_DIM:
        raise DomainError(f"dense_expm is limited to dim <= {DENSE_EXPM_MAX_DIM}")
    if method == "adaptive_rk":
        method = "rk"
    reports = []
    for t, res in zip(times, _integrate_offsets(spec, dim, blocks, times, cfg, method)):
        pops = res[0].real
        tail = _check_tail(pops, cfg.tail_tol, dim, t)
        reports.append(moments_from_diagonals(pops, res.get(1), res.get(2), phis, tail))
    return reports


def evolve_moments(rho0, spec, t, cfg=None, dim=None, phis=()) -> MomentReport:
    return moment_trajectory(rho0, spec, [t], cfg, dim, phis)[0]


def phase_covariance_residual(spec: LindbladSpec, rho: DensityMatrix, phi: float, t: float,
                              cfg: EvolveConfig | None = None) -> float:
    """Trace distance between evolve-after-shift and shift-after-evolve."""
    a = evolve(phase_shift(rho, phi), spec, t, cfg)
    b = phase_shift(evolve(rho, spec, t, cfg), phi)
    return trace_distance(a, b)


def phase_insensitivity_report(spec: LindbladSpec, rho0: DensityMatrix, t: float, phis: Sequence[float],
                               cfg: EvolveConfig | None = None, dim: int | None = None,
                               min_signal: float = 1e-9) -> tuple[list, list]:
    """Per-angle quadrature gain ``g_phi`` and added noise ``N_phi``.

    ``g_phi = <x_phi(t)> / <x_phi(0)>`` and
    ``N_phi = Var x_phi(t) - g_phi^2 Var x_phi(0)``: variances on both sides.
    Reading the output side as a variance but the input side as a raw second
    moment makes ``N`` depend on the angle for any input with ``<a> != 0``.
    Angles where ``|<x_phi(0)>| <= min_signal`` get ``g_phi = nan`` and use
    the mean of the defined gains for ``N_phi``.
    """
    phis = list(phis)
    before = moments(rho0, phis)
    after = evolve_moments(rho0, spec, t, cfg, dim, phis)
    gains = []
    for (_, x0), (_, x1) in zip(before.quad_mean, after.quad_mean):
        gains.append(x1 / x0 if abs(x0) > min_signal else math.nan)
    defined = [g for g in gains if not math.isnan(g)]
    if not defined:
        raise DegenerateInput("every quadrature mean vanishes at t=0; use an input with <a> != 0")
    g_mean = float(np.mean(defined))
    noise = []
    for g, (_, v0), (_, v1) in zip(gains, before.quad_var, after.quad_var):
        gg = g_mean if math.isnan(g) else g
        noise.append(v1 - gg * gg * v0)
    return gains, noise


def suggest_dim(number_gain: float, in_n: float, floor: int = 20) -> int:
    """Starting cutoff ``max(floor, ceil(8 G_n (n_in + 1)))`` for photon-number gain ``G_n``.

    Use ``g**4`` for the noise-induced amplifier and ``g**6`` for the
    three-photon one. Heavy-tailed outputs need far more; the tail guard in
    :func:`evolve` decides.
    """
    return max(floor, math.ceil(8 * number_gain * (in_n + 1)))
