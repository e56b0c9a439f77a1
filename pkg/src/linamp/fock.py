"""Truncated single-mode Fock space: ladder operators, states and moments.

Matrices are dense complex ``numpy`` arrays. Product states of two modes
use A-major ordering: basis index ``i * dim_b + j`` holds ``|i>_A |j>_B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, DomainError, StateError, TruncationError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
PSD_TOL = -1e-8
STATE_TAIL_TOL = 1e-8


@dataclass(frozen=True)
class FockSpace:
    """Lowest ``dim`` number states ``|0>, ..., |dim-1>`` of one mode."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise DomainError(f"FockSpace needs an integer dim >= 2, got {self.dim!r}")


@dataclass(frozen=True)
class ProductSpace:
    """Two truncated modes, A index major."""

    dim_a: int
    dim_b: int

    def __post_init__(self):
        FockSpace(self.dim_a)
        FockSpace(self.dim_b)

    @property
    def dim(self) -> int:
        return self.dim_a * self.dim_b


def _as_space(space) -> FockSpace | ProductSpace:
    if isinstance(space, (FockSpace, ProductSpace)):
        return space
    return FockSpace(int(space))


def tail_levels(dim: int) -> int:
    """Number of top levels whose population counts as truncation leakage.

    The top decile, but never fewer than three levels: a jump by ``k`` photons
    only reaches every ``k``-th level, so a narrower window can miss the
    leaked population entirely.
    """
    return min(dim - 1, max(3, math.ceil(dim / 10)))


def tail_mass_of(populations: np.ndarray) -> float:
    p = np.asarray(populations).real
    return float(max(p[len(p) - tail_levels(len(p)):].sum(), 0.0))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MatrixOperator:
    space: FockSpace | ProductSpace
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        entries = _frozen(self.entries)
        d = self.space.dim
        if entries.shape != (d, d):
            raise DimensionMismatch(f"entries shape {entries.shape} does not match dim {d}")
        object.__setattr__(self, "entries", entries)

    def dag(self) -> "MatrixOperator":
        return MatrixOperator(self.space, self.entries.conj().T)

    def __matmul__(self, other: "MatrixOperator") -> "MatrixOperator":
        if other.space != self.space:
            raise DimensionMismatch("operators live on different spaces")
        return MatrixOperator(self.space, self.entries @ other.entries)

    def to_json(self) -> dict:
        """Row-major list of ``[re, im]`` pairs plus the dimension."""
        flat = self.entries.reshape(-1)
        return {"dim": self.space.dim, "entries": [[float(z.real), float(z.imag)] for z in flat]}

    @classmethod
    def from_json(cls, doc: dict) -> "MatrixOperator":
        d = int(doc["dim"])
        pairs = np.asarray(doc["entries"], dtype=float)
        if pairs.shape != (d * d, 2):
            raise DimensionMismatch("entry list does not hold dim*dim complex pairs")
        return cls(FockSpace(d), (pairs[:, 0] + 1j * pairs[:, 1]).reshape(d, d))


def lowering_coefficients(dim: int, power: int = 1) -> np.ndarray:
    """``c[n] = sqrt(n!/(n-k)!)``, the amplitude of ``a^k |n>``; zero for n < k."""
    n = np.arange(dim, dtype=float)
    c = np.ones(dim)
    for m in range(power):
        c = c * np.clip(n - m, 0.0, None)
    return np.sqrt(c)


def build_ladder(space) -> tuple[MatrixOperator, MatrixOperator]:
    """Truncated annihilation and creation operators."""
    space = _as_space(space)
    a = np.diag(np.sqrt(np.arange(1, space.dim, dtype=float)), k=1).astype(complex)
    return MatrixOperator(space, a), MatrixOperator(space, a.conj().T)


def number_operator(space) -> MatrixOperator:
    space = _as_space(space)
    return MatrixOperator(space, np.diag(np.arange(space.dim, dtype=complex)))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive (to ``PSD_TOL``) state.

    Construction validates the invariants and raises :class:`StateError` on
    violation; nothing is clipped or symmetrised. ``tail_mass`` is filled in
    from the populations when omitted.
    """

    space: FockSpace | ProductSpace
    entries: np.ndarray = field(repr=False)
    tail_mass: float = None
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        entries = _frozen(self.entries)
        d = self.space.dim
        if entries.shape != (d, d):
            raise DimensionMismatch(f"entries shape {entries.shape} does not match dim {d}")
        object.__setattr__(self, "entries", entries)
        if self.tail_mass is None:
            object.__setattr__(self, "tail_mass", _state_tail(self.space, entries))
        if self.validate:
            check_state(entries)

    @property
    def dim(self) -> int:
        return self.space.dim

    def populations(self) -> np.ndarray:
        return np.diagonal(self.entries).real.copy()

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries).min())

    def trace(self) -> complex:
        return complex(np.trace(self.entries))


def check_state(entries: np.ndarray, psd_tol: float = PSD_TOL) -> None:
    herm = np.abs(entries - entries.conj().T).max()
    if herm > HERMITIAN_TOL:
        raise StateError(f"not Hermitian: max |rho - rho^+| = {herm:.3e}")
    tr = np.trace(entries)
    if abs(tr - 1) > TRACE_TOL:
        raise StateError(f"trace {tr.real:.12g} differs from 1 by {abs(tr - 1):.3e}")
    lam = np.linalg.eigvalsh(0.5 * (entries + entries.conj().T)).min()
    if lam < psd_tol:
        raise StateError(f"minimum eigenvalue {lam:.3e} below {psd_tol:g}")


def _state_tail(space, entries) -> float:
    p = np.diagonal(entries).real
    if isinstance(space, ProductSpace):
        grid = p.reshape(space.dim_a, space.dim_b)
        return max(tail_mass_of(grid.sum(axis=1)), tail_mass_of(grid.sum(axis=0)))
    return tail_mass_of(p)


@dataclass(frozen=True)
class StateSpec:
    """Recipe for one of the standard input states."""

    kind: str
    n: int = 0
    alpha: complex = 0j
    nbar: float = 0.0

    @classmethod
    def vacuum(cls) -> "StateSpec":
        return cls("vacuum")

    @classmethod
    def fock(cls, n: int) -> "StateSpec":
        return cls("fock", n=int(n))

    @classmethod
    def coherent(cls, alpha: complex) -> "StateSpec":
        return cls("coherent", alpha=complex(alpha))

    @classmethod
    def thermal(cls, nbar: float) -> "StateSpec":
        return cls("thermal", nbar=float(nbar))

    def mean_amp(self) -> complex:
        return self.alpha if self.kind == "coherent" else 0j

    def mean_n(self) -> float:
        return {"vacuum": 0.0, "fock": float(self.n), "thermal": self.nbar,
                "coherent": abs(self.alpha) ** 2}[self.kind]

    def to_dict(self) -> dict:
        if self.kind == "fock":
            return {"kind": "fock", "n": self.n}
        if self.kind == "coherent":
            return {"kind": "coherent", "alpha": [self.alpha.real, self.alpha.imag]}
        if self.kind == "thermal":
            return {"kind": "thermal", "nbar": self.nbar}
        return {"kind": "vacuum"}

    @classmethod
    def from_dict(cls, doc: dict) -> "StateSpec":
        kind = doc.get("kind")
        if kind == "vacuum":
            return cls.vacuum()
        if kind == "fock":
            return cls.fock(doc["n"])
        if kind == "thermal":
            return cls.thermal(doc["nbar"])
        if kind == "coherent":
            alpha = doc["alpha"]
            if isinstance(alpha, (list, tuple)):
                alpha = complex(alpha[0], alpha[1])
            return cls.coherent(alpha)
        raise DomainError(f"unknown state kind {kind!r}")


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    return c


def make_state(kind: StateSpec | str, space, **params) -> DensityMatrix:
    """Build a standard state on ``space`` (a FockSpace or an int dim).

    Coherent and thermal states are renormalised after truncation; a state
    whose top-decile population reaches ``1e-8`` is rejected.
    """
    if isinstance(kind, str):
        kind = StateSpec.from_dict({"kind": kind, **params})
    space = _as_space(space)
    if not isinstance(space, FockSpace):
        raise DomainError("make_state builds single-mode states only")
    d = space.dim
    if kind.kind == "vacuum":
        psi = np.zeros(d, dtype=complex)
        psi[0] = 1
        rho = np.outer(psi, psi.conj())
    elif kind.kind == "fock":
        if not 0 <= kind.n < d:
            raise DomainError(f"fock({kind.n}) needs 0 <= n < dim={d}")
        rho = np.zeros((d, d), dtype=complex)
        rho[kind.n, kind.n] = 1
    elif kind.kind == "coherent":
        psi = _coherent_amplitudes(kind.alpha, d)
        psi /= np.linalg.norm(psi)
        rho = np.outer(psi, psi.conj())
    elif kind.kind == "thermal":
        if kind.nbar < 0:
            raise DomainError(f"thermal occupation must be >= 0, got {kind.nbar}")
        q = kind.nbar / (1 + kind.nbar)
        p = q ** np.arange(d, dtype=float)
        rho = np.diag(p / p.sum()).astype(complex)
    else:
        raise DomainError(f"unknown state kind {kind.kind!r}")
    tail = tail_mass_of(np.diagonal(rho).real)
    if tail >= STATE_TAIL_TOL:
        raise TruncationError(f"{kind.kind} state leaks {tail:.3e} into the top levels of dim={d}",
                              tail_mass=tail, dim=d)
    return DensityMatrix(space, rho, tail_mass=tail)


def pure_state_vector(kind: StateSpec, dim: int) -> np.ndarray:
    """Normalised ket for the pure members of :class:`StateSpec`."""
    if kind.kind == "thermal" and kind.nbar > 0:
        raise DomainError("a thermal state with nbar > 0 is mixed")
    if kind.kind == "coherent":
        psi = _coherent_amplitudes(kind.alpha, dim)
    else:
        psi = np.zeros(dim, dtype=complex)
        n = kind.n if kind.kind == "fock" else 0
        if not 0 <= n < dim:
            raise DomainError(f"fock({n}) needs 0 <= n < dim={dim}")
        psi[n] = 1
    psi = psi / np.linalg.norm(psi)
    tail = tail_mass_of(np.abs(psi) ** 2)
    if tail >= STATE_TAIL_TOL:
        raise TruncationError(f"state leaks {tail:.3e} into the top levels", tail_mass=tail, dim=dim)
    return psi


@dataclass(frozen=True)
class MomentReport:
    mean_amp: complex
    mean_n: float
    mean_n2: float
    mean_a2norm: float
    quad_mean: list
    quad_var: list
    tail_mass: float
    mean_a2: complex = 0j

    @property
    def variance_n(self) -> float:
        return self.mean_n2 - self.mean_n ** 2


def moments_from_diagonals(pops, sub1=None, sub2=None, phis: Iterable[float] = (),
                           tail_mass: float | None = None) -> MomentReport:
    """Moments from the three lowest diagonals of a single-mode state.

    ``pops[i] = rho[i, i]``, ``sub1[i] = rho[i+1, i]``, ``sub2[i] = rho[i+2, i]``.
    These are all the entries ``<a>``, ``<a^2>``, ``<n>``, ``<n^2>`` and the
    quadrature statistics depend on. Truncated operators are used throughout,
    so ``<a a^+>`` lacks the top level exactly as ``Tr(rho a a^+)`` does.
    """
    p = np.asarray(pops, dtype=float)
    d = len(p)
    n = np.arange(d, dtype=float)
    sub1 = np.zeros(d - 1) if sub1 is None else np.asarray(sub1)
    sub2 = np.zeros(d - 2) if sub2 is None else np.asarray(sub2)
    mean_amp = complex(np.sum(np.sqrt(n[1:]) * sub1))
    mean_a2 = complex(np.sum(np.sqrt(n[1:-1] * n[2:]) * sub2))
    mean_n = float(n @ p)
    mean_n2 = float((n * n) @ p)
    a2norm = float((n * (n - 1)) @ p)
    aadag = float(n[1:] @ p[:-1])
    quad_mean, quad_var = [], []
    for phi in phis:
        rot = np.exp(-1j * phi)
        xm = math.sqrt(2) * (mean_amp * rot).real
        x2 = (mean_a2 * rot * rot).real + 0.5 * (mean_n + aadag)
        quad_mean.append((float(phi), float(xm)))
        quad_var.append((float(phi), float(x2 - xm * xm)))
    if tail_mass is None:
        tail_mass = tail_mass_of(p)
    return MomentReport(mean_amp, mean_n, mean_n2, a2norm, quad_mean, quad_var,
                        float(tail_mass), mean_a2)


def moments(rho: DensityMatrix, phis: Sequence[float] = ()) -> MomentReport:
    if not isinstance(rho.space, FockSpace):
        raise DomainError("moments are defined for single-mode states")
    e = rho.entries
    return moments_from_diagonals(np.diagonal(e).real, np.diagonal(e, -1),
                                  np.diagonal(e, -2), phis, rho.tail_mass)


def tensor(rho_a: DensityMatrix, rho_b: DensityMatrix) -> DensityMatrix:
    """``rho_a (x) rho_b`` with A-major index ordering."""
    space = ProductSpace(rho_a.dim, rho_b.dim)
    return DensityMatrix(space, np.kron(rho_a.entries, rho_b.entries))


def partial_trace_b(rho_ab: DensityMatrix | np.ndarray, dim_a: int, dim_b: int) -> DensityMatrix:
    e = rho_ab.entries if isinstance(rho_ab, DensityMatrix) else np.asarray(rho_ab)
    if e.shape != (dim_a * dim_b, dim_a * dim_b):
        raise DimensionMismatch(f"state of shape {e.shape} is not on a {dim_a}x{dim_b} product space")
    red = np.trace(e.reshape(dim_a, dim_b, dim_a, dim_b), axis1=1, axis2=3)
    return DensityMatrix(FockSpace(dim_a), red)


def partial_trace_a(rho_ab: DensityMatrix | np.ndarray, dim_a: int, dim_b: int) -> DensityMatrix:
    e = rho_ab.entries if isinstance(rho_ab, DensityMatrix) else np.asarray(rho_ab)
    if e.shape != (dim_a * dim_b, dim_a * dim_b):
        raise DimensionMismatch(f"state of shape {e.shape} is not on a {dim_a}x{dim_b} product space")
    red = np.trace(e.reshape(dim_a, dim_b, dim_a, dim_b), axis1=0, axis2=2)
    return DensityMatrix(FockSpace(dim_b), red)


def phase_shift(rho: DensityMatrix, phi: float) -> DensityMatrix:
    """``exp(-i phi n) rho exp(+i phi n)``."""
    if not isinstance(rho.space, FockSpace):
        raise DomainError("phase shifts act on single-mode states")
    u = np.exp(-1j * phi * np.arange(rho.dim))
    return DensityMatrix(rho.space, u[:, None] * rho.entries * u.conj()[None, :],
                         tail_mass=rho.tail_mass)


def trace_distance(rho, sigma) -> float:
    a = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    b = sigma.entries if isinstance(sigma, DensityMatrix) else np.asarray(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    diff = a - b
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def embed(rho: DensityMatrix, dim: int) -> DensityMatrix:
    """Zero-pad a single-mode state into a larger cutoff."""
    if dim < rho.dim:
        raise DimensionMismatch(f"cannot embed dim {rho.dim} into smaller dim {dim}")
    out = np.zeros((dim, dim), dtype=complex)
    out[: rho.dim, : rho.dim] = rho.entries
    return DensityMatrix(FockSpace(dim), out, validate=False)


def random_state(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random mixed state concentrated on the lower half of the cutoff."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    g[dim // 2:] = 0
    rho = g @ g.conj().T
    return DensityMatrix(FockSpace(dim), rho / np.trace(rho).real)
