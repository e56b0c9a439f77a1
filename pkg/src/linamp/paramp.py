"""Parametric-amplifier channel: two-mode squeeze, then trace out the idler.

The squeeze generator ``r (a b - a^+ b^+)`` conserves ``n_a - n_b``. In the
truncated product basis it is therefore a direct sum of real antisymmetric
tridiagonal chains, one per difference ``d``, and the unitary is assembled
from the exponentials of those chains. The chains are at most
``min(dim_a, dim_b)`` long, so cutoffs of a few hundred per mode stay cheap.

Sign convention: with ``S = exp[r (a b - a^+ b^+)]`` the signal mode maps to
``S^+ a S = a cosh r - b^+ sinh r``. :func:`paramp_predict` follows this, so a
coherent idler enters the output amplitude as ``-sqrt(G^2 - 1) <b>^*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, TruncationError
from .fock import (
    DensityMatrix,
    FockSpace,
    MatrixOperator,
    ProductSpace,
    StateSpec,
    make_state,
    tail_mass_of,
)

OUTPUT_TAIL_TOL = 1e-6
# eigen-components of the inputs below this fraction of the largest weight are
# numerically zero and are dropped
COMPONENT_CUTOFF = 1e-15


@dataclass(frozen=True)
class ParampSpec:
    G: float
    sigma: StateSpec = field(default_factory=StateSpec.vacuum)
    dim_a: int = 64
    dim_b: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.G) and self.G >= 1):
            raise DomainError(f"paramp gain G must be >= 1, got {self.G}")
        if self.dim_b is None:
            object.__setattr__(self, "dim_b", self.dim_a)
        if self.dim_a < 2 or self.dim_b < 2:
            raise DomainError("paramp cutoffs must be >= 2")

    @property
    def r(self) -> float:
        return math.acosh(self.G)

    def to_dict(self) -> dict:
        return {"G": self.G, "sigma": self.sigma.to_dict(), "dim_a": self.dim_a, "dim_b": self.dim_b}

    @classmethod
    def from_dict(cls, doc: dict) -> "ParampSpec":
        sigma = StateSpec.from_dict(doc.get("sigma", {"kind": "vacuum"}))
        return cls(float(doc["G"]), sigma, int(doc.get("dim_a", 64)),
                   None if doc.get("dim_b") is None else int(doc["dim_b"]))


def _chain(d: int, dim_a: int, dim_b: int) -> tuple[np.ndarray, np.ndarray]:
    """Product-basis levels ``(n_a, n_b)`` with ``n_a - n_b = d``."""
    a0, b0 = max(d, 0), max(-d, 0)
    length = min(dim_a - a0, dim_b - b0)
    j = np.arange(length)
    return a0 + j, b0 + j


@lru_cache(maxsize=4096)
def _chain_unitary(r: float, d: int, dim_a: int, dim_b: int) -> np.ndarray:
    na, nb = _chain(d, dim_a, dim_b)
    # <n_a-1, n_b-1| (a b) |n_a, n_b> = sqrt(n_a n_b)
    e = r * np.sqrt(na[1:] * nb[1:].astype(float))
    k = np.diag(e, 1) - np.diag(e, -1)
    u = sla.expm(k)
    u.setflags(write=False)
    return u


def squeeze_unitary(r: float, dim_a: int, dim_b: int) -> MatrixOperator:
    """Dense ``exp[r (a b - a^+ b^+)]`` on the ``dim_a x dim_b`` product space (A-major)."""
    if not (math.isfinite(r) and r >= 0):
        raise DomainError(f"squeeze parameter must be >= 0, got {r}")
    n = dim_a * dim_b
    s = np.zeros((n, n))
    for d in range(-(dim_b - 1), dim_a):
        na, nb = _chain(d, dim_a, dim_b)
        idx = na * dim_b + nb
        s[np.ix_(idx, idx)] = _chain_unitary(float(r), d, dim_a, dim_b)
    return MatrixOperator(ProductSpace(dim_a, dim_b), s.astype(complex))


def _components(entries: np.ndarray):
    """Signed weights and orthonormal vectors with ``rho = sum w |v><v|``."""
    pops = np.diagonal(entries).real
    if np.count_nonzero(entries - np.diag(np.diagonal(entries))) == 0:
        keep = np.flatnonzero(np.abs(pops) > COMPONENT_CUTOFF * np.abs(pops).max())
        vecs = np.zeros((len(keep), entries.shape[0]), dtype=complex)
        vecs[np.arange(len(keep)), keep] = 1
        return pops[keep], vecs
    w, v = np.linalg.eigh(entries)
    keep = np.abs(w) > COMPONENT_CUTOFF * np.abs(w).max()
    return w[keep], v[:, keep].T


def _squeeze_products(r, psi, phi, dim_a, dim_b):
    """``S (psi (x) phi)`` for every pair of rows, as ``(n, dim_a, dim_b)`` arrays."""
    x = np.einsum("ia,jb->ijab", psi, phi).reshape(-1, dim_a, dim_b)
    y = np.zeros_like(x)
    for d in range(-(dim_b - 1), dim_a):
        na, nb = _chain(d, dim_a, dim_b)
        v = x[:, na, nb]
        if not np.any(v):
            continue
        y[:, na, nb] = v @ _chain_unitary(float(r), d, dim_a, dim_b).T
    return y


def apply_paramp(rho_in: DensityMatrix, spec: ParampSpec, tail_tol: float = OUTPUT_TAIL_TOL) -> DensityMatrix:
    """``Tr_B[S (rho_in (x) sigma) S^+]``.

    Both inputs are split into eigen-components and each product ket is
    squeezed chain by chain; the output is the signed-weight sum of the
    reduced projectors, so the map stays exactly linear in ``rho_in``.
    The guard fires when either output marginal reaches ``tail_tol`` in its
    top decile of levels.
    """
    if not isinstance(rho_in.space, FockSpace) or rho_in.dim != spec.dim_a:
        raise DomainError(f"input must be a single-mode state on dim_a={spec.dim_a}")
    sigma = make_state(spec.sigma, spec.dim_b)
    wa, va = _components(rho_in.entries)
    wb, vb = _components(sigma.entries)
    w = np.outer(wa, wb).ravel()
    y = _squeeze_products(spec.r, va, vb, spec.dim_a, spec.dim_b)
    prob = np.abs(y) ** 2
    pops_a = np.einsum("c,cab->a", w, prob)
    pops_b = np.einsum("c,cab->b", w, prob)
    tail = max(tail_mass_of(pops_a), tail_mass_of(pops_b))
    if tail >= tail_tol:
        raise TruncationError(f"paramp output leaks {tail:.3e} into the top levels "
                              f"(dim_a={spec.dim_a}, dim_b={spec.dim_b})", tail_mass=tail,
                              dim=(spec.dim_a, spec.dim_b))
    out = np.einsum("c,cab,cdb->ad", w, y, y.conj())
    return DensityMatrix(FockSpace(spec.dim_a), out, tail_mass=tail_mass_of(pops_a))


def paramp_predict(in_amp: complex, in_n: float, spec: ParampSpec) -> tuple[complex, float]:
    """Output ``<a>`` and ``<n>`` for an input uncorrelated with the idler.

    ``<a>_out = G <a> - sqrt(G^2-1) <b>^*`` and
    ``<n>_out = G^2 <n> + (G^2-1) <b b^+> - 2 G sqrt(G^2-1) Re(<a><b>)``.
    The idler terms in ``<b>`` vanish for vacuum, thermal and Fock idlers.
    """
    G = spec.G
    s = math.sqrt(G * G - 1)
    b = spec.sigma.mean_amp()
    bbdag = spec.sigma.mean_n() + 1
    in_amp = complex(in_amp)
    amp = G * in_amp - s * b.conjugate()
    n = G * G * in_n + s * s * bbdag - 2 * G * s * (in_amp * b).real
    return amp, n


def suggest_dims(G: float, in_n: float, sigma: StateSpec, tail: float = 1e-10) -> tuple[int, int]:
    """Cutoffs that keep both output marginals below ``tail`` per level.

    Treats each output marginal as geometric with its predicted mean and
    pads by the input photon number; the guard in :func:`apply_paramp`
    remains the authority.
    """
    g2 = G * G
    nb = sigma.mean_n()
    out_a = g2 * in_n + (g2 - 1) * (nb + 1)
    out_b = (g2 - 1) * (in_n + 1) + g2 * nb
    dims = []
    for mean, pad in ((out_a, in_n), (out_b, nb)):
        if mean <= 0:
            dims.append(max(16, math.ceil(2 * pad) + 16))
            continue
        levels = math.log(tail) / math.log(mean / (mean + 1))
        dims.append(max(16, math.ceil(levels + 4 * pad)))
    return dims[0], dims[1]
