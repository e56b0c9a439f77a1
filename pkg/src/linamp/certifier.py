"""First-two-moment test of whether a phase-preserving amplifier is a paramp.

A paramp with gain ``g`` and an idler uncorrelated with the signal satisfies
``<n>_out = g^2 <n>_in + (g^2 - 1) <b b^+>``. Each input/output record pins
down the idler moment ``beta = (<n>_out - g^2 <n>_in) / (g^2 - 1)`` it would
need. A single idler must serve every input, and ``<b b^+> >= 1`` for any
state. Records that disagree on ``beta``, or need ``beta < 1``, rule out every
paramp. Agreement is only a necessary condition, hence ``SIMULABLE_NECESSARY``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InconsistentGain, NoAmplitudeRecord, NotPhasePreserving

SIMULABLE_NECESSARY = "SIMULABLE_NECESSARY"
NOT_SIMULABLE = "NOT_SIMULABLE"
TRIVIAL_IDENTITY = "TRIVIAL_IDENTITY"
INCONSISTENT_GAIN = "INCONSISTENT_GAIN"
MIN_AMPLITUDE = 1e-9


@dataclass(frozen=True)
class MomentRecord:
    in_amp: complex
    in_n: float
    out_amp: complex
    out_n: float
    label: str = ""

    def __post_init__(self):
        for name in ("in_n", "out_n"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"{name} must be finite and >= 0, got {v}")

    def to_dict(self) -> dict:
        return {"label": self.label, "in_amp": [self.in_amp.real, self.in_amp.imag], "in_n": self.in_n,
                "out_amp": [self.out_amp.real, self.out_amp.imag], "out_n": self.out_n}

    @classmethod
    def from_dict(cls, doc: dict) -> "MomentRecord":
        def cplx(v):
            return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)

        return cls(cplx(doc["in_amp"]), float(doc["in_n"]), cplx(doc["out_amp"]), float(doc["out_n"]),
                   str(doc.get("label", "")))


@dataclass(frozen=True)
class CertificationResult:
    verdict: str
    g_est: float
    bbdag_required: list = field(default_factory=list)
    spread: float = 0.0
    witness: tuple | None = None

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "g_est": self.g_est, "bbdag_required": list(self.bbdag_required),
                "spread": self.spread, "witness": list(self.witness) if self.witness else None}


def estimate_gain(records: Sequence[MomentRecord], tol: float = 1e-6) -> float:
    """Real amplitude gain shared by all records with a usable input amplitude."""
    ratios = [r.out_amp / r.in_amp for r in records if abs(r.in_amp) > MIN_AMPLITUDE]
    if not ratios:
        raise NoAmplitudeRecord("no record has |in_amp| > 1e-9; the gain cannot be read off")
    for q in ratios:
        if abs(q.imag) > tol * abs(q):
            raise NotPhasePreserving(f"amplitude ratio {q} is not real: the channel rotates the phase")
        if q.real <= 0:
            raise NotPhasePreserving(f"amplitude ratio {q} is not positive")
    g = np.array([q.real for q in ratios])
    spread = (g.max() - g.min()) / g.mean()
    if spread > tol:
        raise InconsistentGain(f"amplitude gains disagree across records (relative spread {spread:.3e})")
    return float(g.mean())


def _gain_mismatch(records, g, tol) -> bool:
    for r in records:
        if abs(r.in_amp) > MIN_AMPLITUDE and abs(r.out_amp - g * r.in_amp) > tol * max(1.0, abs(g * r.in_amp)):
            return True
    return False


def certify(records: Sequence[MomentRecord], g: float, tol: float = 1e-6) -> CertificationResult:
    """Decide whether one paramp of gain ``g`` can reproduce every record.

    ``INCONSISTENT_GAIN`` is returned when a record's amplitude is not ``g``
    times its input amplitude, since no paramp of gain ``g`` could produce it.
    """
    records = list(records)
    if not records:
        raise DomainError("certify needs at least one record")
    if not math.isfinite(g) or g < 1 - tol:
        raise DomainError(f"a phase-preserving amplifier has g >= 1, got {g}")
    if abs(g - 1) <= tol:
        return CertificationResult(TRIVIAL_IDENTITY, g)
    if _gain_mismatch(records, g, tol):
        return CertificationResult(INCONSISTENT_GAIN, g)
    g2 = g * g
    beta = [(r.out_n - g2 * r.in_n) / (g2 - 1) for r in records]
    lo, hi = int(np.argmin(beta)), int(np.argmax(beta))
    spread = beta[hi] - beta[lo]
    mean = float(np.mean(beta))
    if spread > tol * (1 + abs(mean)) or mean < 1 - tol:
        return CertificationResult(NOT_SIMULABLE, g, beta, spread, (records[lo].label, records[hi].label))
    return CertificationResult(SIMULABLE_NECESSARY, g, beta, spread)


@dataclass(frozen=True)
class RegionTable:
    g: float
    bbdag: list
    n_star: list
    rows: list  # (n_in, lb, [paramp line per bbdag])

    def header(self) -> list[str]:
        return (["n_in", "lb"] + [f"paramp_{b:g}" for b in self.bbdag]
                + [f"n_star_{b:g}" for b in self.bbdag])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for n_in, lb, lines in self.rows:
            w.writerow([repr(float(v)) for v in (n_in, lb, *lines, *self.n_star)])
        return buf.getvalue()


def forbidden_region(gamma: float, t: float, n_in_grid: Sequence[float],
                     bbdag_list: Sequence[float]) -> RegionTable:
    """Three-photon lower bound against paramp lines of the same gain.

    Paramp lines ``g^2 n + (g^2-1) b`` have slope ``g^2`` while the bound has
    slope ``g^6``, so each line drops below the bound for ``n_in > n_star``.
    """
    if not (math.isfinite(gamma) and math.isfinite(t) and gamma * t > 0):
        raise DomainError(f"the region needs gamma * t > 0, got gamma={gamma}, t={t}")
    g = math.exp(gamma * t)
    g2, g6 = g * g, g ** 6
    c = (g6 - 1) / 3
    bbdag = [float(b) for b in bbdag_list]
    n_star = [((g2 - 1) * b - c) / (g6 - g2) for b in bbdag]
    rows = []
    for n in n_in_grid:
        n = float(n)
        if n < 0:
            raise DomainError("photon numbers in the grid must be >= 0")
        rows.append((n, g6 * n + c, [g2 * n + (g2 - 1) * b for b in bbdag]))
    return RegionTable(g, bbdag, n_star, rows)
