"""Named amplifier families and their closed-form moment predictions.

=========  ===============================================  ==============
kind       jump terms                                       amplitude gain
=========  ===============================================  ==============
A1         raise(1) at k_up, lower(1) at k_down             exp((k_up - k_down) t / 2)
A2         lower(2), raise(2), both at gamma/2              exp(gamma t)
A3         lower(3), raise(3) at gamma/9; lower(2) at gamma exp(gamma t)
TwoPhoton  raise(2) at k_up2, lower(2) at k_down2           exp(2 k t) if k_up2 == k_down2 == k
=========  ===============================================  ==============
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError, Unsupported
from .fock import MomentReport
from .lindblad import JumpTerm, LindbladSpec


def _finite(*vals):
    return all(isinstance(v, (int, float)) and math.isfinite(v) for v in vals)


@dataclass(frozen=True)
class A1:
    """Linear (single-photon) gain with thermal loss; requires ``kappa_up > kappa_down >= 0``."""

    kappa_up: float
    kappa_down: float

    def __post_init__(self):
        if not (_finite(self.kappa_up, self.kappa_down) and self.kappa_up > self.kappa_down >= 0):
            raise DomainError(f"A1 needs kappa_up > kappa_down >= 0, got {self.kappa_up}, {self.kappa_down}")


@dataclass(frozen=True)
class A2:
    """Balanced two-photon gain and loss (multiplicative noise)."""

    gamma: float

    def __post_init__(self):
        if not (_finite(self.gamma) and self.gamma > 0):
            raise DomainError(f"A2 needs gamma > 0, got {self.gamma}")


@dataclass(frozen=True)
class A3:
    """Balanced three-photon gain and loss plus two-photon loss."""

    gamma: float

    def __post_init__(self):
        if not (_finite(self.gamma) and self.gamma > 0):
            raise DomainError(f"A3 needs gamma > 0, got {self.gamma}")


@dataclass(frozen=True)
class TwoPhoton:
    kappa_up2: float
    kappa_down2: float

    def __post_init__(self):
        if not (_finite(self.kappa_up2, self.kappa_down2) and self.kappa_up2 >= 0 and self.kappa_down2 >= 0):
            raise DomainError("TwoPhoton rates must be finite and >= 0")


KINDS = {"A1": A1, "A2": A2, "A3": A3, "TwoPhoton": TwoPhoton}
AmplifierKind = A1 | A2 | A3 | TwoPhoton


def kind_to_dict(kind) -> dict:
    return {"kind": type(kind).__name__, **asdict(kind)}


def kind_from_dict(doc: dict):
    doc = dict(doc)
    name = doc.pop("kind", None)
    if name not in KINDS:
        raise DomainError(f"unknown amplifier kind {name!r}; expected one of {sorted(KINDS)}")
    try:
        return KINDS[name](**{k: float(v) for k, v in doc.items()})
    except TypeError as exc:
        raise DomainError(f"bad fields for {name}: {exc}") from None


def to_spec(kind) -> LindbladSpec:
    if isinstance(kind, A1):
        terms = [JumpTerm(kind.kappa_up, "raise", 1), JumpTerm(kind.kappa_down, "lower", 1)]
    elif isinstance(kind, A2):
        terms = [JumpTerm(kind.gamma / 2, "lower", 2), JumpTerm(kind.gamma / 2, "raise", 2)]
    elif isinstance(kind, A3):
        terms = [JumpTerm(kind.gamma / 9, "lower", 3), JumpTerm(kind.gamma / 9, "raise", 3),
                 JumpTerm(kind.gamma, "lower", 2)]
    elif isinstance(kind, TwoPhoton):
        terms = [JumpTerm(kind.kappa_up2, "raise", 2), JumpTerm(kind.kappa_down2, "lower", 2)]
    else:
        raise DomainError(f"not an amplifier kind: {kind!r}")
    return LindbladSpec(tuple(t for t in terms if t.rate > 0) or tuple(terms[:1]))


def gain(kind, t: float) -> float:
    """Amplitude gain ``g`` with ``<a>(t) = g <a>(0)``."""
    if t < 0:
        raise DomainError(f"time must be >= 0, got {t}")
    if isinstance(kind, A1):
        return math.exp(0.5 * (kind.kappa_up - kind.kappa_down) * t)
    if isinstance(kind, (A2, A3)):
        return math.exp(kind.gamma * t)
    if isinstance(kind, TwoPhoton):
        if kind.kappa_up2 != kind.kappa_down2:
            raise Unsupported("the two-photon amplifier has no closed-form gain unless its rates are equal")
        return math.exp(2 * kind.kappa_up2 * t)
    raise DomainError(f"not an amplifier kind: {kind!r}")


@dataclass(frozen=True)
class MomentPrediction:
    """``mean_n`` is exact, or a lower bound when ``is_lower_bound`` is set."""

    mean_amp: complex
    mean_n: float
    gain: float
    is_lower_bound: bool = False

    @property
    def mean_n_interval(self) -> tuple[float, float]:
        return (self.mean_n, math.inf if self.is_lower_bound else self.mean_n)


def predict_moments(kind, t: float, in_amp: complex, in_n: float) -> MomentPrediction:
    if in_n < 0:
        raise DomainError(f"in_n must be >= 0, got {in_n}")
    g = gain(kind, t)
    g2 = g * g
    if isinstance(kind, A1):
        n = g2 * in_n + (g2 - 1) * kind.kappa_up / (kind.kappa_up - kind.kappa_down)
        return MomentPrediction(g * in_amp, n, g)
    if isinstance(kind, (A2, TwoPhoton)):
        # an equal-rate TwoPhoton is A2 with gamma = 2 kappa
        g4 = g2 * g2
        return MomentPrediction(g * in_amp, g4 * in_n + (g4 - 1) / 2, g)
    g6 = g2 ** 3
    return MomentPrediction(g * in_amp, g6 * in_n + (g6 - 1) / 3, g, is_lower_bound=True)


def moment_ode_rhs(kind, m: MomentReport) -> float:
    """``d<n>/dt`` expressed through the moments of the current state.

    The three-photon family uses
    ``gamma <a^+2 a^2> + 6 gamma <n> + 2 gamma = gamma <n^2> + 5 gamma <n> + 2 gamma``,
    which follows from applying the adjoint generator to ``n``. See
    :func:`alt_three_photon_rate` for the variant that overstates it.
    """
    if isinstance(kind, A1):
        return (kind.kappa_up - kind.kappa_down) * m.mean_n + kind.kappa_up
    if isinstance(kind, A2):
        return 2 * kind.gamma * m.mean_n + 2 * kind.gamma * (m.mean_n + 1)
    if isinstance(kind, TwoPhoton):
        up, down = kind.kappa_up2, kind.kappa_down2
        return 2 * (up - down) * m.mean_a2norm + 8 * up * m.mean_n + 4 * up
    if isinstance(kind, A3):
        return kind.gamma * (m.mean_a2norm + 6 * m.mean_n + 2)
    raise DomainError(f"not an amplifier kind: {kind!r}")


def alt_three_photon_rate(gamma: float, m: MomentReport) -> float:
    """Alternative closed form ``2 gamma <n^2> + 6 gamma <n> + 2 gamma``.

    Kept for comparison against simulation. It matches :func:`moment_ode_rhs`
    on the vacuum only and overshoots by ``gamma (<n^2> + <n>)`` elsewhere;
    on ``|1>`` it gives ``10 gamma`` where the exact rate is ``8 gamma``.
    """
    return gamma * (2 * m.mean_n2 + 6 * m.mean_n + 2)


def three_photon_lower_bound(g: float, in_n: float) -> float:
    g6 = g ** 6
    return g6 * in_n + (g6 - 1) / 3
