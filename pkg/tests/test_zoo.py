import math

import numpy as np
import pytest

from linamp.errors import DomainError, Unsupported
from linamp.fock import MomentReport, make_state, moments, number_operator
from linamp.lindblad import EvolveConfig, JumpTerm, evolve_moments, moment_trajectory, rhs
from linamp.zoo import (
    A1,
    A2,
    A3,
    TwoPhoton,
    alt_three_photon_rate,
    gain,
    kind_from_dict,
    kind_to_dict,
    moment_ode_rhs,
    predict_moments,
    three_photon_lower_bound,
    to_spec,
)

ALL_KINDS = [A1(2.0, 1.0), A2(1.0), A3(1.0), TwoPhoton(1.0, 0.3)]


def fock_moments(n):
    return moments(make_state("fock", n + 8, n=n))


def test_invariants():
    for bad in (lambda: A1(1.0, 1.0), lambda: A1(1.0, -0.1), lambda: A2(0.0), lambda: A3(-1.0),
                lambda: TwoPhoton(-1.0, 0.0)):
        with pytest.raises(DomainError):
            bad()


def test_spec_construction():
    assert to_spec(A2(1.0)) == to_spec(TwoPhoton(0.5, 0.5)).__class__(
        (JumpTerm(0.5, "lower", 2), JumpTerm(0.5, "raise", 2)))
    assert set(to_spec(A2(0.8)).terms) == set(to_spec(TwoPhoton(0.4, 0.4)).terms)
    assert to_spec(A1(1.0, 0.0)).terms == (JumpTerm(1.0, "raise", 1),)
    assert sorted(t.rate for t in to_spec(A3(9.0)).terms) == [1.0, 1.0, 9.0]


def test_json_round_trip():
    for kind in ALL_KINDS:
        assert kind_from_dict(kind_to_dict(kind)) == kind
    assert kind_from_dict({"kind": "A2", "gamma": 1.0}) == A2(1.0)
    with pytest.raises(DomainError):
        kind_from_dict({"kind": "A9"})
    with pytest.raises(DomainError):
        kind_from_dict({"kind": "A2", "gamma": 1.0, "colour": 2})


def test_gain():
    assert gain(A2(1.0), math.log(2)) == pytest.approx(2)
    assert gain(A1(2.0, 1.0), 2 * math.log(2)) == pytest.approx(2)
    assert gain(TwoPhoton(0.5, 0.5), math.log(2)) == pytest.approx(2)
    for kind in (A1(2.0, 1.0), A2(0.3), A3(1.0), TwoPhoton(0.2, 0.2)):
        assert gain(kind, 0.0) == 1
    with pytest.raises(Unsupported):
        gain(TwoPhoton(1.0, 0.3), 0.1)
    with pytest.raises(DomainError):
        gain(A2(1.0), -0.1)


def test_predict_moments_examples():
    assert predict_moments(A2(1.0), math.log(2), 0, 0.0).mean_n == pytest.approx(7.5)
    assert predict_moments(A1(2.0, 1.0), math.log(2), 0, 0.0).mean_n == pytest.approx(2.0)
    p = predict_moments(A3(1.0), math.log(2), 0, 1.0)
    assert p.is_lower_bound and p.mean_n == pytest.approx(85.0)
    assert p.mean_n_interval[1] == math.inf
    for kind in (A1(2.0, 1.0), A2(0.3), A3(1.0)):
        q = predict_moments(kind, 0.0, 0.5 + 0.5j, 1.25)
        assert q.mean_n == pytest.approx(1.25) and q.mean_amp == 0.5 + 0.5j
    with pytest.raises(DomainError):
        predict_moments(A2(1.0), 0.1, 0, -1.0)


def test_a1_closed_form_against_direct_integration():
    # d<n>/dt = (ku - kd) <n> + ku integrated by hand
    ku, kd, t, n0 = 2.0, 1.0, 0.37, 3.0
    r = ku - kd
    exact = n0 * math.exp(r * t) + ku / r * (math.exp(r * t) - 1)
    assert predict_moments(A1(ku, kd), t, 0, n0).mean_n == pytest.approx(exact, rel=1e-14)


def test_moment_ode_examples():
    assert moment_ode_rhs(A2(1.0), fock_moments(0)) == pytest.approx(2.0)
    assert moment_ode_rhs(TwoPhoton(0.5, 0.5), fock_moments(1)) == pytest.approx(6.0)
    assert moment_ode_rhs(A3(1.0), fock_moments(0)) == pytest.approx(2.0)
    assert moment_ode_rhs(A3(1.0), fock_moments(1)) == pytest.approx(8.0)
    assert alt_three_photon_rate(1.0, fock_moments(1)) == pytest.approx(10.0)


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: type(k).__name__)
@pytest.mark.parametrize("n", [0, 1, 2, 5])
def test_moment_ode_is_the_generator_applied_to_n(kind, n):
    # on a Fock state far below the cutoff, Tr(n L rho) is the exact rate
    rho = make_state("fock", 30, n=n)
    exact = np.trace(number_operator(30).entries @ rhs(to_spec(kind), rho)).real
    assert moment_ode_rhs(kind, moments(rho)) == pytest.approx(exact, rel=1e-12)


def test_moment_ode_on_mixed_input():
    rho = make_state("coherent", 40, alpha=1.2 - 0.4j)
    for kind in ALL_KINDS:
        exact = np.trace(number_operator(40).entries @ rhs(to_spec(kind), rho)).real
        assert moment_ode_rhs(kind, moments(rho)) == pytest.approx(exact, rel=1e-10)


def test_three_photon_lower_bound_values():
    assert three_photon_lower_bound(2.0, 1.0) == pytest.approx(85.0)
    assert three_photon_lower_bound(1.0, 3.0) == 3.0


@pytest.mark.parametrize("t", [0.05, 0.1, 0.2])
def test_a1_and_a2_simulation_match_predictions(t):
    cfg = EvolveConfig(method="bdf")
    for kind, dim in ((A1(2.0, 1.0), 300), (A2(1.0), 16000)):
        rho = make_state("coherent", 30, alpha=1.0)
        m = evolve_moments(rho, to_spec(kind), t, cfg, dim=dim)
        p = predict_moments(kind, t, 1.0, 1.0)
        assert m.mean_n == pytest.approx(p.mean_n, rel=1e-6)
        assert abs(m.mean_amp - p.mean_amp) <= 1e-6 * abs(p.mean_amp)


@pytest.mark.parametrize("t", [0.05, 0.1, 0.2])
def test_a3_respects_lower_bound(t):
    cfg = EvolveConfig(method="bdf", tail_tol=1.0)
    for n in (0, 1, 2):
        m = evolve_moments(make_state("fock", 8, n=n), to_spec(A3(1.0)), t, cfg, dim=2000)
        assert m.mean_n >= three_photon_lower_bound(math.exp(t), n)


def test_amplitude_linearity_is_real_and_positive():
    kind = A2(1.0)
    ratios = []
    for alpha in (0.5, 1.0, 1 + 1j):
        rho = make_state("coherent", 40, alpha=[alpha.real, alpha.imag] if isinstance(alpha, complex) else alpha)
        m = evolve_moments(rho, to_spec(kind), 0.1, EvolveConfig(method="bdf"), dim=8000)
        ratios.append(m.mean_amp / alpha)
    ratios = np.array(ratios)
    assert np.abs(ratios - ratios[0]).max() < 1e-8
    assert np.abs(ratios.imag).max() < 1e-8 and ratios[0].real > 1


def test_moment_report_fields_used_by_the_odes():
    m = MomentReport(0j, 2.0, 5.0, 3.0, [], [], 0.0)
    assert moment_ode_rhs(A3(1.0), m) == pytest.approx(3.0 + 12.0 + 2.0)
    assert moment_ode_rhs(TwoPhoton(1.0, 0.3), m) == pytest.approx(2 * 0.7 * 3.0 + 16.0 + 4.0)


def test_two_photon_short_time_trajectory_matches_ode():
    kind = TwoPhoton(1.0, 0.3)
    h = 1e-4
    cfg = EvolveConfig(method="bdf", rel_tol=1e-12, abs_tol=1e-16)
    reports = moment_trajectory(make_state("fock", 10, n=1), to_spec(kind), [0.005 - h, 0.005, 0.005 + h],
                                cfg, dim=400)
    fd = (reports[2].mean_n - reports[0].mean_n) / (2 * h)
    assert fd == pytest.approx(moment_ode_rhs(kind, reports[1]), rel=1e-5)
