import math

import numpy as np
import pytest
import scipy.linalg as sla

from linamp.errors import DomainError, TruncationError
from linamp.fock import StateSpec, build_ladder, make_state, moments, partial_trace_b, random_state, trace_distance
from linamp.fock import FockSpace, tensor
from linamp.paramp import ParampSpec, apply_paramp, paramp_predict, squeeze_unitary, suggest_dims


def test_spec_validation_and_defaults():
    with pytest.raises(DomainError):
        ParampSpec(0.9)
    spec = ParampSpec(2.0, StateSpec.thermal(1.0), 40)
    assert spec.dim_b == 40
    assert spec.r == pytest.approx(math.acosh(2.0))
    assert ParampSpec.from_dict(spec.to_dict()) == spec
    doc = {"G": 2.0, "sigma": {"kind": "thermal", "nbar": 1.0}, "dim_a": 64, "dim_b": 64}
    assert ParampSpec.from_dict(doc).sigma == StateSpec.thermal(1.0)


def test_zero_squeeze_is_identity():
    s = squeeze_unitary(0.0, 5, 6).entries
    assert np.array_equal(s, np.eye(30))


def test_squeeze_unitary_matches_dense_expm():
    da, db, r = 7, 6, 0.8
    a, _ = build_ladder(FockSpace(da))
    b, _ = build_ladder(FockSpace(db))
    A = np.kron(a.entries, np.eye(db))
    B = np.kron(np.eye(da), b.entries)
    K = r * (A @ B - A.conj().T @ B.conj().T)
    assert np.abs(squeeze_unitary(r, da, db).entries - sla.expm(K)).max() < 1e-12


def test_squeeze_unitary_is_unitary():
    for r in (0.3, 1.5):
        s = squeeze_unitary(r, 48, 48).entries
        assert np.abs(s @ s.conj().T - np.eye(48 * 48)).max() <= 1e-10


def test_two_mode_vacuum_gives_thermal_idler_trace():
    r, dim = 0.6, 60
    s = squeeze_unitary(r, dim, dim).entries
    vac = np.zeros(dim * dim)
    vac[0] = 1
    out = s @ vac
    red = partial_trace_b(np.outer(out, out.conj()), dim, dim)
    p = np.linalg.eigvalsh(red.entries)[::-1]
    # geometric fit: ratio of consecutive eigenvalues and mean occupation
    q = p[1] / p[0]
    nbar = q / (1 - q)
    assert nbar == pytest.approx(math.sinh(r) ** 2, rel=1e-10)
    assert moments(red).mean_n == pytest.approx(math.cosh(r) ** 2 - 1, rel=1e-10)


def test_apply_matches_dense_unitary_oracle():
    rng = np.random.default_rng(4)
    da, db = 10, 14
    spec = ParampSpec(1.1, StateSpec.thermal(0.1), da, db)
    rho = random_state(da, rng)
    sigma = make_state(spec.sigma, db)
    s = squeeze_unitary(spec.r, da, db).entries
    dense = partial_trace_b(s @ tensor(rho, sigma).entries @ s.conj().T, da, db)
    out = apply_paramp(rho, spec, tail_tol=1.0)
    assert trace_distance(out, dense) < 1e-12


def test_identity_gain_returns_input():
    rho = make_state("coherent", 30, alpha=0.5 + 0.5j)
    out = apply_paramp(rho, ParampSpec(1.0, StateSpec.vacuum(), 30))
    assert trace_distance(out, rho) <= 1e-10


def test_examples_from_the_moment_laws():
    spec = ParampSpec(2.0, StateSpec.vacuum(), *suggest_dims(2.0, 1.0, StateSpec.vacuum()))
    out = apply_paramp(make_state("fock", spec.dim_a, n=1), spec)
    assert moments(out).mean_n == pytest.approx(7.0, rel=1e-9)
    out = apply_paramp(make_state("coherent", spec.dim_a, alpha=1.0), spec)
    assert abs(moments(out).mean_amp - 2.0) < 1e-9


def test_predict_examples():
    amp, n = paramp_predict(0.3 - 0.1j, 2.0, ParampSpec(1.0))
    assert amp == 0.3 - 0.1j and n == pytest.approx(2.0)
    assert paramp_predict(0, 0.0, ParampSpec(2.0, StateSpec.thermal(1.0)))[1] == pytest.approx(6.0)
    amp, _ = paramp_predict(0, 0.0, ParampSpec(2.0, StateSpec.coherent(1.0)))
    assert abs(amp) == pytest.approx(math.sqrt(3))


def test_coherent_idler_sign_and_cross_term():
    beta, alpha = 0.6 + 0.3j, 0.5 - 0.2j
    sigma = StateSpec.coherent(beta)
    spec = ParampSpec(1.3, sigma, 70, 70)
    out = moments(apply_paramp(make_state("coherent", 70, alpha=[alpha.real, alpha.imag]), spec))
    amp, n = paramp_predict(alpha, abs(alpha) ** 2, spec)
    assert abs(out.mean_amp - amp) < 1e-9
    assert out.mean_n == pytest.approx(n, rel=1e-9)
    # the idler amplitude enters conjugated and with a minus sign
    s = math.sqrt(1.3 ** 2 - 1)
    assert abs(amp - (1.3 * alpha - s * beta.conjugate())) < 1e-15


def test_outputs_are_states_and_the_map_is_linear():
    rng = np.random.default_rng(9)
    spec = ParampSpec(1.2, StateSpec.thermal(0.5), 24, 30)
    r1, r2 = random_state(24, rng), random_state(24, rng)
    o1, o2 = apply_paramp(r1, spec, tail_tol=1.0), apply_paramp(r2, spec, tail_tol=1.0)
    assert o1.min_eigenvalue() >= -1e-9
    assert abs(o1.trace() - 1) <= 1e-9
    mix = type(r1)(r1.space, 0.3 * r1.entries + 0.7 * r2.entries)
    om = apply_paramp(mix, spec, tail_tol=1.0)
    assert trace_distance(om, 0.3 * o1.entries + 0.7 * o2.entries) < 1e-12


def test_guard_and_dimension_checks():
    spec = ParampSpec(2.0, StateSpec.thermal(1.0), 20, 20)
    with pytest.raises(TruncationError):
        apply_paramp(make_state("fock", 20, n=1), spec)
    with pytest.raises(DomainError):
        apply_paramp(make_state("fock", 12, n=1), spec)


def test_suggest_dims_grow_with_gain():
    small = suggest_dims(1.2, 0.0, StateSpec.vacuum())
    big = suggest_dims(2.0, 1.0, StateSpec.thermal(1.0))
    assert big[0] > small[0] and big[1] > small[1]
