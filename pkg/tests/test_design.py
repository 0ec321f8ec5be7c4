import math

import numpy as np
import pytest

from sdobs.baselines import simulate_continuous
from sdobs.design import (
    design_highgain,
    design_linear,
    max_sampling_period,
    mismatch_constant,
    verify_dissipation,
)
from sdobs.errors import DissipationFailed, NotHurwitz, ThetaTooSmall, WrongPlantKind
from sdobs.plants import double_integrator, make_linear_plant, oscillator_preset, sin_triangular
from sdobs.simulate import NoiseSignal

P_REF = 0.5 * np.array([[5.0, -2.0], [-2.0, 1.0]])
A_OSC = np.array([[0.0, 1.0], [-4.0, 0.0]])
C = np.array([1.0, 0.0])
K_REF = np.array([-4.0, 0.0])
K1_REF = (3 - 2 * math.sqrt(2)) / 2


@pytest.fixture(scope="module")
def osc_design():
    return design_linear(oscillator_preset(), K_REF, mu=1.0, gamma=64 / 3, P=P_REF)


def leading_minors_nsd(m):
    """Negative semidefinite iff all principal minors of -m are non-negative (3x3 here)."""
    neg = -m
    import itertools

    n = neg.shape[0]
    for size in range(1, n + 1):
        for idx in itertools.combinations(range(n), size):
            if np.linalg.det(neg[np.ix_(idx, idx)]) < -1e-9:
                return False
    return True


class TestDissipation:
    def test_reference_constants_hold(self):
        m = np.array([[-7, 2.5, -10], [2.5, -1, 4], [-10, 4, -64 / 3]])
        assert leading_minors_nsd(m)
        assert verify_dissipation(P_REF, A_OSC, K_REF, C, 1.0, 64 / 3)

    def test_gamma_ten_fails(self):
        m = np.array([[-7, 2.5, -10], [2.5, -1, 4], [-10, 4, -10]])
        assert not leading_minors_nsd(m)
        assert not verify_dissipation(P_REF, A_OSC, K_REF, C, 1.0, 10.0)

    def test_threshold_sixteen(self):
        # Schur complement of the 3x3 form gives gamma >= 16 exactly
        assert verify_dissipation(P_REF, A_OSC, K_REF, C, 1.0, 16.0 + 1e-6)
        assert not verify_dissipation(P_REF, A_OSC, K_REF, C, 1.0, 16.0 - 1e-3)

    def test_trivial(self):
        assert verify_dissipation(np.eye(2), -np.eye(2), np.zeros(2), C, 0.5, 1.0)


class TestLinearDesign:
    def test_reference_certificate(self, osc_design):
        assert 0.089 <= osc_design.r_max <= 0.0898
        assert osc_design.K1 == pytest.approx(K1_REF, rel=1e-12)
        want = math.sqrt(2 * K1_REF * 3 / 64)
        assert osc_design.r_max == pytest.approx(want, rel=1e-12)
        assert osc_design.K == pytest.approx(11.15, abs=0.01)
        assert osc_design.r_max * osc_design.K == pytest.approx(1.0, rel=1e-15)

    def test_dissipation_failure(self):
        with pytest.raises(DissipationFailed):
            design_linear(oscillator_preset(), K_REF, mu=1.0, gamma=10.0, P=P_REF)

    def test_zero_gain_not_hurwitz(self):
        with pytest.raises(NotHurwitz):
            design_linear(oscillator_preset(), [0.0, 0.0], mu=1.0, gamma=64 / 3, P=P_REF)

    def test_gamma_scaling(self, osc_design):
        d4 = design_linear(oscillator_preset(), K_REF, mu=1.0, gamma=4 * 64 / 3, P=P_REF)
        assert max_sampling_period(d4) == pytest.approx(max_sampling_period(osc_design) / 2, rel=1e-12)
        assert mismatch_constant(d4) == pytest.approx(2 * mismatch_constant(osc_design), rel=1e-12)

    def test_reference_q_reproduces_p(self):
        from sdobs.linalg import solve_lyapunov

        P = solve_lyapunov(A_OSC + np.outer(K_REF, C), [[12, -4.5], [-4.5, 2]])
        np.testing.assert_allclose(P, P_REF, atol=1e-12)

    def test_automatic_constants(self):
        d = design_linear(oscillator_preset(), K_REF)
        assert d.mu > 0 and d.gamma > 0
        assert verify_dissipation(d.P, A_OSC, K_REF, C, d.mu, d.gamma)
        # gamma is minimal to the bisection tolerance
        assert not verify_dissipation(d.P, A_OSC, K_REF, C, d.mu, d.gamma * (1 - 1e-5))

    def test_unbounded_when_output_rate_vanishes(self):
        # c'A = 0: the output is constant along the flow, so prediction is exact
        plant = make_linear_plant([[0.0, 0.0], [0.0, -1.0]], [1.0, 0.0])
        d = design_linear(plant, [-1.0, 0.0])
        assert d.K == 0.0 and math.isinf(d.r_max)
        assert d.report()["r_max"] == "unbounded"

    def test_wrong_plant(self):
        with pytest.raises(WrongPlantKind):
            design_linear(sin_triangular(), [-1, -1])

    def test_iss_estimate_along_noisy_run(self, osc_design):
        plant = oscillator_preset()
        vbar = 0.1
        noise = NoiseSignal(kind="uniform", bound=vbar, seed=3, hold=0.05)
        x0, z0 = np.array([0.0, 2.0]), np.array([1.0, 1.0])
        tr = simulate_continuous(plant, osc_design.observer, noise, x0, z0, 1e-3, 10.0)
        err = np.linalg.norm(tr.error, axis=1)
        bound = (
            np.exp(-osc_design.mu * tr.times) * math.sqrt(osc_design.K2 / osc_design.K1) * np.linalg.norm(z0 - x0)
            + osc_design.iss_gain * vbar
        )
        assert np.all(err <= bound * (1 + 1e-3))


class TestHighGain:
    def test_double_integrator(self):
        d = design_highgain(double_integrator(), [-1, -1], 1.0)
        np.testing.assert_allclose(d.k, [-2.0, -1.0], atol=1e-12)
        assert d.theta == 1.0
        # independent recomputation of the whole pipeline with scipy
        import scipy.linalg as sla

        acl = np.array([[-2.0, 1.0], [-1.0, 0.0]])
        P = sla.solve_continuous_lyapunov(acl.T, -2 * np.eye(2))
        ev = np.linalg.eigvalsh(P)
        K = 2 * (0 + 1) * np.linalg.norm(P, 2) * np.linalg.norm([-2, -1]) * math.sqrt(ev[-1] / ev[0])
        assert d.r_max == pytest.approx(1 / K, rel=1e-10)
        assert max_sampling_period(d) == d.r_max

    def test_theta_override_too_small(self):
        with pytest.raises(ThetaTooSmall):
            design_highgain(double_integrator(), [-1, -1], 1.0, theta_override=0.5)

    def test_sin_lyapunov_inequality(self):
        d = design_highgain(sin_triangular(), [-2, -2], 1.0)
        acl = np.eye(2, k=1) + np.outer(d.k, [1.0, 0.0])
        m = d.P @ acl + acl.T @ d.P + 2 * d.mu * np.eye(2)
        assert np.linalg.eigvalsh(m).max() <= 1e-9
        assert d.theta == pytest.approx(max(1.0, 2 * np.linalg.norm(d.P, 2) * 1.0 * math.sqrt(2) / d.mu), rel=1e-12)

    def test_mismatch_increases_with_theta(self):
        base = design_highgain(sin_triangular(), [-2, -2], 1.0)
        Ks = [design_highgain(sin_triangular(), [-2, -2], 1.0, theta_override=base.theta * s).K for s in (1, 1.5, 2, 4)]
        assert all(a < b for a, b in zip(Ks, Ks[1:]))
        assert base.K * base.r_max == pytest.approx(1.0, rel=1e-15)

    def test_wrong_kind(self):
        with pytest.raises(WrongPlantKind):
            design_highgain(oscillator_preset(), [-1, -1], 1.0)

    def test_lyapunov_decay_sin(self):
        d = design_highgain(sin_triangular(), [-2, -2], 1.0)
        tr = simulate_continuous(sin_triangular(), d.observer, None, [0.0, 2.0], [1.0, 1.0], 1e-3, 5.0)
        V = np.array([d.lyapunov_value(e) for e in tr.error])
        assert np.all(V <= V[0] * np.exp(-d.decay_rate * tr.times) * (1 + 1e-3))


def test_rmax_decreases_in_lipschitz_and_gain():
    from sdobs.design import highgain_mismatch

    d = design_highgain(double_integrator(), [-1, -1], 1.0)
    base = highgain_mismatch(0.0, 2.0, d.P, d.k, 1.0)
    assert highgain_mismatch(0.5, 2.0, d.P, d.k, 1.0) > base
    assert highgain_mismatch(0.0, 2.0, d.P, 2 * d.k, 1.0) > base


def test_oscillator_default_q_recovers_reference_p():
    d = design_linear(oscillator_preset(), K_REF, mu=1.0, gamma=64 / 3)
    np.testing.assert_allclose(d.P, P_REF, atol=1e-12)
    assert d.r_max == pytest.approx(math.sqrt(2 * K1_REF * 3 / 64), rel=1e-10)
