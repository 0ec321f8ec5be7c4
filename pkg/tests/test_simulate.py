import math

import numpy as np
import pytest

from conftest import X0, Z0, tail_amplitude
from sdobs.baselines import simulate_zoh
from sdobs.design import ContinuousObserver, design_highgain
from sdobs.errors import InvalidDiameter, NonFiniteState, StepTooLarge
from sdobs.integrate import integrate_segment, substeps
from sdobs.linalg import expm
from sdobs.plants import double_integrator, sin_triangular
from sdobs.simulate import (
    NoiseSignal,
    PerturbationSource,
    generate_schedule,
    simulate_sampled_data,
)

LN2 = math.log(2.0)


class TestSchedule:
    def test_uniform_partition(self):
        s = generate_schedule(0.081, t_end=1.0)
        assert len(s.gaps) == 13
        np.testing.assert_allclose(s.instants, 0.081 * np.arange(14), atol=1e-14)
        assert s.instants[-1] >= 1.0

    def test_constant_perturbation(self):
        s = generate_schedule(1.0, PerturbationSource("constant", value=LN2), t_end=3.0)
        np.testing.assert_allclose(s.gaps, 0.5, atol=1e-15)

    def test_random_gaps_in_range(self):
        s = generate_schedule(0.081, PerturbationSource("uniform", d_max=LN2, seed=42), t_end=20.0)
        assert np.all(s.gaps >= 0.0405 - 1e-15) and np.all(s.gaps <= 0.081)
        np.testing.assert_allclose(s.gaps, 0.081 * np.exp(-s.d), rtol=1e-12)

    def test_seeded_determinism(self):
        src = PerturbationSource("uniform", d_max=1.0, seed=7)
        a = generate_schedule(0.1, src, 5.0)
        b = generate_schedule(0.1, src, 5.0)
        np.testing.assert_array_equal(a.instants, b.instants)

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_invalid_diameter(self, r):
        with pytest.raises(InvalidDiameter):
            generate_schedule(r, t_end=1.0)


class TestIntegrator:
    def test_exponential_decay(self):
        _, ys = integrate_segment(lambda t, y: -y, [1.0], 0.0, 1.0, 0.01)
        assert ys[-1, 0] == pytest.approx(math.exp(-1), abs=1e-9)

    def test_zero_rate(self):
        _, ys = integrate_segment(lambda t, y: np.zeros_like(y), [1.0, 2.0], 0.0, 3.0, 0.1)
        np.testing.assert_array_equal(ys[-1], [1.0, 2.0])

    def test_lands_on_endpoint(self):
        ts, _ = integrate_segment(lambda t, y: -y, [1.0], 0.0, 0.0815, 0.01)
        assert ts[-1] == 0.0815
        assert sum(substeps(0.0, 0.0815, 0.01)) == pytest.approx(0.0815, abs=1e-16)

    def test_fourth_order(self):
        a = np.array([[0.0, 1.0], [-4.0, 0.0]])
        exact = expm(a, 2.0) @ np.array([0.0, 2.0])
        errs = []
        for h in (0.04, 0.02, 0.01):
            _, ys = integrate_segment(lambda t, y: a @ y, [0.0, 2.0], 0.0, 2.0, h)
            errs.append(np.abs(ys[-1] - exact).max())
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 3.9

    def test_divergence_reported(self):
        with pytest.raises(NonFiniteState) as exc:
            integrate_segment(lambda t, y: 50 * y, [1.0], 0.0, 10.0, 0.01)
        assert exc.value.partial is not None


class TestSampledData:
    def test_fig4_converges(self, osc, osc_ref_design):
        sch = generate_schedule(0.081, t_end=30.0)
        tr = simulate_sampled_data(osc, osc_ref_design.observer, sch, NoiseSignal(), X0, Z0, 0.0, t_end=30.0)
        assert tail_amplitude(tr.times, tr.error[:, 1], 25.0) < 1e-3

    def test_fig6_converges(self, osc, osc_ref_design):
        sch = generate_schedule(0.45, t_end=30.0)
        tr = simulate_sampled_data(osc, osc_ref_design.observer, sch, NoiseSignal(), X0, Z0, 0.0, t_end=30.0)
        assert tail_amplitude(tr.times, tr.error[:, 1], 25.0) < 0.02

    def test_exact_init(self, osc, osc_ref_design):
        sch = generate_schedule(0.081, t_end=30.0)
        step = 1e-3
        tr = simulate_sampled_data(osc, osc_ref_design.observer, sch, NoiseSignal(), X0, X0, osc.h(X0), step=step, t_end=30.0)
        assert np.abs(tr.error).max() <= 10 * step**4 * 30

    def test_jump_rule_with_noise(self, osc, osc_ref_design):
        sch = generate_schedule(0.081, t_end=5.0)
        v = NoiseSignal("uniform", bound=0.05, seed=9)
        tr = simulate_sampled_data(osc, osc_ref_design.observer, sch, v, X0, Z0, 0.0, t_end=5.0)
        inside = sch.instants[(sch.instants > 0) & (sch.instants <= 5.0)]
        assert len(tr.jumps) == len(inside)
        for jr in tr.jumps:
            j = int(np.searchsorted(tr.times, jr.tau))
            assert tr.times[j] == jr.tau and tr.is_jump[j]
            assert jr.w_after == jr.y + jr.v and jr.y == osc.h(tr.x[j])
            assert jr.w_after - osc.h(tr.x[j]) == pytest.approx(jr.v, abs=1e-15)
            assert jr.v == v.sample(jr.i)
            assert tr.w[j] == jr.w_after

    def test_w_continuous_between_samples(self, osc, osc_ref_design):
        sch = generate_schedule(0.081, t_end=2.0)
        tr = simulate_sampled_data(osc, osc_ref_design.observer, sch, NoiseSignal("constant", level=0.3), X0, Z0, 0.0, t_end=2.0)
        dw = np.abs(np.diff(tr.w))
        jump_rows = np.nonzero(tr.is_jump)[0]
        smooth = np.ones(len(dw), dtype=bool)
        smooth[jump_rows - 1] = False
        assert dw[smooth].max() < 0.01  # |w'| <= |c'A z| is O(1), step 1e-3

    def test_stale_reset_uses_previous_sample(self, osc, osc_ref_design):
        sch = generate_schedule(0.081, t_end=1.0)
        tr = simulate_sampled_data(osc, osc_ref_design.observer, sch, NoiseSignal(), X0, Z0, 0.0, t_end=1.0, stale_reset=True)
        ys = [osc.h(X0)] + [jr.y for jr in tr.jumps]
        for idx, jr in enumerate(tr.jumps):
            assert jr.w_after == ys[idx]

    def test_step_too_large(self, osc, osc_ref_design):
        sch = generate_schedule(0.081, t_end=1.0)
        with pytest.raises(StepTooLarge):
            simulate_sampled_data(osc, osc_ref_design.observer, sch, NoiseSignal(), X0, Z0, 0.0, step=0.1, t_end=1.0)

    def test_divergence_partial(self, osc):
        bad = ContinuousObserver(dim=2, F=lambda z, y: 5.0 * z, psi=lambda z: z, predictor_rate=lambda z: 0.0)
        sch = generate_schedule(0.1, t_end=20.0)
        with pytest.raises(NonFiniteState) as exc:
            simulate_sampled_data(osc, bad, sch, NoiseSignal(), X0, Z0, 0.0, t_end=20.0)
        partial = exc.value.partial
        assert partial.diverged and partial.times[-1] < 20.0

    def test_bit_reproducible(self, osc, osc_ref_design, tmp_path):
        sch = generate_schedule(0.081, PerturbationSource("uniform", d_max=LN2, seed=1), t_end=5.0)
        v = NoiseSignal("uniform", bound=0.01, seed=2)
        paths = []
        for run in range(2):
            tr = simulate_sampled_data(osc, osc_ref_design.observer, sch, v, X0, Z0, 0.0, t_end=5.0)
            p = tmp_path / f"t{run}.csv"
            tr.write_csv(p, stride=3)
            tr.write_jumps_csv(tmp_path / f"j{run}.csv")
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()
        assert (tmp_path / "j0.csv").read_bytes() == (tmp_path / "j1.csv").read_bytes()
        header = paths[0].read_text().splitlines()[0]
        assert header == "t,x1,x2,z1,z2,w,e1,e2,is_jump"
        assert (tmp_path / "j0.csv").read_text().splitlines()[0] == "i,tau_i,gap,d_i,y,v,w_before,w_after"

    def test_zoh_is_frozen_predictor(self, osc, osc_ref_design):
        sch = generate_schedule(0.081, t_end=5.0)
        a = simulate_zoh(osc, osc_ref_design.observer, sch, NoiseSignal(), X0, Z0, t_end=5.0)
        b = simulate_sampled_data(osc, osc_ref_design.observer, sch, NoiseSignal(), X0, Z0, osc.h(X0), t_end=5.0, predictor=False)
        assert np.abs(np.hstack([a.x, a.z]) - np.hstack([b.x, b.z])).max() <= 1e-12

    def test_order_on_hybrid_run(self, osc, osc_ref_design):
        sch = generate_schedule(0.1, t_end=2.0)
        finals = []
        for step in (0.01, 0.005, 0.0025, 0.00125):
            tr = simulate_sampled_data(osc, osc_ref_design.observer, sch, NoiseSignal(), X0, Z0, 0.0, step=step, t_end=2.0)
            finals.append(np.concatenate([tr.x[-1], tr.z[-1]]))
        d1 = np.abs(finals[0] - finals[1]).max()
        d2 = np.abs(finals[1] - finals[2]).max()
        assert math.log2(d1 / d2) >= 3.5


class TestCertifiedConvergence:
    """Schedules inside the certificate converge, with and without perturbation."""

    @pytest.mark.parametrize("d", [PerturbationSource(), PerturbationSource("uniform", d_max=LN2, seed=4)])
    def test_linear_oscillator(self, osc, osc_ref_design, d):
        r = 0.9 * osc_ref_design.r_max
        horizon = 40.0 / osc_ref_design.mu
        sch = generate_schedule(r, d, t_end=horizon)
        tr = simulate_sampled_data(osc, osc_ref_design.observer, sch, NoiseSignal(), X0, Z0, 0.0, t_end=horizon)
        tail = tr.times >= 0.8 * horizon
        assert np.linalg.norm(tr.error[tail], axis=1).max() <= 1e-3 * (np.linalg.norm(X0) + np.linalg.norm(Z0))

    def test_highgain_double_integrator(self):
        plant = double_integrator()
        d = design_highgain(plant, [-1, -1], 1.0)
        r = 0.9 * d.r_max
        horizon = 40.0 / d.mu
        sch = generate_schedule(r, t_end=horizon)
        x0, z0 = np.array([1.0, -0.5]), np.array([0.0, 0.0])
        tr = simulate_sampled_data(plant, d.observer, sch, NoiseSignal(), x0, z0, 0.0, t_end=horizon)
        tail = tr.times >= 0.8 * horizon
        assert np.linalg.norm(tr.error[tail], axis=1).max() <= 1e-3 * (np.linalg.norm(x0) + np.linalg.norm(z0))

    def test_highgain_exact_init(self):
        plant = sin_triangular()
        d = design_highgain(plant, [-2, -2], 1.0)
        sch = generate_schedule(0.05, t_end=10.0)
        x0 = np.array([0.5, -1.0])
        tr = simulate_sampled_data(plant, d.observer, sch, NoiseSignal(), x0, x0, plant.h(x0), t_end=10.0)
        assert np.abs(tr.error).max() <= 1e-8


class TestNoiseGain:
    def test_constant_noise(self, osc, osc_ref_design):
        tails = []
        for vbar in (0.05, 0.1):
            sch = generate_schedule(0.081, t_end=30.0)
            tr = simulate_sampled_data(osc, osc_ref_design.observer, sch, NoiseSignal("constant", level=vbar), X0, Z0, 0.0, t_end=30.0)
            tail = np.linalg.norm(tr.error[tr.times >= 22.5], axis=1).max()
            assert tail <= osc_ref_design.iss_gain * vbar * 1.1
            tails.append(tail)
        assert tails[1] <= 2 * tails[0] * 1.1
