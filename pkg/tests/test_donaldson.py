import numpy as np
import pytest

from ymhlab.donaldson import (c0_l1_ratio, dichotomy_probe, path_integral, phi_kernel, psi_c,
                              theorem12_probe)
from ymhlab.errors import InconclusiveRun
from ymhlab.experiments import initial_pair
from ymhlab.fiber import LinearC
from ymhlab.flow import metric_initial, metric_residual, run_metric
from ymhlab.lattice import build_grid
from ymhlab.rng import SplitMix64


def test_phi_values():
    assert phi_kernel(0.0, 1.0) == pytest.approx(np.e - 2, abs=1e-12)
    assert phi_kernel(1.0, 0.0) == pytest.approx(np.exp(-1), abs=1e-12)
    assert phi_kernel(0.3, 0.3) == 0.5


def test_phi_series_is_continuous_at_switch():
    for d in (9.9e-5, 1.01e-4, -9.9e-5, -1.01e-4):
        exact = (np.expm1(d) - d) / d ** 2
        assert phi_kernel(0.0, d) == pytest.approx(exact, rel=1e-8)


def test_phi_vectorised():
    out = phi_kernel(np.zeros(3), np.array([0.0, 1.0, -1.0]))
    assert out.shape == (3,) and out[0] == 0.5


def test_psi_vanishes_at_base_metric():
    g = build_grid(8, 8, 0.5, 1)
    A, u = initial_pair(g, LinearC(), "random", seed=1)
    assert psi_c(g.zeros_site(), A, u, 0.7) == 0.0


def test_psi_gradient_is_twice_residual():
    g = build_grid(8, 8, 0.5, 1)
    A, u = initial_pair(g, LinearC(), "random", seed=2)
    rng = SplitMix64(3)
    s = 0.3 * rng.normal(g.shape)
    grad = 2 * metric_residual(s, A, u, 0.7)
    h = 1e-6
    for _ in range(10):
        v = rng.normal(g.shape)
        fd = (psi_c(s + h * v, A, u, 0.7) - psi_c(s - h * v, A, u, 0.7)) / (2 * h)
        an = g.area * np.sum(grad * v)
        assert fd == pytest.approx(an, rel=1e-6)


def test_c0_ratio_examples():
    g = build_grid(8, 8, 0.5)
    assert c0_l1_ratio(np.full(g.shape, 2.5), g) == pytest.approx(1 / 16)
    spike = g.zeros_site()
    spike[3, 4] = -7.0
    assert c0_l1_ratio(spike, g) == pytest.approx(1 / g.area)
    assert c0_l1_ratio(g.zeros_site(), g) == 0.0


def test_path_integral_trapezoid():
    t = np.array([0.0, 1.0, 3.0])
    f = np.array([1.0, 3.0, 1.0])
    assert np.allclose(path_integral(t, f), [0.0, -8.0, -24.0])


def test_psi_decreases_along_flow():
    g = build_grid(8, 8, 0.5, 1)
    A, u = initial_pair(g, LinearC(), "holomorphic")
    run = run_metric(metric_initial(A, u), 1.0, 0.01, 2.0, track_psi=True)
    assert run.psi[0] == 0.0
    assert np.all(np.diff(run.psi) <= 1e-14) and run.psi.max() <= 0.0


def test_start_at_minimum_keeps_s_zero():
    g = build_grid(8, 8, 0.5, 0)
    A, u = initial_pair(g, LinearC(), "constant", amplitude=1.3)
    c = 0.5 * 1.3 ** 2
    run = run_metric(metric_initial(A, u), c, 0.01, 2.0, stop_on_converge=False)
    assert np.max(np.abs(run.final.s)) < 1e-14


def test_probe_inconclusive_when_unstable_run_is_bounded():
    g = build_grid(8, 8, 0.5, 1)
    A, u = initial_pair(g, LinearC(), "holomorphic")
    run = run_metric(metric_initial(A, u), 1.0, 0.01, 1.0, keep_every=10)
    with pytest.raises(InconclusiveRun):
        dichotomy_probe(run, run)
    assert theorem12_probe is dichotomy_probe
