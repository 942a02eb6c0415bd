import numpy as np
import pytest

from ymhlab.gauge import holomorphic_residual
from ymhlab.kahler import (EXACT_FLOOR, LABELS, RefinementStudy, holomorphic_orbit_data,
                           identity_residuals, observed_orders, refinement_study,
                           smooth_connection, smooth_section)
from ymhlab.lattice import build_grid


@pytest.fixture(scope="module")
def study():
    return refinement_study((8, 16, 32, 64))


def test_manufactured_data_respects_degree():
    from ymhlab.gauge import degree

    g = build_grid(16, 16, 0.25, 1)
    assert degree(smooth_connection(g)) == 1
    # seam rule: u(x + L) = exp(2 pi i d y / L) u(x) is built into the data
    u = smooth_section(g)
    assert np.all(np.isfinite(u.sites))


def test_holomorphic_orbit_data_is_second_order():
    res = []
    for n in (16, 32):
        g = build_grid(n, n, 4.0 / n, 0)
        A, u = holomorphic_orbit_data(g)
        res.append(holomorphic_residual(A, u, centered=True))
    assert np.log2(res[0] / res[1]) > 1.9


def test_refinement_orders(study):
    ok = study.passed()
    assert set(ok) == set(LABELS)
    assert all(ok.values()), study.table()


def test_forward_residuals_decay_at_first_order(study):
    for k in ("curvature_codifferential", "moment_holomorphic", "weitzenboeck"):
        assert round(study.orders_forward[k][-1], 1) >= 1.0
        assert round(study.orders_centered[k][-1], 1) >= 1.9


def test_exact_identities_sit_at_roundoff(study):
    for k in ("action_moment", "action_adjoint"):
        assert max(study.forward[k]) <= EXACT_FLOOR
    assert max(study.centered["laplacian_split"]) <= EXACT_FLOOR


def test_passed_rule():
    fake = RefinementStudy((8, 16, 32), {"x": [0.4, 0.2, 0.1]}, {"x": [0.4, 0.1, 0.026]},
                           {"x": observed_orders([0.4, 0.2, 0.1])},
                           {"x": observed_orders([0.4, 0.1, 0.026])})
    assert fake.passed() == {"x": True}
    stalled = RefinementStudy((8, 16, 32), {"x": [0.4, 0.2, 0.2]}, {"x": [1e-13] * 3},
                              {"x": observed_orders([0.4, 0.2, 0.2])},
                              {"x": observed_orders([1e-13] * 3)})
    assert stalled.passed() == {"x": False}


def test_identity_report_labels():
    g = build_grid(8, 8, 0.5, 1)
    rep = identity_residuals(smooth_connection(g), smooth_section(g))
    assert set(rep.residuals) == set(LABELS)
    assert rep["weitzenboeck"] == rep.residuals["weitzenboeck"]
    assert rep.dbar_norm > 0
