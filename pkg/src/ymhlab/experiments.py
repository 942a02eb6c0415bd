"""Reusable experiment drivers shared by the CLI and the acceptance suite."""

from dataclasses import dataclass

import numpy as np

from .donaldson import c0_l1_ratio, path_integral, psi_report
from .energy import grad_A, grad_u, ymh
from .errors import ConfigError
from .fiber import LinearC
from .flow import (FlowState, metric_initial, pair_record, reconstruct_pair, run_metric, run_pair,
                   sigma_distance, sigma_log)
from .gauge import (Section, constant_curvature_connection, constant_section,
                    holomorphic_project, zero_connection)
from .lattice import build_grid
from .rng import SplitMix64


def grid_from(cfg):
    return build_grid(cfg["grid.nx"], cfg["grid.ny"], cfg["grid.a"], cfg["grid.d"])


def initial_pair(grid, fiber, kind, c=0.0, seed=0, amplitude=1.0, link_noise=0.3):
    """Starting pair for a run.

    ``holomorphic``: constant-curvature connection and the projected
    holomorphic section scaled to ``L^2`` norm ``amplitude`` (linear fiber).
    ``random``: constant-curvature connection plus link noise and a random
    section.  ``minimum``: flat connection and a constant point with
    ``mu = c`` (degree 0 only).  ``constant``: flat connection, constant point
    of size ``amplitude``.
    """
    rng = SplitMix64(seed)
    if kind == "holomorphic":
        if fiber.name != "linear":
            raise ConfigError("holomorphic start needs the linear fiber")
        A = constant_curvature_connection(grid)
        u = holomorphic_project(A, seed=seed).section
        return A, u.with_sites(amplitude * u.sites)
    if kind == "random":
        A = constant_curvature_connection(grid)
        A = A.with_links(A.links + link_noise * rng.normal((2,) + grid.shape))
        return A, Section(grid, fiber, fiber.random_point(rng, grid.shape, amplitude))
    if grid.d != 0:
        raise ConfigError(f"init.kind={kind} needs grid.d = 0")
    if kind == "minimum":
        if fiber.name == "linear":
            if c < 0:
                raise ConfigError("no linear-fiber point has mu = c < 0")
            p = [np.sqrt(2.0 * c), 0.0]
        else:
            if abs(c) > 1:
                raise ConfigError("sphere moment map takes values in [-1, 1]")
            p = [np.sqrt(1 - c * c), 0.0, c]
        return zero_connection(grid), constant_section(grid, fiber, p)
    if kind == "constant":
        p = [amplitude, 0.0] if fiber.name == "linear" else fiber.retract(np.array([amplitude, 0.0, 1.0]))
        return zero_connection(grid), constant_section(grid, fiber, p)
    raise ConfigError(f"unknown init kind {kind!r}")


# -- gradient check --------------------------------------------------------

def gradient_check(A, u, c, rng, n_dirs=100, h=1e-5):
    """Max relative mismatch between centered finite differences and the gradients."""
    f = u.fiber
    g = A.grid
    E = lambda A_, u_: ymh(A_, u_, c).total
    gu = grad_u(A, u, c)
    gA = grad_A(A, u, c)
    worst_u = worst_a = 0.0
    for _ in range(n_dirs):
        V = f.random_tangent(rng, u.sites)
        plus = u.with_sites(f.retract(u.sites + h * V))
        minus = u.with_sites(f.retract(u.sites - h * V))
        fd = (E(A, plus) - E(A, minus)) / (2 * h)
        an = g.area * float(np.sum(gu * V))
        worst_u = max(worst_u, abs(fd - an) / max(abs(fd), abs(an), 1e-12))
        W = rng.normal(A.links.shape)
        fd = (E(A.with_links(A.links + h * W), u) - E(A.with_links(A.links - h * W), u)) / (2 * h)
        an = g.area * float(np.sum(gA * W))
        worst_a = max(worst_a, abs(fd - an) / max(abs(fd), abs(an), 1e-12))
    return worst_u, worst_a


# -- flow equivalence ------------------------------------------------------

GAUGE_OBSERVABLES = ("e1", "e2", "e3", "total", "sup_ehat")


def equivalence_mismatch(A0, u0, c, dt, t_end, scheme="rk4"):
    """Max relative gap of gauge-invariant observables at ``t_end`` between
    the direct pair flow and the reconstructed metric flow."""
    n = int(round(t_end / dt))
    pair = run_pair(FlowState(A0, u0), c, dt, t_end, monitors_every=10 ** 9, scheme=scheme,
                    conv_tol=0.0, track_dissipation=False)
    met = run_metric(metric_initial(A0, u0), c, dt, t_end, monitors_every=10 ** 9, scheme=scheme,
                     keep_every=n, stop_on_converge=False)
    rec = reconstruct_pair(met.trajectory)[-1]
    a = pair.records[-1]
    b = pair_record(rec.A, rec.u, c, rec.t)
    gaps = {}
    for k in GAUGE_OBSERVABLES:
        x, y = getattr(a, k), getattr(b, k)
        gaps[k] = abs(x - y) / max(abs(x), abs(y), 1e-300)
    return max(gaps.values()), gaps


def homogeneous_pair(grid, z0=3.0):
    return zero_connection(grid), constant_section(grid, LinearC(), [z0, 0.0])


# -- sigma ------------------------------------------------------------------

def random_sigma_pairs(rng, n=1000):
    """Worst-case checks of sigma on random scalar and 2x2 positive pairs."""
    h = np.exp(rng.normal((n,)) * 2)
    k = np.exp(rng.normal((n,)) * 2)
    s_field, _ = sigma_distance(h, k)
    s_self, _ = sigma_distance(h, h)
    s_swap, _ = sigma_distance(k, h)

    def spd(shape):
        m = rng.normal(shape + (2, 2))
        return m @ np.swapaxes(m, -1, -2) + 0.05 * np.eye(2)

    H, K = spd((n,)), spd((n,))
    m_field, _ = sigma_distance(H, K)
    m_self, _ = sigma_distance(H, H)
    m_swap, _ = sigma_distance(K, H)
    # eigenvalue brute force: sum over eigenvalues l of H^{-1}K of l + 1/l - 2
    lam = np.linalg.eigvals(np.linalg.solve(H, K)).real
    brute = np.sum(lam + 1 / lam - 2, axis=-1)
    return {
        "scalar_min": float(s_field.min()), "scalar_self_max": float(s_self.max()),
        "scalar_asym": float(np.max(np.abs(s_field - s_swap))),
        "matrix_min": float(m_field.min()), "matrix_self_max": float(m_self.max()),
        "matrix_asym": float(np.max(np.abs(m_field - m_swap))),
        "matrix_brute_gap": float(np.max(np.abs(brute - m_field) / (1 + np.abs(brute)))),
        "distinct_positive": bool(np.all(s_field[h != k] > 0) and np.all(m_field > 0)),
    }


def sigma_trajectories(A0, u0, c, s2, dt, t_end, scheme="euler"):
    """``sup sigma`` between the metric flows started at ``s = 0`` and ``s = s2``, per step."""
    r1 = run_metric(metric_initial(A0, u0), c, dt, t_end, monitors_every=10 ** 9, scheme=scheme,
                    keep_every=1, stop_on_converge=False)
    r2 = run_metric(metric_initial(A0, u0, s2), c, dt, t_end, monitors_every=10 ** 9,
                    scheme=scheme, keep_every=1, stop_on_converge=False)
    sups = np.array([sigma_log(a.s, b.s)[1] for a, b in zip(r1.trajectory, r2.trajectory)])
    return np.array([st.t for st in r1.trajectory]), sups


# -- Psi and the C0 probe --------------------------------------------------

@dataclass
class PsiCheck:
    report: object
    max_fd_mismatch: float
    samples_compared: int
    psi_max: float
    path_max_increase: float
    times: np.ndarray
    psi: np.ndarray
    rate: np.ndarray


def psi_identity_check(run, c, window=1e-6):
    """Centered difference of ``Psi`` against ``-4 int ehat`` on every step of ``run``.

    ``run`` must come from ``run_metric(..., track_psi=True)``.  Steps where
    ``4 int ehat`` falls below ``window * max(1, |Psi|)`` are skipped: there
    the change of ``Psi`` over one step is swamped by round-off in ``Psi``.
    """
    psi = np.asarray(run.psi)
    t = np.asarray(run.times)
    rate = -4.0 * np.asarray(run.int_ehat)
    fd = (psi[2:] - psi[:-2]) / (t[2:] - t[:-2])
    ref = rate[1:-1]
    keep = np.abs(ref) >= window * np.maximum(1.0, np.abs(psi[1:-1]))
    mism = np.abs(fd[keep] - ref[keep]) / np.abs(ref[keep])
    path = path_integral(t, run.int_ehat)
    return PsiCheck(psi_report(run, c), float(mism.max()) if mism.size else float("nan"),
                    int(keep.sum()), float(psi.max()),
                    float(np.max(np.diff(path))) if len(path) > 1 else 0.0, t, psi, rate)


def dichotomy_runs(grid, c_stable, c_unstable, dt, t_stable, t_unstable, conv_tol=1e-12,
                   scheme="euler", seed=0, keep_every=None):
    A0 = constant_curvature_connection(grid)
    u0 = holomorphic_project(A0, seed=seed).section
    stable = run_metric(metric_initial(A0, u0), c_stable, dt, t_stable, monitors_every=500,
                        scheme=scheme, conv_tol=conv_tol, keep_every=keep_every or 100)
    unstable = run_metric(metric_initial(A0, u0), c_unstable, dt, t_unstable, monitors_every=500,
                          scheme=scheme, conv_tol=conv_tol, keep_every=keep_every or 100)
    return A0, u0, stable, unstable


def c0_ratio_series(run):
    return np.array([c0_l1_ratio(st.s, st.A0.grid) for st in run.trajectory if np.any(st.s)])
