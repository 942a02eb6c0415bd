"""Modified Donaldson functional for the abelian linear-fiber case."""

from dataclasses import dataclass

import numpy as np

from .gauge import curvature
from .lattice import shift

L1_FLOOR = 1e-30


def phi_kernel(l1, l2):
    """``(e^D - D - 1) / D^2`` with ``D = l2 - l1``; series near ``D = 0``."""
    d = np.asarray(l2, dtype=float) - np.asarray(l1, dtype=float)
    small = np.abs(d) < 1e-4
    safe = np.where(small, 1.0, d)
    direct = (np.expm1(safe) - safe) / (safe * safe)
    series = 0.5 + d / 6.0 + d * d / 24.0 + d ** 3 / 120.0
    out = np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


def psi_c(s, A0, u0, c):
    """``Psi^c(exp s)`` relative to the base metric.

    Closed form ``int 2 (B_0 - c) s + 2 mu(u_0)(e^s - 1) + |grad s|^2 / 2``
    (forward differences).  Its ``L^2`` gradient is exactly twice the vortex
    residual of ``exp(s/2) . (A_0, u_0)``, so along ``s' = -2 R`` the
    derivative is ``-4 int ehat``.
    """
    g = A0.grid
    s = np.asarray(s, dtype=float)
    B0 = curvature(A0)
    m0 = u0.fiber.moment_map(u0.sites)
    grad2 = sum((shift(s, mu) - s) ** 2 for mu in (0, 1)) / g.area
    dens = 2.0 * (B0 - c) * s + 2.0 * m0 * np.expm1(s) + 0.5 * grad2
    return float(g.area * np.sum(dens))


def c0_l1_ratio(s, grid):
    s = np.asarray(s, dtype=float)
    l1 = grid.area * float(np.sum(np.abs(s)))
    return float(np.max(np.abs(s))) / max(l1, L1_FLOOR)


@dataclass
class PsiReport:
    psi_closed_form: float
    psi_path_integral: float
    mismatch: float
    sup_s: float
    l1_s: float

    def as_dict(self):
        return dict(self.__dict__)


def path_integral(times, int_ehat):
    """``-4 int_0^t int ehat`` by the trapezoid rule, one value per sample."""
    t = np.asarray(times, dtype=float)
    f = np.asarray(int_ehat, dtype=float)
    inc = 0.5 * np.diff(t) * (f[1:] + f[:-1])
    return -4.0 * np.concatenate([[0.0], np.cumsum(inc)])


def psi_report(run, c):
    st = run.final
    closed = psi_c(st.s, st.A0, st.u0, c)
    path = float(path_integral(run.times, run.int_ehat)[-1])
    g = st.A0.grid
    return PsiReport(closed, path, abs(closed - path) / max(abs(closed), 1e-300),
                     float(np.max(np.abs(st.s))), g.area * float(np.sum(np.abs(st.s))))


@dataclass
class DichotomyReport:
    stable_bound: float
    unstable_final: float
    unstable_ratio: float
    crossing_time: float
    empirical_cb: float
    stable_bounded: bool
    unstable_diverges: bool

    def as_dict(self):
        return dict(self.__dict__)


def dichotomy_probe(stable_run, unstable_run, factor=10.0, tail=0.2):
    """Bounded ``sup|s|`` on the stable run versus unbounded growth on the unstable one.

    The stable run counts as bounded when ``sup|s|`` moved by less than
    1% of its value over the last ``tail`` fraction of samples, or the run
    converged.  The unstable run must exceed ``factor`` times that bound.
    """
    from .errors import InconclusiveRun

    ss = np.asarray(stable_run.sup_s)
    bound = float(np.max(ss))
    k = max(1, int(len(ss) * (1 - tail)))
    settled = stable_run.converged or (np.max(ss[k:]) - np.min(ss[k:]) <= 0.01 * max(bound, 1e-12))
    us = np.asarray(unstable_run.sup_s)
    above = np.nonzero(us > factor * bound)[0]
    diverges = above.size > 0
    if not (settled and diverges):
        raise InconclusiveRun(f"stable settled={settled}, unstable exceeded {factor}x bound={diverges}")
    ratios = [c0_l1_ratio(st.s, st.A0.grid) for st in (stable_run.trajectory or [stable_run.final])
              if np.any(st.s)]
    cb = float(max(ratios)) if ratios else 0.0
    return DichotomyReport(bound, float(us[-1]), float(us[-1] / max(bound, 1e-300)),
                           float(unstable_run.times[above[0]]), cb, bool(settled), bool(diverges))


# name used by the operation contract
theorem12_probe = dichotomy_probe
