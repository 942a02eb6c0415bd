"""Abelian stability test: threshold, two-character total degree, and the scan."""

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence, Undetermined, YMHError
from .fiber import LinearC
from .flow import FlowState, metric_initial, run_metric, run_pair
from .gauge import (Section, constant_curvature_connection, degree, holomorphic_project)

SCAN_FIELDS = ("c", "threshold", "predicted", "observed", "residual_at_end", "T_plus", "T_minus")


def bradlow_threshold(d, vol):
    if not vol > 0:
        raise ValueError(f"volume must be positive, got {vol}")
    return 2.0 * np.pi * d / vol


def total_degree_abelian(A, u, chi_sign, c, **weight_kw):
    """``T(chi) = chi (2 pi deg - c Vol) + int lambda(u(x); chi)``.

    ``chi = +1`` expands the linear fiber, so any nonzero value of ``u``
    contributes ``+inf``; ``chi = -1`` contracts it and every weight is 0.
    An undetermined weight raises :class:`Undetermined`.
    """
    if chi_sign not in (1, -1):
        raise ValueError("chi_sign must be +1 or -1")
    g = A.grid
    deg = degree(A)
    lam = u.fiber.maximal_weight(u.sites, float(chi_sign), **weight_kw)
    lam = np.asarray(lam, dtype=float)
    base = chi_sign * (2.0 * np.pi * deg - c * g.volume)
    if np.any(np.isinf(lam)):
        return float("inf")
    return float(base + g.area * np.sum(lam))


@dataclass
class StabilityVerdict:
    c_value: float
    threshold: float
    predicted: str
    observed: str
    residual_at_end: float
    t_plus: float = float("nan")
    t_minus: float = float("nan")
    note: str = ""

    def row(self):
        return [self.c_value, self.threshold, self.predicted, self.observed,
                self.residual_at_end, self.t_plus, self.t_minus]

    @property
    def agrees(self):
        return (self.predicted, self.observed) in (("Stable", "Converged"), ("Unstable", "Obstructed"))


@dataclass
class ScanConfig:
    dt: float = 0.003
    t_end: float = 100.0
    conv_tol: float = 1e-10
    scheme: str = "euler"
    cfl_kappa: float = 0.2
    flow: str = "metric"
    seed: int = 0
    plateau_window: float = 0.1
    plateau_rtol: float = 1e-6
    extra: dict = field(default_factory=dict)


def predict(A, u, c, conv_tol):
    g = A.grid
    thr = bradlow_threshold(degree(A), g.volume)
    try:
        tp = total_degree_abelian(A, u, 1, c)
        tm = total_degree_abelian(A, u, -1, c)
    except Undetermined:
        return thr, "Inconclusive", float("nan"), float("nan")
    if abs(c - thr) * g.volume <= 10 * conv_tol:
        return thr, "Critical", tp, tm
    return thr, ("Stable" if tp > 0 and tm > 0 else "Unstable"), tp, tm


def classify(sup_ehat, converged, conv_tol, window=0.1, rtol=1e-6):
    """``Converged``, ``Obstructed`` (plateau above ``10 conv_tol``) or ``Inconclusive``."""
    if converged:
        return "Converged"
    s = np.asarray(sup_ehat, dtype=float)
    k = min(len(s) - 1, int(len(s) * (1 - window)))
    tail = s[k:]
    if len(tail) >= 2 and tail[-1] > 10 * conv_tol:
        if (tail.max() - tail.min()) <= rtol * tail.max():
            return "Obstructed"
    return "Inconclusive"


def initial_section(A, seed=0):
    """Holomorphic unit section, or the zero section if none exists."""
    try:
        return holomorphic_project(A, seed=seed).section
    except NonConvergence:
        return Section(A.grid, LinearC(), A.grid.zeros_site(2))


def scan_one(grid, c, cfg, A0=None, u0=None):
    A0 = constant_curvature_connection(grid) if A0 is None else A0
    u0 = initial_section(A0, cfg.seed) if u0 is None else u0
    thr, pred, tp, tm = predict(A0, u0, c, cfg.conv_tol)
    try:
        if cfg.flow == "metric":
            run = run_metric(metric_initial(A0, u0), c, cfg.dt, cfg.t_end, monitors_every=10 ** 9,
                             scheme=cfg.scheme, conv_tol=cfg.conv_tol, cfl_kappa=cfg.cfl_kappa)
        else:
            run = run_pair(FlowState(A0, u0), c, cfg.dt, cfg.t_end, monitors_every=10 ** 9,
                           scheme=cfg.scheme, conv_tol=cfg.conv_tol, cfl_kappa=cfg.cfl_kappa,
                           track_dissipation=False)
    except YMHError as exc:
        return StabilityVerdict(c, thr, pred, "Inconclusive", float("nan"), tp, tm, exc.reason)
    obs = classify(run.sup_ehat, run.converged, cfg.conv_tol, cfg.plateau_window, cfg.plateau_rtol)
    note = run.status if run.status == "blowup" else ""
    return StabilityVerdict(c, thr, pred, obs, run.records[-1].l2_residual, tp, tm, note)


def _scan_task(args):
    grid, c, cfg = args
    return scan_one(grid, c, cfg)


def stability_scan(d, grid, c_values, flow_config=None, jobs=1):
    """One verdict per ``c``, in input order; per-run failures land in the verdict."""
    cfg = flow_config or ScanConfig()
    if grid.d != d:
        raise ValueError(f"grid twist {grid.d} does not match d={d}")
    cs = [float(c) for c in c_values]
    if not all(np.isfinite(cs)):
        raise ValueError("c values must be finite")
    if not cs:
        return []
    tasks = [(grid, c, cfg) for c in cs]
    if jobs > 1 and len(cs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_scan_task, tasks))
    A0 = constant_curvature_connection(grid)
    u0 = initial_section(A0, cfg.seed)
    return [scan_one(grid, c, cfg, A0, u0) for c in cs]


def write_scan_csv(path, verdicts):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCAN_FIELDS)
        for v in verdicts:
            w.writerow([repr(x) if isinstance(x, float) else x for x in v.row()])
