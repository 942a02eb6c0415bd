"""Pair flow, Hermitian-metric flow, gauge reconstruction and monitors.

Time is normalised so the pair flow is ``u' = -E_u``, ``A' = -E_A`` with
``E_u, E_A`` the Euler-Lagrange operators, i.e. one half of the ``L^2``
gradients returned by :mod:`ymhlab.energy`.  Then
``d/dt YMH = -2 (||u'||^2 + ||A'||^2)``.

The metric flow evolves ``s = log h`` by ``s' = -2 R(s)`` with
``R(s) = B_0 - Lap(s)/2 + exp(s) mu(u_0) - c`` (linear fiber), which is the
vortex residual of ``exp(s/2) . (A_0, u_0)``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .energy import grad_A, grad_u, residual_field, ymh
from .errors import Blowup, CflViolation, NonPositiveInput, NotInteger, ShapeMismatch
from .gauge import GaugeTransform, Section, degree, gauge_apply, holomorphic_residual, laplacian

BLOWUP_GUARD = 1e8
MONITOR_FIELDS = ("t", "e1", "e2", "e3", "total", "sup_ehat", "l2_residual", "energy_gap",
                  "psi_c", "sup_s", "l1_s", "trace_mean", "trace_var")


@dataclass(frozen=True)
class FlowState:
    A: object
    u: Section
    t: float = 0.0


@dataclass(frozen=True)
class MetricState:
    s: np.ndarray
    A0: object
    u0: Section
    t: float = 0.0


@dataclass
class MonitorRecord:
    t: float
    e1: float
    e2: float
    e3: float
    total: float
    sup_ehat: float
    l2_residual: float
    energy_gap: float = float("nan")
    psi_c: float = float("nan")
    sup_s: float = float("nan")
    l1_s: float = float("nan")
    trace_mean: float = float("nan")
    trace_var: float = float("nan")
    sigma_sup: float = float("nan")

    def row(self):
        return [getattr(self, k) for k in MONITOR_FIELDS]


def residual_stats(A, u, c):
    """``(sup ehat, l2 residual, trace mean, trace variance)`` of ``Lambda F + mu``."""
    g = A.grid
    r = residual_field(A, u, c)
    tr = r + c
    mean = float(np.mean(tr))
    return (float(np.max(r * r)), float(np.sqrt(g.area * np.sum(r * r))),
            mean, float(np.mean((tr - mean) ** 2)))


def pair_record(A, u, c, t, **extra):
    e = ymh(A, u, c)
    sup_e, l2, tm, tv = residual_stats(A, u, c)
    return MonitorRecord(t, e.e1, e.e2, e.e3, e.total, sup_e, l2, trace_mean=tm, trace_var=tv,
                         **extra)


def check_cfl(dt, grid, kappa):
    if not dt > 0:
        raise CflViolation(f"time step must be positive, got {dt}")
    limit = kappa * grid.area
    if dt > limit * (1 + 1e-12):
        raise CflViolation(f"dt={dt:g} exceeds cfl_kappa * a^2 = {limit:g}")


def _guard(*arrays):
    for x in arrays:
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP_GUARD:
            raise Blowup("field left the finite range")


# -- pair flow -------------------------------------------------------------

def pair_velocity(A, u, c):
    """``(A', u') = -(E_A, E_u)``."""
    return -0.5 * grad_A(A, u, c), -0.5 * grad_u(A, u, c)


def dissipation(A, u, c):
    """``||A'||^2 + ||u'||^2`` in the lattice ``L^2`` norm."""
    va, vu = pair_velocity(A, u, c)
    return A.grid.area * float(np.sum(va * va) + np.sum(vu * vu))


def _pair_increment(A, u, c, dt, scheme):
    f = u.fiber

    def moved(k_a, k_u, h):
        return A.with_links(A.links + h * k_a), u.with_sites(f.retract(u.sites + h * k_u))

    if scheme == "euler":
        va, vu = pair_velocity(A, u, c)
        return moved(va, vu, dt)
    if scheme != "rk4":
        raise ValueError(f"unknown scheme {scheme!r}")
    k1 = pair_velocity(A, u, c)
    k2 = pair_velocity(*moved(*k1, dt / 2), c)
    k3 = pair_velocity(*moved(*k2, dt / 2), c)
    k4 = pair_velocity(*moved(*k3, dt), c)
    ka = (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
    ku = (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
    return moved(ka, ku, dt)


@dataclass
class StepInfo:
    dt: float
    energy: float
    retried: bool = False
    stalled: bool = False


def step_pair(state, dt, c, scheme="euler", cfl_kappa=0.2, energy_before=None, info=None):
    """One explicit step; returns the new :class:`FlowState`.

    If the energy rises the step is redone as two half steps.  If it still
    rises by more than round-off the step fails with :class:`CflViolation`;
    a round-off-level rise means the state is stationary to machine
    precision and it is kept unchanged (``info.stalled``).
    """
    A, u = state.A, state.u
    check_cfl(dt, A.grid, cfl_kappa)
    e0 = ymh(A, u, c).total if energy_before is None else energy_before
    A1, u1 = _pair_increment(A, u, c, dt, scheme)
    _guard(A1.links, u1.sites)
    e1 = ymh(A1, u1, c).total
    retried = stalled = False
    if e1 > e0:
        retried = True
        Ah, uh = _pair_increment(A, u, c, dt / 2, scheme)
        A1, u1 = _pair_increment(Ah, uh, c, dt / 2, scheme)
        _guard(A1.links, u1.sites)
        e1 = ymh(A1, u1, c).total
        if e1 > e0:
            if e1 - e0 > 1e-13 * max(e0, 1.0):
                raise CflViolation(f"energy increased from {e0!r} to {e1!r} after dt halving")
            A1, u1, e1, stalled = A, u, e0, True
    if info is not None:
        info.dt, info.energy, info.retried, info.stalled = dt, e1, retried, stalled
    return FlowState(A1, u1, state.t + dt)


@dataclass
class RunResult:
    final: object
    records: list
    status: str
    steps: int
    flags: list = field(default_factory=list)
    energies: np.ndarray = None
    sup_ehat: np.ndarray = None
    times: np.ndarray = None
    trajectory: list = None
    error: str = None

    @property
    def converged(self):
        return self.status == "converged"


def run_pair(initial, c, dt, t_end, monitors_every=100, scheme="euler", conv_tol=1e-10,
             cfl_kappa=0.2, holo_tol=0.05, keep_every=None, track_dissipation=True):
    """Integrate the pair flow until ``t_end`` or ``sup ehat < conv_tol``.

    Every step records the energy and ``sup ehat``; the energy-identity gap
    uses trapezoidal quadrature of the dissipation sampled at every step.
    ``Blowup`` ends the run with status ``"blowup"`` instead of raising.
    """
    A, u = initial.A, initial.u
    flags = []
    if u.fiber.name == "linear" and holomorphic_residual(A, u, centered=True) > holo_tol:
        flags.append("nonholomorphic-start")
    deg0 = degree(A)
    state = initial
    e_start = ymh(A, u, c).total
    energy = e_start
    diss = dissipation(A, u, c) if track_dissipation else 0.0
    integral = 0.0
    energies, sups, times = [energy], [residual_stats(A, u, c)[0]], [state.t]
    records = [pair_record(A, u, c, state.t, energy_gap=0.0)]
    traj = [state] if keep_every else None
    status, steps, err = "t_end", 0, None
    info = StepInfo(dt, energy)
    n_steps = int(round((t_end - initial.t) / dt))
    if sups[0] < conv_tol:
        status = "converged"
        n_steps = 0
    while steps < n_steps:
        try:
            state = step_pair(state, dt, c, scheme, cfl_kappa, energy, info)
        except Blowup as exc:
            status, err = "blowup", str(exc)
            break
        steps += 1
        if info.retried and not info.stalled:
            flags.append(f"dt-halved@{state.t:.6g}")
        energy = info.energy
        if track_dissipation:
            d_new = dissipation(state.A, state.u, c)
            integral += 0.5 * dt * (diss + d_new)
            diss = d_new
        sup_e = residual_stats(state.A, state.u, c)[0]
        energies.append(energy)
        sups.append(sup_e)
        times.append(state.t)
        done = sup_e < conv_tol
        if keep_every and steps % keep_every == 0:
            traj.append(state)
        if steps % monitors_every == 0 or done or steps == n_steps:
            records.append(pair_record(state.A, state.u, c, state.t,
                                       energy_gap=abs(energy + 2 * integral - e_start)))
        if done:
            status = "converged"
            break
    if degree(state.A) != deg0:
        raise NotInteger("degree changed along the flow")
    return RunResult(state, records, status, steps, flags, np.array(energies), np.array(sups),
                     np.array(times), traj, err)


def energy_identity_gap(result):
    """``|YMH(t) + 2 int_0^t dissipation - YMH(0)|`` at the final record."""
    return result.records[-1].energy_gap


# -- metric flow -----------------------------------------------------------

def metric_residual(s, A0, u0, c, B0=None, m0=None):
    from .gauge import curvature

    if B0 is None:
        B0 = curvature(A0)
    if m0 is None:
        m0 = u0.fiber.moment_map(u0.sites)
    return B0 - 0.5 * laplacian(s, A0.grid) + np.exp(s) * m0 - c


def _require_linear(u0):
    if u0.fiber.name != "linear":
        raise ValueError("the metric flow is implemented for the linear fiber only")


def metric_initial(A0, u0, s=None, t=0.0):
    _require_linear(u0)
    if s is None:
        s = A0.grid.zeros_site()
    return MetricState(np.array(s, dtype=float), A0, u0, t)


class _MetricRHS:
    def __init__(self, A0, u0, c):
        from .gauge import curvature

        self.B0 = curvature(A0)
        self.m0 = u0.fiber.moment_map(u0.sites)
        self.grid = A0.grid
        self.c = c

    def residual(self, s):
        return self.B0 - 0.5 * laplacian(s, self.grid) + np.exp(s) * self.m0 - self.c

    def __call__(self, s):
        return -2.0 * self.residual(s)


def _metric_increment(rhs, s, dt, scheme):
    if scheme == "euler":
        return s + dt * rhs(s)
    if scheme != "rk4":
        raise ValueError(f"unknown scheme {scheme!r}")
    k1 = rhs(s)
    k2 = rhs(s + 0.5 * dt * k1)
    k3 = rhs(s + 0.5 * dt * k2)
    k4 = rhs(s + dt * k3)
    return s + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6


def step_metric(state, dt, c, scheme="euler", cfl_kappa=0.2, rhs=None):
    _require_linear(state.u0)
    check_cfl(dt, state.A0.grid, cfl_kappa)
    rhs = rhs or _MetricRHS(state.A0, state.u0, c)
    s = _metric_increment(rhs, state.s, dt, scheme)
    _guard(s)
    return replace(state, s=s, t=state.t + dt)


def metric_pair(state):
    """``exp(s/2) . (A_0, u_0)``."""
    g = GaugeTransform(np.zeros(state.A0.grid.shape), state.s)
    return gauge_apply(g, state.A0, state.u0)


def metric_record(state, c, rhs):
    from .donaldson import psi_c

    A, u = metric_pair(state)
    r = rhs.residual(state.s)
    e = ymh(A, u, c)
    tr = r + c
    mean = float(np.mean(tr))
    g = state.A0.grid
    return MonitorRecord(state.t, e.e1, e.e2, e.e3, e.total, float(np.max(r * r)),
                         float(np.sqrt(g.area * np.sum(r * r))),
                         psi_c=psi_c(state.s, state.A0, state.u0, c),
                         sup_s=float(np.max(np.abs(state.s))),
                         l1_s=float(g.area * np.sum(np.abs(state.s))),
                         trace_mean=mean, trace_var=float(np.mean((tr - mean) ** 2)))


def run_metric(initial, c, dt, t_end, monitors_every=100, scheme="euler", conv_tol=1e-10,
               cfl_kappa=0.2, keep_every=None, stop_on_converge=True, track_psi=False):
    """Integrate the metric flow.

    Per-step arrays hold ``sup ehat``, ``int ehat``, ``sup|s|`` and, with
    ``track_psi``, the Donaldson functional.
    """
    from .donaldson import psi_c

    _require_linear(initial.u0)
    psi = [psi_c(initial.s, initial.A0, initial.u0, c)] if track_psi else None
    rhs = _MetricRHS(initial.A0, initial.u0, c)
    g = initial.A0.grid
    state = initial
    records = [metric_record(state, c, rhs)]
    traj = [state] if keep_every else None
    r = rhs.residual(state.s)
    sups, ints, sup_s, times = [float(np.max(r * r))], [g.area * float(np.sum(r * r))], \
        [float(np.max(np.abs(state.s)))], [state.t]
    status, steps, err = "t_end", 0, None
    n_steps = int(round((t_end - initial.t) / dt))
    if stop_on_converge and sups[0] < conv_tol:
        status, n_steps = "converged", 0
    while steps < n_steps:
        try:
            state = step_metric(state, dt, c, scheme, cfl_kappa, rhs)
        except Blowup as exc:
            status, err = "blowup", str(exc)
            break
        steps += 1
        r = rhs.residual(state.s)
        e2 = r * r
        sups.append(float(np.max(e2)))
        ints.append(g.area * float(np.sum(e2)))
        sup_s.append(float(np.max(np.abs(state.s))))
        times.append(state.t)
        if track_psi:
            psi.append(psi_c(state.s, state.A0, state.u0, c))
        done = stop_on_converge and sups[-1] < conv_tol
        if keep_every and steps % keep_every == 0:
            traj.append(state)
        if steps % monitors_every == 0 or done or steps == n_steps:
            records.append(metric_record(state, c, rhs))
        if done:
            status = "converged"
            break
    res = RunResult(state, records, status, steps, [], None, np.array(sups), np.array(times),
                    traj, err)
    res.int_ehat = np.array(ints)
    res.sup_s = np.array(sup_s)
    res.psi = np.array(psi) if track_psi else None
    return res


def reconstruct_pair(metric_traj):
    """Gauge-fixed pair trajectory ``g(t) . (A_0, u_0)`` with ``g = S exp(s/2)``.

    ``S`` solves ``S' S^{-1} = -alpha`` with ``alpha`` the anti-self-adjoint
    part of ``g^{-1} g'``.  For the circle group ``exp(s/2)`` is
    self-adjoint, so ``alpha = 0`` and ``S`` stays the identity; the ODE is
    still integrated so the slot is explicit.
    """
    if not metric_traj:
        return []
    first = metric_traj[0]
    for st in metric_traj:
        if st.A0 is not first.A0 or st.u0 is not first.u0:
            raise ShapeMismatch("metric states come from different base pairs")
    times = np.array([st.t for st in metric_traj])
    if len(times) > 2 and not np.allclose(np.diff(times), times[1] - times[0], rtol=1e-9, atol=1e-12):
        raise ShapeMismatch("metric trajectory is not uniformly sampled")
    phase = np.zeros(first.A0.grid.shape)
    out = []
    for k, st in enumerate(metric_traj):
        if k > 0:
            dt = st.t - metric_traj[k - 1].t
            # g^{-1} g' = s'/2 is real: anti-self-adjoint part is zero
            alpha = np.zeros_like(phase)
            phase = phase - dt * alpha
        A, u = gauge_apply(GaugeTransform(phase, st.s), st.A0, st.u0)
        out.append(FlowState(A, u, st.t))
    return out


# -- sigma distance --------------------------------------------------------

def sigma_distance(H, K):
    """``tr(H^{-1}K) + tr(K^{-1}H) - 2 rank`` pointwise; returns ``(field, sup)``.

    Scalar fields are positive arrays; matrix fields have trailing shape
    ``(n, n)`` and must be symmetric positive definite.
    """
    H = np.asarray(H, dtype=float)
    K = np.asarray(K, dtype=float)
    if H.shape != K.shape:
        raise ShapeMismatch(f"{H.shape} vs {K.shape}")
    if H.ndim >= 2 and H.shape[-1] == H.shape[-2] and H.shape[-1] > 1 and _looks_matrix(H):
        for M in (H, K):
            if np.any(np.linalg.eigvalsh(M) <= 0):
                raise NonPositiveInput("matrix argument is not positive definite")
        n = H.shape[-1]
        sig = (np.trace(np.linalg.solve(H, K), axis1=-2, axis2=-1)
               + np.trace(np.linalg.solve(K, H), axis1=-2, axis2=-1) - 2 * n)
    else:
        if np.any(H <= 0) or np.any(K <= 0):
            raise NonPositiveInput("scalar metrics must be positive")
        sig = H / K + K / H - 2.0
    sig = np.maximum(sig, 0.0)
    return sig, float(np.max(sig)) if sig.size else 0.0


def _looks_matrix(M):
    return np.allclose(M, np.swapaxes(M, -1, -2))


def sigma_log(s1, s2):
    """Scalar ``sigma`` for metrics ``exp(s1)``, ``exp(s2)``: ``2 cosh(s1 - s2) - 2``."""
    d = np.asarray(s1, dtype=float) - np.asarray(s2, dtype=float)
    sig = 4.0 * np.sinh(0.5 * d) ** 2
    return sig, float(np.max(sig))


# -- Bochner balance -------------------------------------------------------

def bochner_terms(A, u, c):
    """``(||grad_A R||^2, ||L_u R||^2)`` with ``R`` the vortex residual.

    ``grad_A`` is the plain forward difference (``R`` is gauge neutral) and
    ``L_u R = R X(u)``.
    """
    g = A.grid
    r = residual_field(A, u, c)
    grad = np.stack([np.roll(r, -1, 0) - r, np.roll(r, -1, 1) - r]) / g.a
    lu = r[..., None] * u.fiber.generator(u.sites)
    return g.area * float(np.sum(grad * grad)), g.area * float(np.sum(lu * lu))
