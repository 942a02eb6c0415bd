"""Operator identity suite for the linear fiber and manufactured smooth data.

Every identity is evaluated twice: with forward differences (adjoints are
exact conjugate transposes, residuals are O(a)) and with site-collocated
centered differences (O(a^2)).  Some centered forms coincide identically
because the centered difference is exactly anti-Hermitian; those residuals
sit at round-off and are reported as exact.
"""

from dataclasses import dataclass

import numpy as np

from .fiber import LinearC
from .gauge import Connection, Section, curvature, linear_difference_operators, site_curvature
from .lattice import build_grid, shift

EXACT_FLOOR = 1e-12
LABELS = ("action_moment", "action_adjoint", "codifferential_01", "moment_holomorphic", "curvature_codifferential", "laplacian_split", "weitzenboeck")


# -- manufactured data ------------------------------------------------------

def _bump(x, y, L, kx, ky, phase=0.0):
    return np.sin(2 * np.pi * kx * x / L + phase) * np.cos(2 * np.pi * ky * y / L)


def smooth_connection(grid, amp=0.3):
    """Degree-``grid.d`` connection: ``A_y = 2 pi d x / Vol`` plus smooth periodic terms.

    Link values are sampled at link midpoints.
    """
    L = grid.lengths[0]
    x, y = grid.coords()
    a = grid.a
    b = 2 * np.pi * grid.d / grid.volume
    ax = amp * (_bump(x + a / 2, y, L, 1, 1) + 0.5 * _bump(x + a / 2, y, L, 0, 2, 0.7))
    ay = b * x + amp * (np.cos(2 * np.pi * x / L) * np.sin(2 * np.pi * (y + a / 2) / L + 0.3))
    return Connection(grid, np.stack([ax, ay]))


def smooth_section(grid, width=None):
    """Smooth section obeying the degree-``d`` seam rule ``u(x + L) = exp(2 pi i d y / L) u``.

    Built as a periodised Gaussian in ``x`` with a smooth periodic profile in ``y``.
    """
    lx, ly = grid.lengths
    w = lx / 6 if width is None else width
    x, y = grid.coords()
    psi = 1.0 + 0.4 * np.cos(2 * np.pi * y / ly) + 0.2j * np.sin(4 * np.pi * y / ly)
    z = np.zeros(grid.shape, dtype=complex)
    for n in range(-4, 5):
        z += np.exp(-(x + n * lx - lx / 2) ** 2 / (2 * w * w)) * np.exp(-2j * np.pi * grid.d * n * y / ly)
    return Section(grid, LinearC(), LinearC.from_complex(z * psi))


def holomorphic_orbit_data(grid, amp=0.5, z0=1.0):
    """Degree-0 holomorphic pair ``A = (f_y, -f_x) / 2``, ``u = exp(f/2) z0``.

    ``f`` is a smooth bump; the links sample the analytic ``A`` at their
    midpoints so the pair is holomorphic up to O(a^2) in the centered sense.
    """
    L = grid.lengths[0]
    x, y = grid.coords()
    a = grid.a
    k = 2 * np.pi / L

    def f(x, y):
        return amp * np.sin(k * x + 0.4) * np.cos(k * y)

    fx = lambda x, y: amp * k * np.cos(k * x + 0.4) * np.cos(k * y)
    fy = lambda x, y: -amp * k * np.sin(k * x + 0.4) * np.sin(k * y)
    links = np.stack([0.5 * fy(x + a / 2, y), -0.5 * fx(x, y + a / 2)])
    z = np.exp(0.5 * f(x, y)) * z0
    return Connection(grid, links), Section(grid, LinearC(), LinearC.from_complex(z.astype(complex)))


# -- residuals ----------------------------------------------------------------

def _rel(lhs, rhs):
    num = np.linalg.norm(np.ravel(lhs - rhs))
    den = max(np.linalg.norm(np.ravel(lhs)), np.linalg.norm(np.ravel(rhs)))
    return float(num / den) if den > 0 else float(num)


def _centered_scalar(f, grid):
    return np.stack([shift(f, 0) - shift(f, 0, -1), shift(f, 1) - shift(f, 1, -1)]) / (2 * grid.a)


def fiber_identity_residual(u):
    """Pointwise ``L_u = -J (d mu)^*`` and ``L_u^* = d mu J`` over the section's values."""
    f = u.fiber
    p = u.sites
    rho = np.ones(p.shape[:-1])
    v = np.roll(p, 1, axis=-1) + 0.3  # arbitrary tangent-like vectors
    v = f.project_tangent(p, v)
    lhs1 = f.infinitesimal_action(p, rho)
    _, dmustar = f.adjoint_maps(p, v, rho)
    r1 = _rel(lhs1, -f.complex_structure(p, dmustar))
    lstar, _ = f.adjoint_maps(p, v, rho)
    r2 = _rel(np.sum(lhs1 * v, axis=-1), rho * lstar)
    return r1, r2


@dataclass
class IdentityReport:
    residuals: dict
    dbar_norm: float

    def __getitem__(self, key):
        return self.residuals[key]


def identity_residuals(A, u, centered=False, holomorphic=None):
    """Relative residuals ``||lhs - rhs|| / max(||lhs||, ||rhs||)`` per identity.

    ``holomorphic`` (a second pair ``(A, u)``) feeds the holomorphic-only
    identity; by default the given pair is used.  The forward ``dbar``
    norm of that pair is reported alongside.
    """
    if u.fiber.name != "linear":
        raise ValueError("identity suite uses the linear fiber")
    g = A.grid
    z = LinearC.to_complex(u.sites).ravel()
    Dx, Dy = linear_difference_operators(A, centered)
    Bs = (site_curvature(A) if centered else curvature(A)).ravel()
    res = {}
    res["action_moment"], res["action_adjoint"] = fiber_identity_residual(u)

    # d^* beta = -i Lambda d_A beta for the (0,1)-form beta = z dzbar
    lhs = Dx.conj().T @ z + Dy.conj().T @ (-1j * z)
    rhs = -1j * (Dx @ (-1j * z) - Dy @ z)
    res["codifferential_01"] = _rel(lhs, rhs)

    # d_A^* F_A = (d_y B, -d_x B)
    B = curvature(A)
    if centered:
        lx = 0.5 * ((B - shift(B, 1, -1)) + (shift(B, 0, -1) - shift(shift(B, 0, -1), 1, -1))) / g.a
        ly = 0.5 * ((shift(B, 0, -1) - B) + (shift(shift(B, 0, -1), 1, -1) - shift(B, 1, -1))) / g.a
        dB = _centered_scalar(site_curvature(A), g)
    else:
        lx = (B - shift(B, 1, -1)) / g.a
        ly = (shift(B, 0, -1) - B) / g.a
        dB = np.stack([shift(B, 0) - B, shift(B, 1) - B]) / g.a
    res["curvature_codifferential"] = _rel(np.stack([lx, ly]), np.stack([dB[1], -dB[0]]))

    # d^* d = i Lambda (dbar del - del dbar) = -(D_x^2 + D_y^2)
    lhs = Dx.conj().T @ (Dx @ z) + Dy.conj().T @ (Dy @ z)
    rhs = -(Dx @ (Dx @ z) + Dy @ (Dy @ z))
    res["laplacian_split"] = _rel(lhs, rhs)
    # d^* d - B = 2 dbar^* dbar
    Q = 0.5 * (Dx + 1j * Dy)
    rhs = 4.0 * (Q.conj().T @ (Q @ z))
    res["weitzenboeck"] = _rel(lhs - Bs * z, rhs)

    # L_u^*(d_A u) = d mu o j on holomorphic data
    Ah, uh = holomorphic if holomorphic is not None else (A, u)
    zh = LinearC.to_complex(uh.sites).ravel()
    Hx, Hy = linear_difference_operators(Ah, centered)
    mu = 0.5 * np.abs(zh) ** 2
    # <u, J w> for the real pairing with J = i is Re(conj(u) i w)
    lstar = np.stack([np.real(np.conj(zh) * 1j * (Hx @ zh)), np.real(np.conj(zh) * 1j * (Hy @ zh))])
    mgrid = mu.reshape(g.shape)
    if centered:
        dmu = _centered_scalar(mgrid, g)
    else:
        dmu = np.stack([shift(mgrid, 0) - mgrid, shift(mgrid, 1) - mgrid]) / g.a
    res["moment_holomorphic"] = _rel(lstar, np.stack([dmu[1].ravel(), -dmu[0].ravel()]))
    Hq = 0.5 * (Hx + 1j * Hy)
    dbar = np.sqrt(2.0) * np.linalg.norm(Hq @ zh) / max(np.linalg.norm(zh), 1e-300)
    return IdentityReport(res, float(dbar))


# -- refinement study ----------------------------------------------------------

@dataclass
class RefinementStudy:
    sizes: tuple
    forward: dict
    centered: dict
    orders_forward: dict
    orders_centered: dict

    def passed(self, min_forward=1.0, min_centered=1.9):
        """Per identity: exact (every residual below ``EXACT_FLOOR``), or
        decaying monotonically with finest-pair order, rounded to one
        decimal, at least the required value."""
        ok = {}
        for tab, orders, need in ((self.forward, self.orders_forward, min_forward),
                                  (self.centered, self.orders_centered, min_centered)):
            for k, vals in tab.items():
                exact = max(vals) <= EXACT_FLOOR
                decays = all(b < a for a, b in zip(vals, vals[1:]))
                good = exact or (decays and round(orders[k][-1], 1) >= need)
                ok[k] = ok.get(k, True) and good
        return ok

    def table(self):
        rows = []
        for variant, tab, orders in (("forward", self.forward, self.orders_forward),
                                     ("centered", self.centered, self.orders_centered)):
            for k in LABELS:
                vals = tab[k]
                o = orders[k]
                rows.append((k, variant, vals, o))
        return rows


def observed_orders(values):
    v = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return [float(np.log2(v[i] / v[i + 1])) for i in range(len(v) - 1)]


def refinement_study(sizes=(8, 16, 32, 64), length=4.0, d=1):
    """Residuals of every identity on manufactured data over a grid sequence."""
    fwd = {k: [] for k in LABELS}
    cen = {k: [] for k in LABELS}
    for n in sizes:
        grid = build_grid(n, n, length / n, d)
        A = smooth_connection(grid)
        u = smooth_section(grid)
        g0 = build_grid(n, n, length / n, 0)
        hol = holomorphic_orbit_data(g0)
        for tab, centered in ((fwd, False), (cen, True)):
            rep = identity_residuals(A, u, centered, holomorphic=hol)
            for k in LABELS:
                tab[k].append(rep.residuals[k])
    return RefinementStudy(tuple(sizes), fwd, cen,
                           {k: observed_orders(v) for k, v in fwd.items()},
                           {k: observed_orders(v) for k, v in cen.items()})
