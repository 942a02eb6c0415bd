"""Discrete YMH energy, its exact gradients and the vortex residual."""

from dataclasses import dataclass

import numpy as np

from .gauge import curvature, transport_angles
from .lattice import shift


@dataclass(frozen=True)
class EnergyBreakdown:
    e1: float
    e2: float
    e3: float

    @property
    def total(self):
        return self.e1 + self.e2 + self.e3

    def as_dict(self):
        return {"e1": self.e1, "e2": self.e2, "e3": self.e3, "total": self.total}


def _link_differences(A, u):
    """Per-link ``Phi_theta u(x + e) - u(x)`` (not divided by ``a``) and the transported neighbour."""
    theta = transport_angles(A)
    f = u.fiber
    nb = np.stack([f.act(shift(u.sites, mu), theta[mu]) for mu in (0, 1)])
    return nb - u.sites[None], nb, theta


def ymh(A, u, c):
    """``E1 = ||F||^2``, ``E2 = ||d_A u||^2``, ``E3 = ||mu(u) - c||^2`` on the lattice."""
    g = A.grid
    B = curvature(A)
    diff, _, _ = _link_differences(A, u)
    mu = u.fiber.moment_map(u.sites)
    e1 = g.area * float(np.sum(B * B))
    e2 = float(np.sum(diff * diff))
    e3 = g.area * float(np.sum((mu - c) ** 2))
    return EnergyBreakdown(e1, e2, e3)


def grad_u(A, u, c):
    """``L^2`` gradient of :func:`ymh` in ``u`` (tangent-projected on the sphere).

    This is twice the discrete Euler-Lagrange operator
    ``nabla_A^* d_A u + (d mu)^* (mu - c)``.
    """
    g = A.grid
    f = u.fiber
    diff, _, theta = _link_differences(A, u)
    out = np.zeros_like(u.sites)
    for mu in (0, 1):
        out -= 2.0 * diff[mu]
        # link arriving from x - e_mu, pulled back to x
        back = f.act(shift(diff[mu], mu, -1), -shift(theta[mu], mu, -1))
        out += 2.0 * back
    out /= g.area
    m = f.moment_map(u.sites)
    out += 2.0 * (m - c)[..., None] * f.moment_gradient(u.sites)
    return f.project_tangent(u.sites, out)


def grad_A(A, u, c=None):
    """``L^2`` gradient of :func:`ymh` in the link coefficients (independent of ``c``).

    Twice the discrete ``L_u^* d_A u + D_A^* F_A``.
    """
    g = A.grid
    B = curvature(A)
    _, nb, _ = _link_differences(A, u)
    X = u.fiber.generator(nb)
    # d/dA of |Phi u(x+e) - u(x)|^2 is -2 a <u(x), X(Phi u(x+e))>
    e2 = -2.0 * g.a * np.sum(u.sites[None] * X, axis=-1)
    e1 = np.stack([B - shift(B, 1, -1), shift(B, 0, -1) - B]) * (2.0 * g.a)
    return (e1 + e2) / g.area


def residual_field(A, u, c):
    """``Lambda F_A + mu(u) - c`` at base sites."""
    return curvature(A) + u.fiber.moment_map(u.sites) - c


def ehat(A, u, c):
    r = residual_field(A, u, c)
    return r * r


def l2_residual(A, u, c):
    r = residual_field(A, u, c)
    return float(np.sqrt(A.grid.area * np.sum(r * r)))


def identity_residuals(A, u, centered=False, holomorphic=None):
    """Labelled relative residuals of the operator identities; see :mod:`ymhlab.kahler`."""
    from .kahler import identity_residuals as _impl

    return _impl(A, u, centered, holomorphic)
