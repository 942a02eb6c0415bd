"""Symplectic fibers with a Hamiltonian circle action.

Points are stored as real arrays with a trailing coordinate axis: ``(..., 2)``
for the linear fiber C (``z = x + iy``) and ``(..., 3)`` for the unit sphere.
All operations broadcast over leading axes, so a section on the lattice is
just an array of shape ``(nx, ny, k)``.

Lie algebra values of U(1) are plain real numbers ``rho`` (``xi = i*rho``)
paired by ``<xi, eta> = rho_xi * rho_eta``.

Sign conventions (checked by the identity tests, see ``tests/test_fiber.py``)

* LinearC: ``omega = dx^dy``, ``J = i``, circle acts by ``z -> exp(-i theta) z``,
  ``mu(z) = |z|^2 / 2``, complexified action ``z -> exp(s) z``.
* Sphere: area form ``omega_p(v, w) = p.(v x w)``, ``J v = p x v``, circle acts
  by positive rotation about the z axis, ``mu(p) = p_z``; the complexified
  action scales the stereographic coordinate taken from the north pole, so
  ``s > 0`` pushes points towards ``mu = +1``.

With these choices ``d<mu, xi> = omega(X_xi, .)``, ``L_p = -J (d mu)^*`` and
``L_p^* = d mu J`` hold exactly.
"""

import numpy as np

from .errors import Undetermined


def lie_inner(rho1, rho2):
    return np.multiply(rho1, rho2)


def _rotate_xy(p, angle):
    c = np.cos(angle)
    s = np.sin(angle)
    out = np.array(p, dtype=float, copy=True)
    x = p[..., 0]
    y = p[..., 1]
    out[..., 0] = c * x - s * y
    out[..., 1] = s * x + c * y
    return out


class FiberModel:
    """Common surface of the two fiber models."""

    name = "abstract"
    dim = 0
    # sign of the xy-rotation generated by xi = +1
    orientation = 1
    compact = True

    # -- geometry -------------------------------------------------------
    def moment_map(self, p):
        raise NotImplementedError

    def moment_gradient(self, p):
        raise NotImplementedError

    def complex_structure(self, p, v):
        raise NotImplementedError

    def project_tangent(self, p, v):
        return np.asarray(v, dtype=float)

    def retract(self, p):
        return np.asarray(p, dtype=float)

    def complexified_action(self, p, s):
        raise NotImplementedError

    def random_point(self, rng, shape, scale=1.0):
        raise NotImplementedError

    def metric(self, p, v, w):
        return np.sum(np.asarray(v) * np.asarray(w), axis=-1)

    def symplectic(self, p, v, w):
        """``omega(v, w) = g(J v, w)``."""
        return self.metric(p, self.complex_structure(p, v), w)

    # -- circle action --------------------------------------------------
    def generator(self, p):
        """``X_1(p)``, the fundamental vector field of ``xi = 1``."""
        p = np.asarray(p, dtype=float)
        out = np.zeros_like(p)
        out[..., 0] = -self.orientation * p[..., 1]
        out[..., 1] = self.orientation * p[..., 0]
        return out

    def infinitesimal_action(self, p, rho):
        """``L_p xi = X_xi(p)``."""
        return np.asarray(rho, dtype=float)[..., None] * self.generator(p)

    def act(self, p, theta):
        """Unitary action of ``exp(i theta)``: the time-``theta`` flow of ``X_1``."""
        return _rotate_xy(np.asarray(p, dtype=float), self.orientation * np.asarray(theta))

    def adjoint_maps(self, p, v, rho):
        """Return ``(L_p^* v, (d mu)^* rho)``.

        ``L_p^* v`` is computed as ``d mu(p)(J v)`` and ``(d mu)^* rho`` as
        ``rho * grad mu(p)``; the identity tests confirm both are the true
        adjoints for the fiber metric.
        """
        grad = self.moment_gradient(p)
        lstar = self.metric(p, grad, self.complex_structure(p, v))
        dmustar = np.asarray(rho, dtype=float)[..., None] * grad
        return lstar, dmustar

    def random_tangent(self, rng, p):
        p = np.asarray(p, dtype=float)
        return self.project_tangent(p, rng.normal(p.shape))

    # -- maximal weight ---------------------------------------------------
    def maximal_weight(self, p, rho, t_max=40.0, blowup_threshold=1e8, tol=1e-8,
                       checkpoints=16):
        """Limit of ``lambda_t = <mu(exp(i t xi) p), xi>`` as ``t -> inf``.

        The orbit is evaluated at ``t = t_max * k / checkpoints``.  Returns the
        plateau value when ``|lambda(t_max) - lambda(t_max/2)| < tol`` and
        ``inf`` once ``lambda`` exceeds ``blowup_threshold``.  Anything else
        raises :class:`Undetermined`.  Works elementwise on arrays of points.
        """
        p = np.asarray(p, dtype=float)
        rho = np.broadcast_to(np.asarray(rho, dtype=float), p.shape[:-1])
        ts = t_max * np.arange(checkpoints + 1) / checkpoints
        with np.errstate(over="ignore", invalid="ignore"):
            lam = np.stack([rho * self.moment_map(self.complexified_action(p, t * rho))
                            for t in ts])
        blown = np.any(~np.isfinite(lam) | (lam > blowup_threshold), axis=0)
        half = lam[checkpoints // 2]
        last = lam[-1]
        plateau = np.isfinite(last) & (np.abs(last - half) < tol)
        out = np.where(blown, np.inf, last)
        bad = ~(blown | plateau)
        if np.any(bad):
            raise Undetermined(f"{int(np.count_nonzero(bad))} point(s) reached neither "
                               f"plateau nor blowup by t={t_max}")
        if out.ndim == 0:
            return float(out)
        return out


class LinearC(FiberModel):
    name = "linear"
    dim = 2
    orientation = -1
    compact = False

    def moment_map(self, p):
        p = np.asarray(p, dtype=float)
        return 0.5 * (p[..., 0] ** 2 + p[..., 1] ** 2)

    def moment_gradient(self, p):
        return np.array(p, dtype=float, copy=True)

    def complex_structure(self, p, v):
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        out[..., 0] = -v[..., 1]
        out[..., 1] = v[..., 0]
        return out

    def complexified_action(self, p, s):
        return np.asarray(p, dtype=float) * np.exp(np.asarray(s, dtype=float))[..., None]

    def random_point(self, rng, shape, scale=1.0):
        return scale * rng.normal(tuple(shape) + (2,))

    @staticmethod
    def to_complex(p):
        p = np.asarray(p, dtype=float)
        return p[..., 0] + 1j * p[..., 1]

    @staticmethod
    def from_complex(z):
        z = np.asarray(z)
        return np.stack([z.real, z.imag], axis=-1).astype(float)


class Sphere(FiberModel):
    name = "sphere"
    dim = 3
    orientation = 1
    compact = True

    def moment_map(self, p):
        return np.asarray(p, dtype=float)[..., 2].copy()

    def moment_gradient(self, p):
        p = np.asarray(p, dtype=float)
        g = -p[..., 2:3] * p
        g[..., 2] += 1.0
        return g

    def complex_structure(self, p, v):
        return np.cross(np.asarray(p, dtype=float), np.asarray(v, dtype=float))

    def project_tangent(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        return v - np.sum(p * v, axis=-1, keepdims=True) * p

    def retract(self, p):
        p = np.asarray(p, dtype=float)
        return p / np.linalg.norm(p, axis=-1, keepdims=True)

    def complexified_action(self, p, s):
        """Scale the stereographic coordinate ``w = (x + iy)/(1 - z)`` by ``exp(s)``.

        Poles are fixed points and are returned unchanged.  The scaling is
        applied to ``log|w| = log tan(theta_s / 2)`` (``theta_s`` measured from
        the south pole), so large ``s`` saturates at the north pole instead of
        overflowing.
        """
        p = np.asarray(p, dtype=float)
        s = np.broadcast_to(np.asarray(s, dtype=float), p.shape[:-1])
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        rho2 = x * x + y * y
        pole = rho2 < 1e-300
        # tan(theta/2) form: |w| = sqrt((1+z)/(1-z)); use half-angle to avoid 1-z loss
        half = 0.5 * np.arctan2(np.sqrt(rho2), -z)  # angle from the south pole / 2
        with np.errstate(divide="ignore", over="ignore"):
            logw = np.log(np.tan(np.where(pole, 0.25 * np.pi, half))) + s
        new_half = np.arctan(np.exp(np.clip(logw, -700, 700)))
        theta = 2.0 * new_half  # angle measured from the south pole
        phi = np.arctan2(y, x)
        out = np.empty_like(p)
        out[..., 0] = np.sin(theta) * np.cos(phi)
        out[..., 1] = np.sin(theta) * np.sin(phi)
        out[..., 2] = -np.cos(theta)
        return np.where(pole[..., None], p, out)

    def random_point(self, rng, shape, scale=1.0):
        return self.retract(rng.normal(tuple(shape) + (3,)))


FIBERS = {"linear": LinearC, "sphere": Sphere}


def make_fiber(name):
    try:
        return FIBERS[name]()
    except KeyError:
        raise ValueError(f"unknown fiber model {name!r}; expected one of {sorted(FIBERS)}")


def circle_orbit_derivative(fiber, p, rho, h=1e-6):
    """Centered difference of the unitary orbit at ``t = 0`` (oracle for ``X_xi``)."""
    return (fiber.act(p, h * rho) - fiber.act(p, -h * rho)) / (2 * h)


def moment_identity_error(fiber, p, rho, v, h):
    """``|d<mu,xi>(v) - omega(X_xi, v)|`` with ``d`` by centered differences.

    ``p + t v`` is retracted back onto the fiber, which is second-order
    accurate for tangent ``v``.
    """
    f = lambda q: rho * fiber.moment_map(q)
    plus = fiber.retract(np.asarray(p) + h * np.asarray(v))
    minus = fiber.retract(np.asarray(p) - h * np.asarray(v))
    fd = (f(plus) - f(minus)) / (2 * h)
    exact = fiber.symplectic(p, fiber.infinitesimal_action(p, rho), v)
    return np.abs(fd - exact)


def sphere_pole(north=True):
    return np.array([0.0, 0.0, 1.0 if north else -1.0])

