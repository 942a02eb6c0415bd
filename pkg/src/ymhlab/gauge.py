"""Connections, sections and gauge transformations on the twisted lattice."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonConvergence, NotInteger, ShapeMismatch
from .fiber import FiberModel, LinearC
from .lattice import Grid, shift


@dataclass(frozen=True)
class Connection:
    grid: Grid
    links: np.ndarray

    def __post_init__(self):
        links = np.asarray(self.links, dtype=float)
        if links.shape != (2,) + self.grid.shape:
            raise ShapeMismatch(f"links must have shape {(2,) + self.grid.shape}, got {links.shape}")
        object.__setattr__(self, "links", links)

    def with_links(self, links):
        return Connection(self.grid, links)


@dataclass(frozen=True)
class Section:
    grid: Grid
    fiber: FiberModel
    sites: np.ndarray = field(repr=False)

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=float)
        if sites.shape != self.grid.shape + (self.fiber.dim,):
            raise ShapeMismatch(f"section must have shape {self.grid.shape + (self.fiber.dim,)}, "
                                f"got {sites.shape}")
        object.__setattr__(self, "sites", sites)

    def with_sites(self, sites):
        return Section(self.grid, self.fiber, sites)


@dataclass(frozen=True)
class GaugeTransform:
    """``g = exp(s/2) * exp(i phase)`` sitewise.

    ``s = None`` (or zeros) is a unitary transform; the associated metric
    change is ``h = g^* g = exp(s)``.
    """

    phase: np.ndarray
    s: np.ndarray = None

    @property
    def unitary(self):
        return self.s is None or not np.any(self.s)


def zero_connection(grid):
    return Connection(grid, grid.zeros_link())


def constant_section(grid, fiber, point):
    sites = np.broadcast_to(np.asarray(point, dtype=float), grid.shape + (fiber.dim,)).copy()
    return Section(grid, fiber, sites)


def constant_curvature_connection(grid):
    """Degree-``grid.d`` connection with uniform ``B = 2 pi d / Vol``.

    ``A_x = 0`` and ``A_y = B x``; the seam shift closes the last column of
    plaquettes so every plaquette carries the same flux.
    """
    b = 2.0 * np.pi * grid.d / grid.volume
    x, _ = grid.coords()
    links = grid.zeros_link()
    links[1] = b * x
    return Connection(grid, links)


def transport_angles(A):
    """Full transport angle ``a A + seam twist`` per link, shape ``(2, nx, ny)``."""
    g = A.grid
    theta = g.a * A.links
    theta[0] += g.seam_angle()
    return theta


def transported_neighbors(A, u):
    """``Phi_theta u(x + e_mu)`` for both directions, shape ``(2, nx, ny, k)``."""
    theta = transport_angles(A)
    f = u.fiber
    return np.stack([f.act(shift(u.sites, mu), theta[mu]) for mu in (0, 1)])


def curvature(A):
    """Plaquette curvature density ``B`` (real coordinate of ``-i F_A``)."""
    g = A.grid
    ax, ay = A.links
    circ = ax + (shift(ay, 0) + g.seam_shift()) - shift(ax, 1) - ay
    return circ / g.a


def degree(A, tol=1e-9):
    g = A.grid
    flux = float(np.sum(curvature(A))) * g.area / (2.0 * np.pi)
    k = round(flux)
    if abs(flux - k) > tol:
        raise NotInteger(f"total flux / 2pi = {flux!r} is not an integer")
    return int(k)


def covariant_derivative(A, u):
    """Forward covariant difference ``d_A u``, shape ``(2, nx, ny, k)``.

    ``(d_A u)_mu(x) = (Phi_{theta_mu(x)} u(x + e_mu) - u(x)) / a``; with
    ``A = 0`` and no twist this is the plain forward difference.
    """
    return (transported_neighbors(A, u) - u.sites[None]) / A.grid.a


def covariant_derivative_centered(A, u):
    """Centered variant ``(Phi u(x+e) - Phi^{-1} u(x-e)) / 2a`` at sites."""
    theta = transport_angles(A)
    f = u.fiber
    out = []
    for mu in (0, 1):
        fwd = f.act(shift(u.sites, mu), theta[mu])
        back = f.act(shift(u.sites, mu, -1), -shift(theta[mu], mu, -1))
        out.append((fwd - back) / (2.0 * A.grid.a))
    return np.stack(out)


def dolbeault_parts(A, u, du=None):
    """Split ``d_A u`` into ``(del, dbar)`` with ``dbar = (d_A u + J d_A u j) / 2``.

    ``j`` pairs the x- and y-links based at the same site:
    ``(w o j)_x = w_y`` and ``(w o j)_y = -w_x``.
    """
    if du is None:
        du = covariant_derivative(A, u)
    J = lambda v: u.fiber.complex_structure(u.sites, v)
    dx, dy = du
    dbar = 0.5 * np.stack([dx + J(dy), dy - J(dx)])
    dl = 0.5 * np.stack([dx - J(dy), dy + J(dx)])
    return dl, dbar


# -- gauge transformations ------------------------------------------------

def _forward_grad(f, grid):
    return np.stack([shift(f, 0) - f, shift(f, 1) - f]) / grid.a


def _backward_grad(f, grid):
    return np.stack([f - shift(f, 0, -1), f - shift(f, 1, -1)]) / grid.a


def gauge_apply(g, A, u):
    """Act with ``g`` on the pair ``(A, u)``.

    Unitary part: ``u -> exp(i phase) . u`` and ``A -> A - grad^+ phase``.
    Hermitian part ``exp(s/2)``: ``u -> exp(s/2) . u`` through the fiber's
    complexified action and ``A_x += (1/2) d^-_y s``, ``A_y -= (1/2) d^-_x s``.
    The backward differences make the curvature change exactly
    ``B -> B - (1/2) Lap s`` with the 5-point Laplacian.
    """
    grid = A.grid
    links = A.links.copy()
    sites = u.sites
    if g.s is not None:
        s = np.asarray(g.s, dtype=float)
        bs = _backward_grad(s, grid)
        links[0] += 0.5 * bs[1]
        links[1] -= 0.5 * bs[0]
        sites = u.fiber.complexified_action(sites, 0.5 * s)
    phase = np.asarray(g.phase, dtype=float)
    links = links - _forward_grad(phase, grid)
    sites = u.fiber.act(sites, phase)
    return Connection(grid, links), u.with_sites(sites)


def laplacian(f, grid):
    """5-point Laplacian ``sum_mu (f(x+e) - 2 f(x) + f(x-e)) / a^2`` (negative semidefinite)."""
    out = -4.0 * f
    for mu in (0, 1):
        out = out + shift(f, mu) + shift(f, mu, -1)
    return out / grid.area


# -- sparse operators for the linear fiber ----------------------------------

def _site_index(grid):
    return np.arange(grid.n_sites).reshape(grid.shape)


def linear_difference_operators(A, centered=False):
    """Complex sparse matrices ``(D_x, D_y)`` acting on ``z = x + iy`` sections.

    They reproduce :func:`covariant_derivative` (or its centered variant)
    for the linear fiber, whose circle action is ``z -> exp(-i theta) z``.
    """
    grid = A.grid
    n = grid.n_sites
    idx = _site_index(grid).ravel()
    theta = transport_angles(A)
    a = grid.a
    mats = []
    for mu in (0, 1):
        fwd = shift(_site_index(grid), mu).ravel()
        ph = np.exp(-1j * theta[mu].ravel())
        if not centered:
            rows = np.concatenate([idx, idx])
            cols = np.concatenate([idx, fwd])
            vals = np.concatenate([-np.ones(n), ph]) / a
        else:
            back = shift(_site_index(grid), mu, -1).ravel()
            ph_back = np.exp(1j * shift(theta[mu], mu, -1).ravel())
            rows = np.concatenate([idx, idx])
            cols = np.concatenate([fwd, back])
            vals = np.concatenate([ph, -ph_back]) / (2 * a)
        mats.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex))
    return mats[0], mats[1]


def dbar_operator(A, centered=False):
    """``z -> (dbar_A z)_x = (D_x z + i D_y z) / 2``; the y-component is ``-i`` times it."""
    dx, dy = linear_difference_operators(A, centered)
    return 0.5 * (dx + 1j * dy)


def site_curvature(A):
    """Average of the four plaquette curvatures touching each site."""
    B = curvature(A)
    return 0.25 * (B + shift(B, 0, -1) + shift(B, 1, -1) + shift(shift(B, 0, -1), 1, -1))


def weitzenboeck_operator(A):
    """``(D^* D - B) / 2`` on linear-fiber sections, a sparse Hermitian matrix.

    In the continuum this equals ``dbar^* dbar``.  Unlike the product of
    forward ``dbar`` matrices it has no spurious lattice zero modes, so its
    kernel dimension follows the degree.
    """
    dx, dy = linear_difference_operators(A)
    lap = dx.conj().T @ dx + dy.conj().T @ dy
    return (0.5 * (lap - sp.diags(site_curvature(A).ravel()))).tocsc()


def _dbar_norm(dbar):
    return np.sqrt(np.sum(dbar ** 2))


def holomorphic_residual(A, u, centered=False):
    """``||dbar_A u|| / ||u||`` with both norms the discrete ``L^2`` norms."""
    if centered:
        _, dbar = dolbeault_parts(A, u, covariant_derivative_centered(A, u))
    else:
        _, dbar = dolbeault_parts(A, u)
    den = np.sqrt(np.sum(u.sites ** 2))
    return float(_dbar_norm(dbar) / den) if den > 0 else float("inf")


@dataclass
class HolomorphicResult:
    section: Section
    residual: float
    residual_centered: float
    iterations: int
    eigenvalue: float


def holomorphic_project(A, seed=0, tol=1e-10, max_iter=None, max_residual=0.05):
    """Unit-norm linear-fiber section minimising the discrete ``||dbar_A u||^2``.

    The quadratic form is the Weitzenboeck one, ``<(D^* D - B) u, u> / 2``,
    minimised by shifted inverse power iteration (the shift sits below the
    spectrum, which is bounded by ``-max|B| / 2``).  Iteration stops when
    successive phase-aligned unit vectors differ by less than ``tol``.

    Both the forward residual (O(a) for a smooth holomorphic section) and
    the centered one (O(a^2)) are reported; :class:`NonConvergence` is
    raised if the centered residual exceeds ``max_residual``, which happens
    when the bundle has no holomorphic sections.
    """
    from .rng import SplitMix64

    grid = A.grid
    n = grid.n_sites
    if max_iter is None:
        max_iter = 10 * n
    M = weitzenboeck_operator(A)
    bmax = 0.5 * float(np.max(np.abs(site_curvature(A))))
    sigma = -bmax - 0.01 * (1.0 + bmax)
    lu = spla.splu((M - sigma * sp.identity(n, format="csc", dtype=complex)).tocsc())
    rng = SplitMix64(seed)
    v = rng.normal((n,)) + 1j * rng.normal((n,))
    v /= np.linalg.norm(v)
    it = 0
    for it in range(1, max_iter + 1):
        w = lu.solve(v)
        w /= np.linalg.norm(w)
        ph = np.vdot(w, v)
        ph = ph / abs(ph) if abs(ph) > 0 else 1.0
        delta = np.linalg.norm(ph * w - v)
        v = ph * w
        if delta < tol:
            break
    else:
        raise NonConvergence(f"inverse iteration did not settle in {max_iter} steps")
    lam = float(np.real(np.vdot(v, M @ v)))
    z = v.reshape(grid.shape) / (np.linalg.norm(v) * grid.a)  # unit L^2 norm
    u = Section(grid, LinearC(), LinearC.from_complex(z))
    res = holomorphic_residual(A, u)
    res_c = holomorphic_residual(A, u, centered=True)
    if res_c > max_residual:
        raise NonConvergence(f"lowest mode has dbar residual {res_c:.3e} > {max_residual:.3e}: "
                             "no holomorphic section", residual=res_c)
    return HolomorphicResult(u, res, res_c, it, lam)
