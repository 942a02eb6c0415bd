"""Discrete flat torus with a degree-``d`` twist.

Index conventions
-----------------
* Sites ``(i, j)`` sit at ``(i a, j a)``; arrays have shape ``(nx, ny, ...)``.
* Link fields have shape ``(2, nx, ny)``: ``[0]`` holds the x-link leaving
  site ``(i, j)``, ``[1]`` the y-link.  Values are connection coefficients
  (per unit length), so the transport angle of a link is ``a * A``.
* Plaquette ``(i, j)`` has lower-left corner ``(i, j)`` and is assigned to that
  site by :func:`lambda_contract`.  Two-forms handed to ``lambda_contract``
  and ``l2_inner_product(..., degree=2)`` are plaquette *integrals*.

The bundle is glued across the x-seam only.  A section obeys
``u(i + nx, j) = exp(i chi_j) . u(i, j)`` with ``chi_j = -2 pi d j / ny`` (for
the linear fiber this is multiplication by ``exp(2 pi i d y / L_y)``), and the
y-links see the additive shift ``A_y(i + nx, j) = A_y(i, j) + 2 pi d / L_y``.
Both corrections live in :meth:`Grid.seam_angle` and :meth:`Grid.seam_shift`.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    a: float
    d: int = 0

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def n_sites(self):
        return self.nx * self.ny

    @property
    def volume(self):
        return self.nx * self.ny * self.a * self.a

    @property
    def area(self):
        return self.a * self.a

    @property
    def lengths(self):
        return (self.nx * self.a, self.ny * self.a)

    def coords(self):
        """Site coordinates ``(x, y)`` as two ``(nx, ny)`` arrays."""
        x = self.a * np.arange(self.nx)
        y = self.a * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def seam_angle(self):
        """Extra transport angle on each x-link, nonzero only on the seam column.

        Shape ``(nx, ny)``; adding it to ``a * A_x`` gives the full transport
        angle from ``(i, j)`` to ``(i + 1, j)`` in the stored (wrapped) chart.
        """
        out = np.zeros(self.shape)
        out[-1, :] = -2.0 * np.pi * self.d * np.arange(self.ny) / self.ny
        return out

    def seam_shift(self):
        """Additive correction to ``A_y(i + 1, j)`` used by the plaquette sum."""
        out = np.zeros(self.shape)
        out[-1, :] = 2.0 * np.pi * self.d / (self.ny * self.a)
        return out

    def zeros_site(self, *trailing):
        return np.zeros(self.shape + tuple(trailing))

    def zeros_link(self):
        return np.zeros((2,) + self.shape)


def build_grid(nx, ny, a, d=0):
    if int(nx) != nx or int(ny) != ny:
        raise ValueError("grid dimensions must be integers")
    if nx < 4 or ny < 4:
        raise ValueError(f"grid must be at least 4x4, got {nx}x{ny}")
    if not a > 0:
        raise ValueError(f"spacing must be positive, got {a}")
    if int(d) != d:
        raise ValueError("twist degree must be an integer")
    return Grid(int(nx), int(ny), float(a), int(d))


def shift(f, axis, step=1):
    """``f(x + step * e_axis)`` on the periodic index set (no twist applied)."""
    return np.roll(f, -step, axis=axis)


def l2_inner_product(f, g, grid, degree=0):
    """Discrete ``L^2`` pairing of two k-form fields.

    Degrees 0 and 1 carry coefficient values and pair as ``sum(f g) a^2``;
    degree 2 carries plaquette integrals and pairs as ``sum(f g) / a^2``.
    Vector- or complex-valued fields are paired with the real part of the
    Hermitian product (``Re sum conj(f) g``).
    """
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != g.shape:
        raise ShapeMismatch(f"shape mismatch {f.shape} vs {g.shape}")
    expected = {0: grid.shape, 1: (2,) + grid.shape, 2: grid.shape}[degree]
    if f.shape[: len(expected)] != expected:
        raise ShapeMismatch(f"field of shape {f.shape} is not a {degree}-form on {grid}")
    prod = np.real(np.conj(f) * g) if np.iscomplexobj(f) or np.iscomplexobj(g) else f * g
    total = float(np.sum(prod))
    if degree == 2:
        return total / grid.area
    return total * grid.area


def lambda_contract(F, grid):
    """Coefficient of a plaquette 2-form against the area form, at base sites."""
    return np.asarray(F) / grid.area


def wedge_area(s, grid):
    """``L s = s * omega_X`` as plaquette integrals (transpose of ``lambda_contract``)."""
    return np.asarray(s) * grid.area


# -- snapshots -----------------------------------------------------------

SNAP_MAGIC = "YMHSNAP"
SNAP_VERSION = "v1"


def _fmt(x):
    return format(float(x), ".17g")


def write_snapshot(path, grid, links, section, t):
    """Write a pair ``(A, u)``.

    Header ``YMHSNAP v1 nx ny a d t``, then ``nx*ny`` site lines holding the
    fiber coordinates of ``u`` and ``nx*ny`` link lines holding ``A_x A_y``
    of the two links leaving each site, both in row-major ``(i, j)`` order.
    """
    section = np.asarray(section, dtype=float)
    links = np.asarray(links, dtype=float)
    lines = [" ".join([SNAP_MAGIC, SNAP_VERSION, str(grid.nx), str(grid.ny),
                       _fmt(grid.a), str(grid.d), _fmt(t)])]
    for row in section.reshape(grid.n_sites, -1):
        lines.append(" ".join(_fmt(v) for v in row))
    flat = links.reshape(2, grid.n_sites)
    for k in range(grid.n_sites):
        lines.append(_fmt(flat[0, k]) + " " + _fmt(flat[1, k]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns ``(grid, links, section, t)``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    head = lines[0].split()
    if len(head) != 7 or head[0] != SNAP_MAGIC or head[1] != SNAP_VERSION:
        raise ValueError(f"{path}: not a {SNAP_MAGIC} {SNAP_VERSION} file")
    grid = Grid(int(head[2]), int(head[3]), float(head[4]), int(head[5]))
    t = float(head[6])
    n = grid.n_sites
    if len(lines) != 1 + 2 * n:
        raise ValueError(f"{path}: expected {1 + 2 * n} lines, found {len(lines)}")
    section = np.array([[float(v) for v in ln.split()] for ln in lines[1:1 + n]])
    section = section.reshape(grid.shape + (section.shape[1],))
    lk = np.array([[float(v) for v in ln.split()] for ln in lines[1 + n:]])
    links = lk.T.reshape((2,) + grid.shape).copy()
    return grid, links, section, t
