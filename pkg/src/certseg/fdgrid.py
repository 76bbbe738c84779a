"""Finite-difference discretization on a regular lattice over [0,1]^2.

The solver operates on nodal vectors with a forward-difference gradient
under periodic index identification (the neighbor index wraps around at
the boundary), so the divergence is exactly the negative transpose of the
gradient matrix.  Energies are node sums normalized by the node count, so
constants integrate to |Omega| = 1.

For the a posteriori certificate, nodal vectors are embedded as piecewise
bilinear functions on the lattice cells; dual fields get their outward
normal components zeroed at boundary nodes first so the embedding has a
vanishing normal trace.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InputError
from .model import ThetaFields, check_binary

#: relative feasibility tolerance for |q| <= 1
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class Lattice:
    """Regular (n x n)-node lattice on [0,1]^2 with spacing h = 1/(n-1).

    Level-constructed lattices have n = 2^L + 1 so that h = 2^-L matches
    an image pyramid; arbitrary n >= 2 is allowed for small test problems.
    """

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise InputError("lattice needs at least 2 nodes per side")

    @classmethod
    def from_level(cls, level: int) -> "Lattice":
        if level < 0:
            raise InputError("level must be nonnegative")
        return cls(2**level + 1)

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def n_nodes(self) -> int:
        return self.n * self.n

    @property
    def node_weight(self) -> float:
        """Uniform quadrature weight making sum(w) = |Omega| = 1."""
        return 1.0 / self.n_nodes

    def check_primal(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n, self.n):
            raise InputError(f"expected ({self.n},{self.n}) nodal field")
        return v

    def check_dual(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.n, self.n, 2):
            raise InputError(f"expected ({self.n},{self.n},2) dual field")
        return q

    def node_positions(self) -> np.ndarray:
        """(n, n, 2) array of (x, y) coordinates; index [i, j] = (j h, i h)."""
        h = self.h
        j, i = np.meshgrid(np.arange(self.n), np.arange(self.n))
        return np.stack([j * h, i * h], axis=-1)


def fd_gradient(v, lat: Lattice) -> np.ndarray:
    """Forward-difference gradient with periodic neighbor indices.

    Component [..., 0] is the x-difference, [..., 1] the y-difference.
    """
    v = lat.check_primal(v)
    h = lat.h
    gx = (np.roll(v, -1, axis=1) - v) / h
    gy = (np.roll(v, -1, axis=0) - v) / h
    return np.stack([gx, gy], axis=-1)


def fd_divergence(q, lat: Lattice) -> np.ndarray:
    """Backward-difference divergence, the negative transpose of the gradient."""
    q = lat.check_dual(q)
    h = lat.h
    qx, qy = q[..., 0], q[..., 1]
    return (qx - np.roll(qx, 1, axis=1)) / h + (qy - np.roll(qy, 1, axis=0)) / h


def fd_resolvent_F(q, sigma: float = 0.0) -> np.ndarray:
    """Nodewise radial projection onto the closed unit ball (sigma-independent)."""
    q = np.asarray(q, dtype=float)
    norms = np.sqrt(np.sum(q * q, axis=-1))
    return q / np.maximum(norms, 1.0)[..., None]


def fd_resolvent_Gstar(v, tau: float, theta: ThetaFields) -> np.ndarray:
    """Pointwise proximal step of the quadratic data term.

    Minimizes (y - v)^2 + 2 tau (y^2 theta1 + (1-y)^2 theta2) per node.
    """
    v = np.asarray(v, dtype=float)
    return (v + 2.0 * tau * theta.theta2) / (1.0 + 2.0 * tau * theta.sum)


def fd_norm_bound(lat: Lattice) -> float:
    """Closed-form bound 8 / h^2 on the squared divergence operator norm."""
    return 8.0 / lat.h**2


def fd_norm_estimate(lat: Lattice, iters: int = 200, seed: int = 0) -> float:
    """Power-iteration estimate of the squared operator norm (validation)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((lat.n, lat.n))
    est = 0.0
    for _ in range(iters):
        g = fd_gradient(v, lat)
        w = -fd_divergence(g, lat)  # grad^T grad
        est = float(np.sum(g * g) / np.sum(v * v))
        v = w / np.linalg.norm(w)
    return est


def fd_boundary_fix_embed(q, lat: Lattice) -> np.ndarray:
    """Copy of a dual field with outward normal components zeroed on the boundary.

    Left/right columns lose the x component, bottom/top rows the y
    component; corners lose both.  The bilinear embedding of the result has
    zero normal trace on all of the boundary.
    """
    q = lat.check_dual(q).copy()
    q[:, 0, 0] = 0.0
    q[:, -1, 0] = 0.0
    q[0, :, 1] = 0.0
    q[-1, :, 1] = 0.0
    return q


class BilinearField:
    """Piecewise bilinear interpolant of nodal lattice values.

    values may be (n, n) scalars or (n, n, 2) vectors.  Evaluation outside
    [0,1]^2 is rejected.
    """

    def __init__(self, lat: Lattice, values):
        self.lat = lat
        self.values = np.asarray(values, dtype=float)
        if self.values.shape[:2] != (lat.n, lat.n):
            raise InputError("values do not match the lattice")

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)):
            raise InputError("evaluation point outside [0,1]^2")
        h = self.lat.h
        j = np.clip((x / h).astype(int), 0, self.lat.n - 2)
        i = np.clip((y / h).astype(int), 0, self.lat.n - 2)
        s = x / h - j
        t = y / h - i
        v = self.values
        if v.ndim == 3:
            s, t = s[:, None], t[:, None]
        out = (
            (1 - s) * (1 - t) * v[i, j]
            + s * (1 - t) * v[i, j + 1]
            + (1 - s) * t * v[i + 1, j]
            + s * t * v[i + 1, j + 1]
        )
        return out


def fd_embed_bilinear(values, lat: Lattice, dual: bool = False) -> BilinearField:
    """Bilinear interpolant; dual fields are boundary-fixed first."""
    if dual:
        values = fd_boundary_fix_embed(values, lat)
    return BilinearField(lat, values)


def _mass_1d(lat: Lattice) -> sp.csr_matrix:
    n, h = lat.n, lat.h
    main = np.full(n, 2.0 * h / 3.0)
    main[0] = main[-1] = h / 3.0
    off = np.full(n - 1, h / 6.0)
    return sp.diags([off, main, off], [-1, 0, 1]).tocsr()


def lattice_l2_normsq(v, lat: Lattice) -> float:
    """Exact squared L2(Omega) norm of the bilinear embedding of v."""
    v = lat.check_primal(v)
    m1 = _mass_1d(lat)
    return float(np.sum(v * (m1 @ (m1 @ v).T).T))


class FdScheme:
    """Finite-difference scheme bound to a lattice and fixed weight fields.

    Provides the operator/resolvent quintet used by the primal-dual solver
    plus the discrete energies.  All methods are pure; the object is safe
    to share across threads.
    """

    kind = "fd"

    def __init__(self, lat: Lattice, theta: ThetaFields):
        if theta.theta1.shape != (lat.n, lat.n):
            raise InputError("theta fields do not match the lattice")
        self.lat = lat
        self.theta = theta

    # --- solver interface -------------------------------------------------
    @property
    def n_dof(self) -> int:
        return self.lat.n_nodes

    def zero_primal(self) -> np.ndarray:
        return np.zeros((self.lat.n, self.lat.n))

    def zero_dual(self) -> np.ndarray:
        return np.zeros((self.lat.n, self.lat.n, 2))

    def gradient(self, v) -> np.ndarray:
        return fd_gradient(v, self.lat)

    def divergence(self, q) -> np.ndarray:
        return fd_divergence(q, self.lat)

    def resolvent_F(self, q, sigma: float = 0.0) -> np.ndarray:
        return fd_resolvent_F(q, sigma)

    def resolvent_Gstar(self, v, tau: float) -> np.ndarray:
        return fd_resolvent_Gstar(v, tau, self.theta)

    def boundary_fix(self, q) -> np.ndarray:
        # periodic identification needs no in-iteration boundary handling
        return q

    def norm_bound(self) -> float:
        return fd_norm_bound(self.lat)

    def norm_estimate(self, iters: int = 200) -> float:
        return fd_norm_estimate(self.lat, iters)

    # --- energies ---------------------------------------------------------
    def energy_relaxed(self, v) -> float:
        v = self.lat.check_primal(v)
        w = self.lat.node_weight
        g = fd_gradient(v, self.lat)
        tv = np.sum(np.sqrt(np.sum(g * g, axis=-1)))
        data = np.sum(v**2 * self.theta.theta1 + (1.0 - v) ** 2 * self.theta.theta2)
        return float(w * (tv + data))

    def energy_predual(self, q) -> float:
        q = self.lat.check_dual(q)
        norms = np.sqrt(np.sum(q * q, axis=-1))
        if norms.max() > 1.0 + FEAS_TOL:
            return float("inf")
        w = self.lat.node_weight
        d = fd_divergence(q, self.lat)
        t1, t2 = self.theta.theta1, self.theta.theta2
        g = (0.25 * d**2 + d * t2 - t1 * t2) / (t1 + t2)
        return float(w * np.sum(g))

    def energy_binary(self, chi) -> float:
        chi = check_binary(self.lat.check_primal(chi))
        w = self.lat.node_weight
        g = fd_gradient(chi, self.lat)
        tv = np.sum(np.sqrt(np.sum(g * g, axis=-1)))
        data = np.sum(chi * self.theta.theta1 + (1.0 - chi) * self.theta.theta2)
        return float(w * (tv + data))
