"""Finite-element discretizations on the adaptive quadtree mesh.

Two variants share the piecewise affine primal space:

* the lumped scheme keeps nodal dual vectors and defines the divergence as
  the L2 projection of the elementwise divergence; gradient and divergence
  are exact adjoints with respect to the mass / lumped-mass products,
* the elementwise scheme uses the exact piecewise constant gradient with a
  per-simplex dual vector, paired through the lumped product on the primal
  side; it is non-conforming and its dual must be projected onto nodal
  vector fields before the certificate is evaluated.

All operators act on DOF vectors (non-hanging nodes); hanging values are
expanded through the mesh constraints where elementwise data is needed.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputError
from .model import ThetaFields, check_binary
from .quadmesh import QuadMesh
from .quadrature import TRI_BARY, TRI_WEIGHTS

#: relative feasibility tolerance for |q| <= 1
FEAS_TOL = 1e-9

#: squared operator-norm bound constants, times h_min^-2
NORM_CONST_FE = 96.0 * (3.0 + 2.0 * np.sqrt(2.0))
NORM_CONST_FEP = 48.0 * (3.0 + 2.0 * np.sqrt(2.0))


def radial_project(q) -> np.ndarray:
    """Rowwise projection of 2-vectors onto the closed unit ball."""
    q = np.asarray(q, dtype=float)
    norms = np.sqrt(np.sum(q * q, axis=-1))
    return q / np.maximum(norms, 1.0)[..., None]


def fe_boundary_fix(mesh: QuadMesh, q) -> np.ndarray:
    """Zero the outward normal components of a nodal dual field.

    Left/right boundary nodes lose the x component, bottom/top nodes the y
    component; corner nodes lose both, since two normals meet there.
    """
    q = np.asarray(q, dtype=float).copy()
    nodes = mesh.dof_nodes
    q[mesh.node_on_left[nodes] | mesh.node_on_right[nodes], 0] = 0.0
    q[mesh.node_on_bottom[nodes] | mesh.node_on_top[nodes], 1] = 0.0
    return q


class _FeBase:
    """State shared by both finite-element variants."""

    def __init__(self, mesh: QuadMesh, theta: ThetaFields):
        if theta.theta1.shape != (mesh.n_dof,):
            raise InputError("theta fields do not match the mesh DOFs")
        self.mesh = mesh
        self.theta = theta
        self.m_lump = mesh.lumped_mass()
        self.mass = mesh.mass()
        self.m_theta1 = mesh.assemble_mass(theta.theta1, positive=False)
        self.m_theta2 = mesh.assemble_mass(theta.theta2, positive=False)
        self._prox_solvers: dict[float, object] = {}
        # P1 values of expanded fields at the triangle quadrature points
        t = mesh.triangles
        self._theta1_hat = mesh.expand(theta.theta1)
        self._theta2_hat = mesh.expand(theta.theta2)
        self._t1_qp = self._theta1_hat[t] @ TRI_BARY.T  # (n_tri, 6)
        self._t2_qp = self._theta2_hat[t] @ TRI_BARY.T

    @property
    def n_dof(self) -> int:
        return self.mesh.n_dof

    def zero_primal(self) -> np.ndarray:
        return np.zeros(self.mesh.n_dof)

    def resolvent_Gstar(self, v, tau: float) -> np.ndarray:
        """Weighted-mass proximal step of the quadratic data term.

        Solves M[1 + 2 tau (theta1 + theta2)] y = M (v + 2 tau theta2);
        the factorization is computed once per step size and reused.
        """
        solver = self._prox_solvers.get(tau)
        if solver is None:
            a = (self.mass + 2.0 * tau * (self.m_theta1 + self.m_theta2)).tocsc()
            solver = spla.factorized(a)
            self._prox_solvers[tau] = solver
        rhs = self.mass @ (np.asarray(v, dtype=float) + 2.0 * tau * self.theta.theta2)
        return solver(rhs)

    def energy_data(self, v) -> float:
        """Exact integral of v^2 theta1 + (1-v)^2 theta2 for P1 fields."""
        v = np.asarray(v, dtype=float)
        w = 1.0 - v
        return float(v @ (self.m_theta1 @ v) + w @ (self.m_theta2 @ w))

    def _energy_G(self, w) -> float:
        """Quadrature of (w^2/4 + w theta2 - theta1 theta2)/(theta1+theta2)."""
        what = self.mesh.expand(np.asarray(w, dtype=float))
        w_qp = what[self.mesh.triangles] @ TRI_BARY.T
        t1, t2 = self._t1_qp, self._t2_qp
        integrand = (0.25 * w_qp**2 + w_qp * t2 - t1 * t2) / (t1 + t2)
        return float(np.sum(self.mesh.tri_area * (integrand @ TRI_WEIGHTS)))

    def tri_gradient(self, v) -> np.ndarray:
        """(n_tri, 2) piecewise constant gradient of a P1 DOF field."""
        vhat = self.mesh.expand(np.asarray(v, dtype=float))
        return np.einsum("tk,tkd->td", vhat[self.mesh.triangles], self.mesh.tri_grads)


class FeScheme(_FeBase):
    """Lumped-dual finite-element scheme (nodal dual vectors)."""

    kind = "fe"

    def __init__(self, mesh: QuadMesh, theta: ThetaFields):
        super().__init__(mesh, theta)
        self._bx, self._by = self._pairing_matrices()

    def _pairing_matrices(self):
        """Sparse matrices of int phi_i d_c phi_v dx on the DOF space."""
        mesh = self.mesh
        t = mesh.triangles
        g = mesh.tri_grads
        rows, cols, vx, vy = [], [], [], []
        for a in range(3):
            for b in range(3):
                rows.append(t[:, a])
                cols.append(t[:, b])
                vx.append(mesh.tri_area / 3.0 * g[:, b, 0])
                vy.append(mesh.tri_area / 3.0 * g[:, b, 1])
        shape = (mesh.n_nodes, mesh.n_nodes)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        c = mesh.constraints
        bx = (c.T @ sp.coo_matrix((np.concatenate(vx), (rows, cols)), shape=shape) @ c).tocsr()
        by = (c.T @ sp.coo_matrix((np.concatenate(vy), (rows, cols)), shape=shape) @ c).tocsr()
        return bx, by

    def zero_dual(self) -> np.ndarray:
        return np.zeros((self.mesh.n_dof, 2))

    def gradient(self, v) -> np.ndarray:
        """Discrete gradient: the lumped-product adjoint of the divergence.

        The result lies in the constrained dual space: boundary-normal
        components carry no dual degree of freedom and are zeroed (they are
        exactly the components a boundary integral would otherwise pick up,
        so constants get an exactly vanishing gradient).
        """
        v = np.asarray(v, dtype=float)
        g = -np.stack([self._bx.T @ v, self._by.T @ v], axis=1) / self.m_lump[:, None]
        return fe_boundary_fix(self.mesh, g)

    def divergence(self, q) -> np.ndarray:
        """L2 projection of the elementwise divergence of a nodal field."""
        q = np.asarray(q, dtype=float)
        return self.mesh.mass_solve(self._bx @ q[:, 0] + self._by @ q[:, 1])

    def resolvent_F(self, q, sigma: float = 0.0) -> np.ndarray:
        return radial_project(q)

    def boundary_fix(self, q) -> np.ndarray:
        return fe_boundary_fix(self.mesh, q)

    def norm_bound(self) -> float:
        return NORM_CONST_FE / self.mesh.h_min**2

    def norm_estimate(self, iters: int = 200, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        q = rng.standard_normal((self.mesh.n_dof, 2))
        est = 0.0
        for _ in range(iters):
            z = self.divergence(q)
            est = float(z @ (self.mass @ z) / np.sum(self.m_lump[:, None] * q * q))
            w = -self.gradient(z)
            q = w / np.linalg.norm(w)
        return est

    def feasible(self, q) -> bool:
        norms = np.sqrt(np.sum(np.asarray(q, dtype=float) ** 2, axis=1))
        return bool(norms.max() <= 1.0 + FEAS_TOL)

    def energy_relaxed(self, v) -> float:
        g = self.gradient(v)
        tv = float(self.m_lump @ np.sqrt(np.sum(g * g, axis=1)))
        return tv + self.energy_data(v)

    def energy_predual(self, q) -> float:
        if not self.feasible(q):
            return float("inf")
        return self._energy_G(self.divergence(q))

    def energy_binary(self, chi) -> float:
        chi = check_binary(chi)
        g = self.gradient(chi)
        tv = float(self.m_lump @ np.sqrt(np.sum(g * g, axis=1)))
        return tv + self.energy_data(chi)


class FePrimeScheme(_FeBase):
    """Elementwise-dual finite-element scheme (exact P1 gradient)."""

    kind = "fe_prime"

    def __init__(self, mesh: QuadMesh, theta: ThetaFields):
        super().__init__(mesh, theta)
        self._dx, self._dy = self._grad_matrices()
        tb = mesh.node_on_left | mesh.node_on_right | mesh.node_on_bottom | mesh.node_on_top
        self.tri_on_boundary = tb[mesh.triangles].any(axis=1)
        self._pm = self._dual_projection_matrix()

    def _grad_matrices(self):
        mesh = self.mesh
        t = mesh.triangles
        g = mesh.tri_grads
        n_tri = mesh.n_tri
        rows = np.repeat(np.arange(n_tri), 3)
        cols = t.ravel()
        shape = (n_tri, mesh.n_nodes)
        dx = sp.coo_matrix((g[:, :, 0].ravel(), (rows, cols)), shape=shape)
        dy = sp.coo_matrix((g[:, :, 1].ravel(), (rows, cols)), shape=shape)
        return (dx @ mesh.constraints).tocsr(), (dy @ mesh.constraints).tocsr()

    def _dual_projection_matrix(self):
        """Matrix of int phi_i 1_T dx, for projecting elementwise duals."""
        mesh = self.mesh
        t = mesh.triangles
        rows = t.ravel()
        cols = np.repeat(np.arange(mesh.n_tri), 3)
        vals = np.repeat(mesh.tri_area / 3.0, 3)
        p_full = sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_nodes, mesh.n_tri))
        return (mesh.constraints.T @ p_full).tocsr()

    def zero_dual(self) -> np.ndarray:
        return np.zeros((self.mesh.n_tri, 2))

    def gradient(self, v) -> np.ndarray:
        """Exact piecewise constant gradient on the simplices."""
        v = np.asarray(v, dtype=float)
        return np.stack([self._dx @ v, self._dy @ v], axis=1)

    def divergence(self, q) -> np.ndarray:
        """Lumped-product dual of the negative gradient pairing."""
        q = np.asarray(q, dtype=float)
        a = self.mesh.tri_area
        rhs = -(self._dx.T @ (a * q[:, 0]) + self._dy.T @ (a * q[:, 1]))
        return rhs / self.m_lump

    def resolvent_F(self, q, sigma: float = 0.0) -> np.ndarray:
        return radial_project(q)

    def boundary_fix(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).copy()
        q[self.tri_on_boundary] = 0.0
        return q

    def norm_bound(self) -> float:
        return NORM_CONST_FEP / self.mesh.h_min**2

    def norm_estimate(self, iters: int = 200, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        q = rng.standard_normal((self.mesh.n_tri, 2))
        a = self.mesh.tri_area
        est = 0.0
        for _ in range(iters):
            z = self.divergence(q)
            est = float((self.m_lump @ z**2) / np.sum(a[:, None] * q * q))
            w = -self.gradient(z)
            q = w / np.linalg.norm(w)
        return est

    def feasible(self, q) -> bool:
        norms = np.sqrt(np.sum(np.asarray(q, dtype=float) ** 2, axis=1))
        return bool(norms.max() <= 1.0 + FEAS_TOL)

    def project_dual(self, q) -> np.ndarray:
        """Nodal representative of an elementwise dual field.

        Componentwise L2 projection onto the P1 space, followed by nodal
        radial rescaling and the boundary fix, so the result is feasible
        and has zero normal trace.  The rescaling guards against the small
        unit-ball violations the projection can introduce.
        """
        q = np.asarray(q, dtype=float)
        x = np.stack(
            [self.mesh.mass_solve(self._pm @ q[:, 0]), self.mesh.mass_solve(self._pm @ q[:, 1])],
            axis=1,
        )
        return fe_boundary_fix(self.mesh, radial_project(x))

    def project_dual_lumped(self, q) -> np.ndarray:
        """Lumped-product projection of an elementwise dual onto nodal vectors.

        Each nodal value is the area-weighted average of the surrounding
        simplex values, a convex combination, so feasibility is preserved
        without rescaling and elementwise oscillation is damped rather than
        amplified.  Used as a certificate candidate alongside project_dual.
        """
        q = np.asarray(q, dtype=float)
        x = np.stack(
            [(self._pm @ q[:, 0]) / self.m_lump, (self._pm @ q[:, 1]) / self.m_lump],
            axis=1,
        )
        return fe_boundary_fix(self.mesh, radial_project(x))

    def energy_relaxed(self, v) -> float:
        g = self.tri_gradient(v)
        tv = float(self.mesh.tri_area @ np.sqrt(np.sum(g * g, axis=1)))
        return tv + self.energy_data(v)

    def energy_predual(self, q) -> float:
        if not self.feasible(q):
            return float("inf")
        return self._energy_G(self.divergence(q))

    def energy_binary(self, chi) -> float:
        chi = check_binary(chi)
        g = self.tri_gradient(chi)
        tv = float(self.mesh.tri_area @ np.sqrt(np.sum(g * g, axis=1)))
        return tv + self.energy_data(chi)
