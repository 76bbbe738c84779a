"""1-irregular adaptive quadtree mesh on [0,1]^2 with a simplicial overlay.

Leaf cells are dyadic squares addressed by (level, ix, iy); every leaf is
cross subdivided into four triangles meeting at an added center node.
Edge-adjacent leaves differ by at most one level, so each edge carries at
most one hanging node.  Hanging nodes carry no degree of freedom: their
value is the average of the two endpoints of the coarse edge they sit on.

Because the two diagonals of every dyadic square are grid lines of all
finer dyadic squares, the simplicial overlays are nested across
refinement: every fine triangle lies inside exactly one coarse triangle.
Piecewise affine functions therefore prolong exactly, and quadrature over
finest-level subcells never straddles a coarse triangle.

Node coordinates are stored as integers at scale 2^(max_level + 1), which
makes node identification across leaves exact.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputError
from .quadrature import TRI_BARY, TRI_WEIGHTS

# integral of phi_a phi_b phi_c over a unit-area triangle
_T3 = np.empty((3, 3, 3))
for _a in range(3):
    for _b in range(3):
        for _c in range(3):
            if _a == _b == _c:
                _T3[_a, _b, _c] = 1.0 / 10.0
            elif _a == _b or _b == _c or _a == _c:
                _T3[_a, _b, _c] = 1.0 / 30.0
            else:
                _T3[_a, _b, _c] = 1.0 / 60.0


def _interleave(a: int) -> int:
    r, i = 0, 0
    while a:
        r |= (a & 1) << (2 * i)
        a >>= 1
        i += 1
    return r


def _morton(x: int, y: int) -> int:
    return _interleave(x) | (_interleave(y) << 1)


def wedge_index(s, t):
    """Cross-subdivision wedge (0=S, 1=E, 2=N, 3=W) of cell-local coords."""
    in_s = t <= np.minimum(s, 1.0 - s)
    in_e = (s >= np.maximum(t, 1.0 - t)) & ~in_s
    in_n = (t >= np.maximum(s, 1.0 - s)) & ~in_s & ~in_e
    return np.where(in_s, 0, np.where(in_e, 1, np.where(in_n, 2, 3)))


class QuadMesh:
    """Immutable 1-irregular quadtree with cross-subdivided triangles.

    Construct via `QuadMesh.uniform` and `refine`; the constructor accepts
    a leaf set that already satisfies 1-irregularity (`refine` restores the
    property transitively before building).
    """

    def __init__(self, leaves, max_level: int):
        leaves = set(leaves)
        if not leaves:
            raise InputError("empty leaf set")
        if max(lv for lv, _, _ in leaves) > max_level:
            raise InputError("leaf level exceeds max_level")
        self.max_level = max_level
        self._scale = 1 << (max_level + 1)
        # Morton order over lower-left corners at the finest scale
        self.leaves = sorted(
            leaves,
            key=lambda c: _morton(
                c[1] << (max_level - c[0]), c[2] << (max_level - c[0])
            ),
        )
        self._leaf_set = leaves
        self._build()

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------
    @classmethod
    def uniform(cls, level: int, max_level: int | None = None) -> "QuadMesh":
        if max_level is None:
            max_level = level
        if level > max_level:
            raise InputError("level exceeds max_level")
        n = 1 << level
        return cls({(level, i, j) for i in range(n) for j in range(n)}, max_level)

    def refine(self, cells) -> "QuadMesh":
        """Split the given leaf cells, restoring 1-irregularity transitively.

        Cells already at max_level are left untouched (refining past the
        input resolution is a no-op per cell).  Returns a new mesh.
        """
        leaves = set(self._leaf_set)
        pending = [c for c in cells]
        while pending:
            cell = pending.pop()
            if cell not in leaves:
                continue
            lv, ix, iy = cell
            if lv >= self.max_level:
                continue
            leaves.remove(cell)
            children = [
                (lv + 1, 2 * ix + dx, 2 * iy + dy)
                for dy in (0, 1)
                for dx in (0, 1)
            ]
            leaves.update(children)
            # closure: an edge neighbor coarser by 2+ levels must split too
            for clv, cx, cy in children:
                for nx, ny in ((cx - 1, cy), (cx + 1, cy), (cx, cy - 1), (cx, cy + 1)):
                    if nx < 0 or ny < 0 or nx >= (1 << clv) or ny >= (1 << clv):
                        continue
                    alv, ax, ay = clv, nx, ny
                    while alv > 0 and (alv, ax, ay) not in leaves:
                        alv, ax, ay = alv - 1, ax >> 1, ay >> 1
                    if (alv, ax, ay) in leaves and alv <= clv - 2:
                        pending.append((alv, ax, ay))
        return QuadMesh(leaves, self.max_level)

    def _build(self):
        S = self._scale
        node_id: dict[tuple[int, int], int] = {}
        node_list: list[tuple[int, int]] = []

        def register(pos):
            idx = node_id.get(pos)
            if idx is None:
                idx = len(node_list)
                node_id[pos] = idx
                node_list.append(pos)
            return idx

        corners = np.empty((len(self.leaves), 4), dtype=int)  # SW SE NE NW
        for k, (lv, ix, iy) in enumerate(self.leaves):
            c = S >> lv
            x0, y0 = ix * c, iy * c
            corners[k] = [
                register((x0, y0)),
                register((x0 + c, y0)),
                register((x0 + c, y0 + c)),
                register((x0, y0 + c)),
            ]
        n_corner_nodes = len(node_list)
        centers = np.empty(len(self.leaves), dtype=int)
        for k, (lv, ix, iy) in enumerate(self.leaves):
            c = S >> lv
            centers[k] = register((ix * c + c // 2, iy * c + c // 2))

        # hanging nodes: corner nodes sitting mid-edge of a coarser leaf
        hanging: dict[int, tuple[int, int]] = {}
        for k in range(len(self.leaves)):
            ids = corners[k]
            for e in range(4):
                a, b = ids[e], ids[(e + 1) % 4]
                pa, pb = node_list[a], node_list[b]
                mid = ((pa[0] + pb[0]) // 2, (pa[1] + pb[1]) // 2)
                m = node_id.get(mid)
                if m is not None and m < n_corner_nodes:
                    hanging[m] = (a, b)
                # 1-irregularity: no node may sit at an edge quarter point
                if abs(pb[0] - pa[0]) + abs(pb[1] - pa[1]) >= 4:
                    for frac in (1, 3):
                        qp = (
                            pa[0] + (pb[0] - pa[0]) * frac // 4,
                            pa[1] + (pb[1] - pa[1]) * frac // 4,
                        )
                        q_idx = node_id.get(qp, -1)
                        if 0 <= q_idx < n_corner_nodes:
                            raise InputError("leaf set violates 1-irregularity")

        self.node_pos_int = np.array(node_list, dtype=int)
        self.node_pos = self.node_pos_int / S
        self.n_nodes = len(node_list)
        self.leaf_corners = corners
        self.leaf_centers = centers
        self.leaf_levels = np.array([lv for lv, _, _ in self.leaves])
        self.hanging = hanging
        for m, (a, b) in hanging.items():
            if a in hanging or b in hanging:
                raise AssertionError("hanging node with hanging parent")

        # DOF numbering over non-hanging nodes, in node order
        self.dof_of_node = np.full(self.n_nodes, -1, dtype=int)
        dof = 0
        for i in range(self.n_nodes):
            if i not in hanging:
                self.dof_of_node[i] = dof
                dof += 1
        self.n_dof = dof
        self.dof_nodes = np.flatnonzero(self.dof_of_node >= 0)

        rows, cols, vals = [], [], []
        for i in range(self.n_nodes):
            if i in hanging:
                a, b = hanging[i]
                rows += [i, i]
                cols += [self.dof_of_node[a], self.dof_of_node[b]]
                vals += [0.5, 0.5]
            else:
                rows.append(i)
                cols.append(self.dof_of_node[i])
                vals.append(1.0)
        self.constraints = sp.csr_matrix(
            (vals, (rows, cols)), shape=(self.n_nodes, self.n_dof)
        )

        # triangles: (SW,SE,C) (SE,NE,C) (NE,NW,C) (NW,SW,C) per leaf
        tris = []
        for k in range(len(self.leaves)):
            sw, se, ne, nw = corners[k]
            c = centers[k]
            tris += [(sw, se, c), (se, ne, c), (ne, nw, c), (nw, sw, c)]
        self.triangles = np.array(tris, dtype=int)
        self.tri_leaf = np.repeat(np.arange(len(self.leaves)), 4)
        p = self.node_pos[self.triangles]  # (n_tri, 3, 2)
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        self.tri_area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(self.tri_area <= 0):
            raise AssertionError("non-CCW triangle")
        d = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
        perp = np.stack([-d[..., 1], d[..., 0]], axis=-1)
        self.tri_grads = perp / (2.0 * self.tri_area)[:, None, None]

        self._leaf_index = {c: k for k, c in enumerate(self.leaves)}
        self._mass = None
        self._mass_solve = None

        pos = self.node_pos
        self.node_on_left = pos[:, 0] == 0.0
        self.node_on_right = pos[:, 0] == 1.0
        self.node_on_bottom = pos[:, 1] == 0.0
        self.node_on_top = pos[:, 1] == 1.0

    # ------------------------------------------------------------------
    # basic queries
    # ------------------------------------------------------------------
    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def n_tri(self) -> int:
        return len(self.triangles)

    @property
    def h_min(self) -> float:
        return 2.0 ** (-int(self.leaf_levels.max()))

    @property
    def h_avg(self) -> float:
        """Count-weighted mean of the leaf edge lengths."""
        return float(np.mean(2.0 ** (-self.leaf_levels.astype(float))))

    def dof_positions(self) -> np.ndarray:
        return self.node_pos[self.dof_nodes]

    def expand(self, u) -> np.ndarray:
        """DOF vector -> values at all nodes (hanging values interpolated)."""
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.n_dof:
            raise InputError("field does not match the mesh DOFs")
        return self.constraints @ u

    # ------------------------------------------------------------------
    # assembly
    # ------------------------------------------------------------------
    def _condense(self, a_full: sp.spmatrix) -> sp.csr_matrix:
        c = self.constraints
        return (c.T @ a_full @ c).tocsr()

    def assemble_mass(self, weight=None, positive: bool = True) -> sp.csr_matrix:
        """Consistent P1 mass matrix, optionally weighted by a nodal field.

        The weight is a DOF vector interpreted as a piecewise affine
        function; entries are exact integrals of w*phi_i*phi_j.  With
        positive=True (the default) nonpositive weights are rejected so the
        result is guaranteed SPD.
        """
        t = self.triangles
        if weight is None:
            wloc = None
        else:
            w = self.expand(weight)
            if positive and np.any(w <= 0.0):
                raise InputError("weight field must be positive for an SPD mass matrix")
            if np.any(w < 0.0):
                raise InputError("weight field must be nonnegative")
            wloc = w[t]  # (n_tri, 3)
        rows, cols, vals = [], [], []
        for a in range(3):
            for b in range(3):
                rows.append(t[:, a])
                cols.append(t[:, b])
                if wloc is None:
                    coef = 1.0 / 6.0 if a == b else 1.0 / 12.0
                    vals.append(coef * self.tri_area)
                else:
                    coefs = _T3[a, b]  # (3,)
                    vals.append(self.tri_area * (wloc @ coefs))
        a_full = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_nodes, self.n_nodes),
        )
        return self._condense(a_full)

    def assemble_stiffness(self) -> sp.csr_matrix:
        """P1 stiffness matrix; constants span its kernel."""
        t = self.triangles
        g = self.tri_grads
        rows, cols, vals = [], [], []
        for a in range(3):
            for b in range(3):
                rows.append(t[:, a])
                cols.append(t[:, b])
                vals.append(self.tri_area * np.sum(g[:, a] * g[:, b], axis=1))
        a_full = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_nodes, self.n_nodes),
        )
        return self._condense(a_full)

    def lumped_mass(self) -> np.ndarray:
        """Diagonal of the lumped mass matrix (row sums of the consistent one)."""
        m_full_rowsum = np.zeros(self.n_nodes)
        t = self.triangles
        for a in range(3):
            np.add.at(m_full_rowsum, t[:, a], self.tri_area / 3.0)
        return self.constraints.T @ m_full_rowsum

    def mass(self) -> sp.csr_matrix:
        if self._mass is None:
            self._mass = self.assemble_mass()
        return self._mass

    def mass_solve(self, b) -> np.ndarray:
        if self._mass_solve is None:
            self._mass_solve = spla.factorized(self.mass().tocsc())
        return self._mass_solve(np.asarray(b, dtype=float))

    # ------------------------------------------------------------------
    # interpolation / projection / evaluation
    # ------------------------------------------------------------------
    def interpolate(self, f) -> np.ndarray:
        """Nodal interpolation: evaluate f at the non-hanging node positions."""
        return np.asarray(f(self.dof_positions()), dtype=float)

    def project_L2(self, g) -> np.ndarray:
        """L2 projection of a point-evaluable function onto the P1 space."""
        p = self.node_pos[self.triangles]  # (n_tri, 3, 2)
        qpts = np.einsum("qk,tkd->tqd", TRI_BARY, p)  # (n_tri, 6, 2)
        gv = np.asarray(g(qpts.reshape(-1, 2)), dtype=float).reshape(qpts.shape[:2])
        b_full = np.zeros(self.n_nodes)
        for a in range(3):
            contrib = self.tri_area * np.sum(TRI_WEIGHTS * TRI_BARY[:, a] * gv, axis=1)
            np.add.at(b_full, self.triangles[:, a], contrib)
        return self.mass_solve(self.constraints.T @ b_full)

    def locate(self, points):
        """Leaf index and local coordinates of each point (must lie in [0,1]^2)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any((pts < 0.0) | (pts > 1.0)):
            raise InputError("evaluation point outside [0,1]^2")
        leaf_idx = np.empty(len(pts), dtype=int)
        loc = np.empty((len(pts), 2))
        for i, (x, y) in enumerate(pts):
            lv, ix, iy = 0, 0, 0
            while (lv, ix, iy) not in self._leaf_set:
                if lv > self.max_level:
                    raise AssertionError("point location failed; leaves do not tile")
                size = 2.0**-lv
                ix = 2 * ix + (1 if x >= (ix + 0.5) * size else 0)
                iy = 2 * iy + (1 if y >= (iy + 0.5) * size else 0)
                lv += 1
            leaf_idx[i] = self._leaf_index[(lv, ix, iy)]
            size = 2.0**-lv
            loc[i] = ((x - ix * size) / size, (y - iy * size) / size)
        return leaf_idx, loc

    def eval_P1(self, u, points) -> np.ndarray:
        """Evaluate the piecewise affine function given by DOF values.

        u may be (n_dof,) or (n_dof, m); vector fields evaluate columnwise.
        """
        uhat = self.expand(u)
        leaf_idx, loc = self.locate(points)
        s, t = loc[:, 0], loc[:, 1]
        c = self.leaf_corners[leaf_idx]
        usw, use_, une, unw = (uhat[c[:, k]] for k in range(4))
        uc = uhat[self.leaf_centers[leaf_idx]]
        # wedge pick: S, E, N, W of the cross subdivision
        in_s = t <= np.minimum(s, 1.0 - s)
        in_e = (s >= np.maximum(t, 1.0 - t)) & ~in_s
        in_n = (t >= np.maximum(s, 1.0 - s)) & ~in_s & ~in_e
        if uhat.ndim == 2:
            s, t = s[:, None], t[:, None]
            in_s, in_e, in_n = in_s[:, None], in_e[:, None], in_n[:, None]
        alpha = np.where(
            in_s, usw, np.where(in_e, 2 * uc - une, np.where(in_n, 2 * uc - une, usw))
        )
        beta = np.where(
            in_s,
            use_ - usw,
            np.where(
                in_e,
                use_ + une - 2 * uc,
                np.where(in_n, une - unw, 2 * uc - usw - unw),
            ),
        )
        gamma = np.where(
            in_s,
            2 * uc - usw - use_,
            np.where(
                in_e,
                une - use_,
                np.where(in_n, unw - 2 * uc + une, unw - usw),
            ),
        )
        return alpha + beta * s + gamma * t

    # ------------------------------------------------------------------
    # diagnostics
    # ------------------------------------------------------------------
    def dump(self) -> str:
        """Debug listing: leaves in Morton order plus the hanging-node table."""
        lines = [f"leaf {lv} {ix} {iy}" for lv, ix, iy in self.leaves]
        for m in sorted(self.hanging):
            a, b = self.hanging[m]
            mx, my = self.node_pos_int[m]
            lines.append(
                "hanging %d %d <- %d %d , %d %d"
                % (mx, my, *self.node_pos_int[a], *self.node_pos_int[b])
            )
        return "\n".join(lines) + "\n"
