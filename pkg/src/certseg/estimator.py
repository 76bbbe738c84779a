"""A posteriori error certificates from the primal/dual pair.

The squared L2 certificate integrates, cell by cell,

    u^2 th1 + (1-u)^2 th2 + |grad u|
      + (div(p)^2/4 + div(p) th2 - th1 th2) / (th1 + th2)

scaled by 2 nu / (c1 - c2)^2; it upper-bounds the squared L2 distance to
the exact relaxed minimizer for any feasible dual field with vanishing
normal trace.  Cutting out the band where the primal sits near the
threshold 1/2 converts this into a bound on the mis-segmented area:

    err_chi = min over eta of  band_area(v, eta) + err_u^2 / eta^2.

Band areas are computed exactly per triangle by slab clipping of the
affine pieces; the eta minimization scans a fixed grid so reported optima
are reproducible.

Mesh integrals run over the finest-level subcells of every leaf when the
weights live on a full-resolution lattice (image input), or over the
current leaves when the weights are analytic.  A leaf's 4 wedge triangles
are indexed S, E, N, W in the same order as the mesh triangles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleDualError, InputError
from .fdgrid import Lattice, fd_boundary_fix_embed
from .model import ModelParams, ThetaFields, threshold
from .quadmesh import QuadMesh, wedge_index
from .quadrature import SQ_POINTS, SQ_WEIGHTS, TRI_BARY, TRI_WEIGHTS

FEAS_TOL = 1e-9

#: default spacing of the eta search grid
ETA_STEP = 0.0025

# wedge triangles of the unit cell, in mesh triangle order S, E, N, W
WEDGE_VERTS = np.array(
    [
        [[0.0, 0.0], [1.0, 0.0], [0.5, 0.5]],
        [[1.0, 0.0], [1.0, 1.0], [0.5, 0.5]],
        [[1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
        [[0.0, 1.0], [0.0, 0.0], [0.5, 0.5]],
    ]
)
WEDGE_QP = np.einsum("qk,wkd->wqd", TRI_BARY, WEDGE_VERTS)  # (4, 6, 2)
WEDGE_CENTROID = WEDGE_VERTS.mean(axis=1)  # (4, 2)


@dataclass(frozen=True)
class ThetaOnLattice:
    """Weight fields interpolated on the full-resolution simplicial mesh.

    Nodal values live at the lattice corners (theta1/theta2, shape (n, n))
    and at the finest cell centers (theta1_c/theta2_c, shape (n-1, n-1)),
    where the input intensity is taken as the corner average.
    """

    theta1: np.ndarray
    theta2: np.ndarray
    theta1_c: np.ndarray
    theta2_c: np.ndarray
    level: int

    def __post_init__(self):
        n = 2**self.level + 1
        if self.theta1.shape != (n, n) or self.theta2.shape != (n, n):
            raise InputError("lattice theta fields must be (2^L+1, 2^L+1)")
        if self.theta1_c.shape != (n - 1, n - 1):
            raise InputError("center theta fields must be (2^L, 2^L)")

    @classmethod
    def from_image(cls, u0, params: ModelParams, level: int) -> "ThetaOnLattice":
        u0 = np.asarray(u0, dtype=float)
        u0_c = 0.25 * (u0[:-1, :-1] + u0[:-1, 1:] + u0[1:, :-1] + u0[1:, 1:])
        return cls(
            theta1=(params.c1 - u0) ** 2 / params.nu,
            theta2=(params.c2 - u0) ** 2 / params.nu,
            theta1_c=(params.c1 - u0_c) ** 2 / params.nu,
            theta2_c=(params.c2 - u0_c) ** 2 / params.nu,
            level=level,
        )


@dataclass(frozen=True)
class ThetaAnalytic:
    """Weight fields given as point-evaluable functions of (x, y)."""

    theta1: object
    theta2: object


@dataclass
class UCertificate:
    """Global squared-L2 bound with its per-cell decomposition."""

    err_u_sq: float
    per_cell: np.ndarray
    E_primal: float
    D_predual: float


def _check_feasible(q) -> None:
    norms = np.sqrt(np.sum(np.asarray(q, dtype=float) ** 2, axis=-1))
    worst = float(norms.max())
    if worst > 1.0 + FEAS_TOL:
        raise InfeasibleDualError(
            f"certificate void: dual field has |q| = {worst:.12g} > 1"
        )


def _wedge_affine(sw, se, ne, nw, ce):
    """Affine coefficients (alpha, beta, gamma) per wedge, stacked last.

    The returned arrays have shape (..., 4); the value at cell-local
    coordinates (s, t) inside wedge w is alpha[..., w] + beta[..., w]*s +
    gamma[..., w]*t.
    """
    alpha = np.stack([sw, 2 * ce - ne, 2 * ce - ne, sw], axis=-1)
    beta = np.stack(
        [se - sw, se + ne - 2 * ce, ne - nw, 2 * ce - sw - nw], axis=-1
    )
    gamma = np.stack(
        [2 * ce - sw - se, ne - se, nw - 2 * ce + ne, nw - sw], axis=-1
    )
    return alpha, beta, gamma


def _g_term(div, t1, t2):
    return (0.25 * div**2 + div * t2 - t1 * t2) / (t1 + t2)


def estimate_u_mesh(mesh: QuadMesh, v, q, theta_src, params: ModelParams) -> UCertificate:
    """Certificate for a P1 primal/dual pair on the quadtree mesh.

    q must be nodal (for the elementwise scheme, project it first) and
    feasible; infeasible duals raise InfeasibleDualError.  theta_src is
    either ThetaOnLattice (integrate over finest-level subcells) or
    ThetaAnalytic (integrate over the current leaves).
    """
    v = np.asarray(v, dtype=float)
    q = np.asarray(q, dtype=float)
    if v.shape != (mesh.n_dof,) or q.shape != (mesh.n_dof, 2):
        raise InputError("fields do not match the mesh DOFs")
    _check_feasible(q)
    grid_mode = isinstance(theta_src, ThetaOnLattice)
    if grid_mode and theta_src.level < int(mesh.leaf_levels.max()):
        raise InputError("mesh is finer than the lattice weights")

    vhat = mesh.expand(v)
    qxhat = mesh.expand(q[:, 0])
    qyhat = mesh.expand(q[:, 1])

    e_cells = np.zeros(mesh.n_leaves)
    d_cells = np.zeros(mesh.n_leaves)
    qp_loc = WEDGE_QP  # (4, 6, 2)
    for li, (lv, ix, iy) in enumerate(mesh.leaves):
        hc = 2.0**-lv
        cids = mesh.leaf_corners[li]
        cid = mesh.leaf_centers[li]
        av, bv, gv = _wedge_affine(*(vhat[c] for c in cids), vhat[cid])
        ax, bx, gx = _wedge_affine(*(qxhat[c] for c in cids), qxhat[cid])
        ay, by, gy = _wedge_affine(*(qyhat[c] for c in cids), qyhat[cid])
        grad_norm = np.hypot(bv / hc, gv / hc)  # (4,)
        div_q = (bx + gy) / hc  # (4,)

        if grid_mode:
            k = 1 << (theta_src.level - lv)
        else:
            k = 1
        a_idx, b_idx = np.meshgrid(np.arange(k), np.arange(k), indexing="xy")
        # leaf-local coordinates of all quadrature points: (k, k, 4, 6)
        loc_s = (a_idx[..., None, None] + qp_loc[None, None, :, :, 0]) / k
        loc_t = (b_idx[..., None, None] + qp_loc[None, None, :, :, 1]) / k
        cen_s = (a_idx[..., None] + WEDGE_CENTROID[None, None, :, 0]) / k
        cen_t = (b_idx[..., None] + WEDGE_CENTROID[None, None, :, 1]) / k
        widx = wedge_index(cen_s, cen_t)  # (k, k, 4)

        u_qp = av[widx][..., None] + bv[widx][..., None] * loc_s + gv[widx][..., None] * loc_t
        gn_qp = grad_norm[widx][..., None]
        dv_qp = div_q[widx][..., None]

        if grid_mode:
            j0, i0 = ix * k, iy * k
            th1_qp = _lattice_theta_at(
                theta_src.theta1, theta_src.theta1_c, i0, j0, b_idx, a_idx, qp_loc
            )
            th2_qp = _lattice_theta_at(
                theta_src.theta2, theta_src.theta2_c, i0, j0, b_idx, a_idx, qp_loc
            )
        else:
            gxp = ix * hc + loc_s * hc
            gyp = iy * hc + loc_t * hc
            pts = np.stack([gxp.ravel(), gyp.ravel()], axis=1)
            th1_qp = np.asarray(theta_src.theta1(pts), dtype=float).reshape(loc_s.shape)
            th2_qp = np.asarray(theta_src.theta2(pts), dtype=float).reshape(loc_s.shape)

        e_int = u_qp**2 * th1_qp + (1.0 - u_qp) ** 2 * th2_qp + gn_qp
        d_int = _g_term(dv_qp, th1_qp, th2_qp)
        tri_area = (hc / k) ** 2 / 4.0
        e_cells[li] = tri_area * np.sum(e_int @ TRI_WEIGHTS)
        d_cells[li] = tri_area * np.sum(d_int @ TRI_WEIGHTS)

    scale = params.err_scale
    per_cell = scale * (e_cells + d_cells)
    return UCertificate(
        err_u_sq=float(per_cell.sum()),
        per_cell=per_cell,
        E_primal=float(e_cells.sum()),
        D_predual=float(d_cells.sum()),
    )


def _lattice_theta_at(theta, theta_c, i0, j0, b_idx, a_idx, qp_loc):
    """Evaluate a lattice P1 weight at wedge quadrature points per subcell."""
    sw = theta[i0 + b_idx, j0 + a_idx]
    se = theta[i0 + b_idx, j0 + a_idx + 1]
    ne = theta[i0 + b_idx + 1, j0 + a_idx + 1]
    nw = theta[i0 + b_idx + 1, j0 + a_idx]
    ce = theta_c[i0 + b_idx, j0 + a_idx]
    al, be, ga = _wedge_affine(sw, se, ne, nw, ce)  # (k, k, 4)
    return (
        al[..., None]
        + be[..., None] * qp_loc[None, None, :, :, 0]
        + ga[..., None] * qp_loc[None, None, :, :, 1]
    )


def estimate_u_lattice(lat: Lattice, v, q, theta: ThetaFields, params: ModelParams) -> UCertificate:
    """Certificate for a lattice pair via piecewise bilinear embedding.

    The dual gets its boundary normal components zeroed before embedding;
    integration uses the 3x3 tensor Gauss rule per lattice cell.
    """
    v = lat.check_primal(v)
    q = fd_boundary_fix_embed(q, lat)
    _check_feasible(q)
    if theta.theta1.shape != (lat.n, lat.n):
        raise InputError("theta fields do not match the lattice")
    h = lat.h
    s = SQ_POINTS[:, 0]
    t = SQ_POINTS[:, 1]

    def corners(arr):
        return arr[:-1, :-1], arr[:-1, 1:], arr[1:, :-1], arr[1:, 1:]

    def at_qp(arr):
        sw, se, nw, ne = corners(arr)
        return (
            (1 - s) * (1 - t) * sw[..., None]
            + s * (1 - t) * se[..., None]
            + (1 - s) * t * nw[..., None]
            + s * t * ne[..., None]
        )

    def ddx(arr):
        sw, se, nw, ne = corners(arr)
        return ((1 - t) * (se - sw)[..., None] + t * (ne - nw)[..., None]) / h

    def ddy(arr):
        sw, se, nw, ne = corners(arr)
        return ((1 - s) * (nw - sw)[..., None] + s * (ne - se)[..., None]) / h

    u_qp = at_qp(v)
    gn_qp = np.hypot(ddx(v), ddy(v))
    dv_qp = ddx(q[..., 0]) + ddy(q[..., 1])
    t1_qp = at_qp(theta.theta1)
    t2_qp = at_qp(theta.theta2)

    e_int = u_qp**2 * t1_qp + (1.0 - u_qp) ** 2 * t2_qp + gn_qp
    d_int = _g_term(dv_qp, t1_qp, t2_qp)
    e_cells = h * h * (e_int @ SQ_WEIGHTS)
    d_cells = h * h * (d_int @ SQ_WEIGHTS)
    scale = params.err_scale
    per_cell = scale * (e_cells + d_cells)
    return UCertificate(
        err_u_sq=float(per_cell.sum()),
        per_cell=per_cell,
        E_primal=float(e_cells.sum()),
        D_predual=float(d_cells.sum()),
    )


# ----------------------------------------------------------------------
# band areas and the eta optimization
# ----------------------------------------------------------------------
def _tri_cdf(v_sorted, areas, c):
    """Area of {v <= c} per triangle for sorted vertex values.

    v_sorted: (m, 3) ascending; areas: (m,); c: (..., 1) or scalar
    broadcastable against (m,).  Constant triangles are handled by the
    caller.
    """
    v1, v2, v3 = v_sorted[:, 0], v_sorted[:, 1], v_sorted[:, 2]
    den_low = np.maximum((v2 - v1) * (v3 - v1), 1e-300)
    den_high = np.maximum((v3 - v1) * (v3 - v2), 1e-300)
    low = (c - v1) ** 2 / den_low
    high = 1.0 - (v3 - c) ** 2 / den_high
    frac = np.where(
        c < v1, 0.0, np.where(c < v2, low, np.where(c < v3, high, 1.0))
    )
    return areas * frac


def tri_band_areas(vert_vals, areas, lo, hi):
    """Exact measure of {lo <= v <= hi} per triangle for affine pieces.

    lo/hi may be scalars or arrays of band endpoints (one column per
    band); returns the per-triangle areas summed over triangles, shaped
    like lo.
    """
    verts = np.sort(np.asarray(vert_vals, dtype=float), axis=1)
    areas = np.asarray(areas, dtype=float)
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    const = verts[:, 0] == verts[:, 2]
    out = np.zeros(lo.shape)
    if np.any(~const):
        vs = verts[~const]
        ar = areas[~const]
        c_lo = lo[..., None]
        c_hi = hi[..., None]
        band = _tri_cdf(vs, ar, c_hi) - _tri_cdf(vs, ar, c_lo)
        out += band.sum(axis=-1)
    if np.any(const):
        vals = verts[const, 0]
        ar = areas[const]
        inside = (lo[..., None] <= vals) & (vals <= hi[..., None])
        out += (inside * ar).sum(axis=-1)
    return out


def _band_triangles(disc, v):
    """Triangle vertex values and areas representing v on a discretization."""
    if isinstance(disc, QuadMesh):
        vhat = disc.expand(np.asarray(v, dtype=float))
        return vhat[disc.triangles], disc.tri_area
    if isinstance(disc, Lattice):
        v = disc.check_primal(v)
        sw = v[:-1, :-1].ravel()
        se = v[:-1, 1:].ravel()
        nw = v[1:, :-1].ravel()
        ne = v[1:, 1:].ravel()
        ce = 0.25 * (sw + se + nw + ne)
        verts = np.concatenate(
            [
                np.stack([sw, se, ce], axis=1),
                np.stack([se, ne, ce], axis=1),
                np.stack([ne, nw, ce], axis=1),
                np.stack([nw, sw, ce], axis=1),
            ]
        )
        areas = np.full(len(verts), disc.h**2 / 4.0)
        return verts, areas
    raise InputError(f"unsupported discretization: {type(disc).__name__}")


def area_band(disc, v, eta: float) -> float:
    """Measure of the set {1/2 - eta <= v <= 1/2 + eta} (closed band)."""
    if not (0.0 < eta < 0.5):
        raise InputError("eta must lie in (0, 1/2)")
    verts, areas = _band_triangles(disc, v)
    return float(tri_band_areas(verts, areas, 0.5 - eta, 0.5 + eta)[0])


def eta_grid(step: float = ETA_STEP) -> np.ndarray:
    """Search grid {k*step : k = 1 .. floor((1/2 - step)/step)}."""
    kmax = int(np.floor((0.5 - step) / step))
    return step * np.arange(1, kmax + 1)


def estimate_chi(disc, v, err_u_sq: float, step: float = ETA_STEP):
    """Mis-segmentation bound: minimize band(v, eta) + err_u_sq/eta^2.

    Returns (err_chi, eta_opt, (etas, band_areas)); the minimum is an exact
    scan over the eta grid, ties resolved toward the smaller eta.
    """
    if err_u_sq < 0.0:
        raise InputError("err_u_sq must be nonnegative")
    etas = eta_grid(step)
    verts, areas = _band_triangles(disc, v)
    avals = tri_band_areas(verts, areas, 0.5 - etas, 0.5 + etas)
    objective = avals + err_u_sq / etas**2
    best = int(np.argmin(objective))
    return float(objective[best]), float(etas[best]), (etas, avals)


def mismatch_area(chi_a, chi_b, weights) -> float:
    """Weighted L1 distance between two binary fields."""
    a = np.asarray(chi_a, dtype=float).ravel()
    b = np.asarray(chi_b, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    return float(np.sum(w * np.abs(a - b)))


def verify_chi_bound(v, err_chi: float, chi_star, weights) -> bool:
    """Check |chi_star - threshold(v)|_L1 <= err_chi (oracle-facing)."""
    return mismatch_area(threshold(v), chi_star, weights) <= err_chi + 1e-12


# ----------------------------------------------------------------------
# reporting
# ----------------------------------------------------------------------
@dataclass
class Certificate:
    """One refinement cycle's certified error record."""

    cycle: int
    scheme: str
    dofs: int
    E_primal: float
    D_predual: float
    err_u_sq: float
    eta_opt: float
    err_chi: float
    per_cell: np.ndarray
    eta_curve: tuple[np.ndarray, np.ndarray]
    wall_ms: int = 0


CSV_HEADER = "cycle,scheme,dofs,E_primal,D_predual,err_u_sq,eta_opt,err_chi,wall_ms"


def csv_row(cert: Certificate) -> str:
    return (
        f"{cert.cycle},{cert.scheme},{cert.dofs},"
        f"{cert.E_primal:.12e},{cert.D_predual:.12e},{cert.err_u_sq:.12e},"
        f"{cert.eta_opt:.4f},{cert.err_chi:.12e},{cert.wall_ms}"
    )


def per_cell_image(mesh: QuadMesh, per_cell, n: int = 256) -> np.ndarray:
    """Rasterize a per-leaf map for inspection (pixel value = leaf value)."""
    per_cell = np.asarray(per_cell, dtype=float)
    xs = (np.arange(n) + 0.5) / n
    pts = np.stack(np.meshgrid(xs, xs, indexing="xy"), axis=-1).reshape(-1, 2)
    leaf_idx, _ = mesh.locate(pts)
    return per_cell[leaf_idx].reshape(n, n)
