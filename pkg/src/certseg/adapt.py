"""Outer adaptive loop: solve, smooth, certify, mark, refine, prolong.

Each cycle solves the relaxed problem on the current mesh, damps
oscillations, evaluates the error certificate on the smoothed pair, marks
cells whose local contribution is at least alpha times the maximum plus
the upper decile of the sorted local contributions, refines (capped at the
input resolution) and prolongs the solution pair onto the new mesh.

The finite-difference scheme is non-adaptive: it runs a single cycle on
the full-resolution lattice.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NotConvergedError, StepSizeError
from .estimator import (
    Certificate,
    estimate_chi,
    estimate_u_lattice,
    estimate_u_mesh,
)
from .fdgrid import FdScheme, Lattice, fd_boundary_fix_embed
from .feschemes import (
    NORM_CONST_FE,
    NORM_CONST_FEP,
    FePrimeScheme,
    FeScheme,
    fe_boundary_fix,
    radial_project,
)
from .model import ModelParams, compute_theta, threshold
from .pdsolver import SolverConfig, solve
from .postproc import smooth, smoothing_plan
from .quadmesh import QuadMesh, wedge_index
from .inputs import AnalyticInput, ImageInput


@dataclass(frozen=True)
class AdaptConfig:
    """Marking threshold, cycle budget and level range of the outer loop."""

    alpha: float = 0.2
    cycles: int = 10
    init_level: int = 3
    max_level: int = 6

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InputError("alpha must lie in (0, 1)")
        if self.cycles < 1:
            raise InputError("cycles must be at least 1")
        if not (0 <= self.init_level <= self.max_level):
            raise InputError("need 0 <= init_level <= max_level")


def mark(per_cell, alpha: float) -> np.ndarray:
    """Indices of cells selected for refinement.

    Union of the cells with err^2 >= alpha * max and the upper decile of
    the ascending sort (rank > 0.9 n, ties resolved by input position,
    which is Morton order for mesh-aligned values).
    """
    values = np.asarray(per_cell, dtype=float)
    if values.size == 0:
        raise InputError("empty cell map")
    selected = values >= alpha * values.max()
    order = np.argsort(values, kind="stable")
    n_decile = len(values) - int(np.floor(0.9 * len(values)))
    decile = order[len(values) - n_decile :]
    out = np.zeros(len(values), dtype=bool)
    out[selected] = True
    out[decile] = True
    return np.flatnonzero(out)


def finest_norm_bound(kind: str, max_level: int) -> float:
    """Closed-form squared operator-norm bound at the finest level."""
    h2 = (2.0**-max_level) ** 2
    if kind == "fd":
        return 8.0 / h2
    if kind == "fe":
        return NORM_CONST_FE / h2
    if kind == "fe_prime":
        return NORM_CONST_FEP / h2
    raise InputError(f"unknown scheme kind: {kind!r}")


@dataclass
class AdaptiveResult:
    """Certificates per cycle plus the final discrete solution triple.

    u, p are the raw solver outputs on the final discretization; u_post,
    p_post are the post-processed (smoothed, feasible, nodal) pair the
    final certificate was evaluated on.  chi thresholds u_post.
    """

    certificates: list[Certificate]
    u: np.ndarray
    p: np.ndarray
    u_post: np.ndarray
    p_post: np.ndarray
    chi: np.ndarray
    scheme_kind: str
    mesh: QuadMesh | None = None
    lattice: Lattice | None = None
    stalled: bool = field(default=False)

    @property
    def final(self) -> Certificate:
        return self.certificates[-1]


def _postprocess_candidates(kind, mesh, scheme, u, p):
    """Post-processed primal plus candidate duals for the certificate.

    The primal follows the per-scheme smoothing plan.  Dual candidates are
    nodal fields (the elementwise dual is projected first, with both the
    consistent and the lumped projection), smoothed with a fixed menu of
    weights, radially rescaled and boundary-fixed; every candidate yields
    a valid bound, and the pipeline keeps whichever certifies best.  The
    prescribed h_avg-based weight for the elementwise scheme over-smooths
    at coarse resolutions, which is why the menu also carries 3*h_min^2,
    6*h_min^2 and no smoothing.  The menu is fixed, so runs stay
    deterministic.
    """
    iota_primal, iota_dual = smoothing_plan(kind, mesh)
    u_bar = smooth(u, mesh, iota_primal)
    if kind == "fe_prime":
        nodal_duals = [scheme.project_dual(p), scheme.project_dual_lumped(p)]
        h2 = mesh.h_min**2
        iotas = [iota_dual, 6.0 * h2, 3.0 * h2, 0.0]
    else:
        nodal_duals = [p]
        iotas = [iota_dual]
    candidates = []
    for p_nodal in nodal_duals:
        for iota in dict.fromkeys(iotas):
            p_bar = fe_boundary_fix(mesh, radial_project(smooth(p_nodal, mesh, iota)))
            candidates.append(p_bar)
    return u_bar, candidates


def _prolong_dual(kind, old_mesh, new_mesh, p):
    if kind == "fe":
        q = old_mesh.eval_P1(p, new_mesh.dof_positions())
        return fe_boundary_fix(new_mesh, q)
    # elementwise: children inherit the containing old simplex's value
    centroids = new_mesh.node_pos[new_mesh.triangles].mean(axis=1)
    leaf_idx, loc = old_mesh.locate(centroids)
    widx = wedge_index(loc[:, 0], loc[:, 1])
    return p[4 * leaf_idx + widx]


def run_adaptive(
    source,
    params: ModelParams,
    kind: str,
    solver_cfg: SolverConfig,
    adapt_cfg: AdaptConfig,
    callback=None,
) -> AdaptiveResult:
    """Drive the full certified segmentation pipeline.

    source is an ImageInput or AnalyticInput; kind is one of "fd", "fe",
    "fe_prime".  The step-size condition is checked up front against the
    finest anticipated level, so a fixed (tau, sigma) stays valid across
    all cycles.  callback, if given, receives each Certificate as it is
    produced.
    """
    if not isinstance(source, (ImageInput, AnalyticInput)):
        raise InputError("source must be an ImageInput or AnalyticInput")
    bound = finest_norm_bound(kind, adapt_cfg.max_level)
    if solver_cfg.tau * solver_cfg.sigma * bound >= 1.0:
        raise StepSizeError(
            "step size violation at the finest level: tau*sigma*bound = "
            f"{solver_cfg.tau * solver_cfg.sigma * bound:.3g} >= 1"
        )
    if kind == "fd":
        return _run_fd(source, params, solver_cfg, adapt_cfg, callback)
    if kind not in ("fe", "fe_prime"):
        raise InputError(f"unknown scheme kind: {kind!r}")
    return _run_fe(source, params, kind, solver_cfg, adapt_cfg, callback)


def _run_fd(source, params, solver_cfg, adapt_cfg, callback):
    if adapt_cfg.cycles > 1:
        warnings.warn("the fd scheme is non-adaptive; running a single cycle")
    lat = Lattice.from_level(adapt_cfg.max_level)
    u0 = np.clip(source.lattice_values(lat), 0.0, 1.0)
    theta = compute_theta(source.lattice_values(lat), params)
    scheme = FdScheme(lat, theta)
    res = solve(scheme, solver_cfg, u0, scheme.zero_dual())
    if not res.converged:
        raise NotConvergedError(
            f"solver hit max_iters={solver_cfg.max_iters} "
            f"(last increment {res.last_increment:.3g})"
        )
    ucert = estimate_u_lattice(lat, res.u, res.p, theta, params)
    err_chi, eta_opt, curve = estimate_chi(lat, res.u, ucert.err_u_sq)
    cert = Certificate(
        cycle=1,
        scheme="fd",
        dofs=lat.n_nodes,
        E_primal=ucert.E_primal,
        D_predual=ucert.D_predual,
        err_u_sq=ucert.err_u_sq,
        eta_opt=eta_opt,
        err_chi=err_chi,
        per_cell=ucert.per_cell,
        eta_curve=curve,
    )
    if callback is not None:
        callback(cert)
    return AdaptiveResult(
        certificates=[cert],
        u=res.u,
        p=res.p,
        u_post=res.u,
        p_post=fd_boundary_fix_embed(res.p, lat),
        chi=threshold(res.u),
        scheme_kind="fd",
        lattice=lat,
    )


def _run_fe(source, params, kind, solver_cfg, adapt_cfg, callback):
    scheme_cls = FeScheme if kind == "fe" else FePrimeScheme
    mesh = QuadMesh.uniform(adapt_cfg.init_level, adapt_cfg.max_level)
    theta_src = source.theta_source(params)
    u = np.clip(source.node_values(mesh), 0.0, 1.0)
    p = None
    certificates: list[Certificate] = []
    stalled = False
    u_bar = p_bar = None
    for cycle in range(1, adapt_cfg.cycles + 1):
        theta = source.mesh_theta(mesh, params)
        scheme = scheme_cls(mesh, theta)
        if p is None:
            p = scheme.zero_dual()
        res = solve(scheme, solver_cfg, u, p)
        if not res.converged:
            raise NotConvergedError(
                f"solver hit max_iters={solver_cfg.max_iters} in cycle {cycle} "
                f"(last increment {res.last_increment:.3g})"
            )
        u, p = res.u, res.p
        u_bar, duals = _postprocess_candidates(kind, mesh, scheme, u, p)
        ucert = p_bar = None
        for q in duals:
            cand = estimate_u_mesh(mesh, u_bar, q, theta_src, params)
            if ucert is None or cand.err_u_sq < ucert.err_u_sq:
                ucert, p_bar = cand, q
        err_chi, eta_opt, curve = estimate_chi(mesh, u_bar, ucert.err_u_sq)
        cert = Certificate(
            cycle=cycle,
            scheme=kind,
            dofs=mesh.n_dof,
            E_primal=ucert.E_primal,
            D_predual=ucert.D_predual,
            err_u_sq=ucert.err_u_sq,
            eta_opt=eta_opt,
            err_chi=err_chi,
            per_cell=ucert.per_cell,
            eta_curve=curve,
        )
        certificates.append(cert)
        if callback is not None:
            callback(cert)
        if cycle == adapt_cfg.cycles:
            break
        # cells already at the input resolution cannot be refined; marking
        # ranks the refinable cells only, so the budget is never spent on
        # no-op splits
        refinable = np.flatnonzero(mesh.leaf_levels < adapt_cfg.max_level)
        if refinable.size == 0 or ucert.per_cell[refinable].max() <= 0.0:
            stalled = True
            break
        marked = refinable[mark(ucert.per_cell[refinable], adapt_cfg.alpha)]
        new_mesh = mesh.refine(mesh.leaves[i] for i in marked)
        if new_mesh.leaves == mesh.leaves:
            stalled = True
            break
        u = mesh.eval_P1(u, new_mesh.dof_positions())
        p = _prolong_dual(kind, mesh, new_mesh, p)
        mesh = new_mesh
    return AdaptiveResult(
        certificates=certificates,
        u=u,
        p=p,
        u_post=u_bar,
        p_post=p_bar,
        chi=threshold(u_bar),
        scheme_kind=kind,
        mesh=mesh,
        stalled=stalled,
    )
