"""Independent brute-force verifiers for the test suite.

Nothing here is used by the production pipeline; these routines provide
reference values for the guaranteed bounds at desk scale (exhaustive
binary minimization, high-accuracy reference solves, 1-D proximal search).
"""
from __future__ import annotations

import numpy as np

from .errors import InputError
from .fdgrid import FdScheme
from .pdsolver import SolverConfig, SolveResult, solve

#: enumeration cap: at most 16 nodes (65536 binary fields)
MAX_EXHAUSTIVE_DOFS = 16


def exhaustive_binary_min(scheme: FdScheme, chunk: int = 4096):
    """Global minimizer of the discrete binary energy by full enumeration.

    Enumerates all 2^N binary nodal fields on a tiny lattice (N <= 16) and
    returns (chi, energy).  Ties are broken lexicographically in the
    flattened field (row-major), by enumerating patterns in that order and
    keeping the first strict improvement.
    """
    lat = scheme.lat
    n_tot = lat.n_nodes
    if n_tot > MAX_EXHAUSTIVE_DOFS:
        raise InputError(
            f"lattice too large for exhaustive search ({n_tot} > {MAX_EXHAUSTIVE_DOFS} nodes)"
        )
    n = lat.n
    h = lat.h
    w = lat.node_weight
    t1 = scheme.theta.theta1.ravel()
    t2 = scheme.theta.theta2.ravel()
    # big-endian bits so that ascending k enumerates chi lexicographically
    shifts = np.arange(n_tot - 1, -1, -1)
    best_energy = np.inf
    best_chi = None
    for start in range(0, 2**n_tot, chunk):
        ks = np.arange(start, min(start + chunk, 2**n_tot))
        chi = ((ks[:, None] >> shifts[None, :]) & 1).astype(float)  # (m, N)
        data = chi @ t1 + (1.0 - chi) @ t2
        grid = chi.reshape(-1, n, n)
        gx = (np.roll(grid, -1, axis=2) - grid) / h
        gy = (np.roll(grid, -1, axis=1) - grid) / h
        tv = np.sqrt(gx * gx + gy * gy).reshape(len(ks), -1).sum(axis=1)
        energies = w * (data + tv)
        i = int(np.argmin(energies))
        if energies[i] < best_energy:
            best_energy = float(energies[i])
            best_chi = grid[i].copy()
    return best_chi, best_energy


def reference_relaxed_solve(scheme, u0=None, p0=None) -> SolveResult:
    """High-accuracy relaxed solve (threshold 1e-12, 10x iteration cap)."""
    cfg = SolverConfig.for_bound(
        scheme.norm_bound(), threshold=1e-12, max_iters=2_000_000
    )
    if u0 is None:
        u0 = scheme.zero_primal() + 0.5
    if p0 is None:
        p0 = scheme.zero_dual()
    return solve(scheme, cfg, u0, p0)


def scalar_prox_oracle(v: float, tau: float, theta1: float, theta2: float, tol: float = 1e-10) -> float:
    """Golden-section minimizer of (y-v)^2 + 2 tau (y^2 th1 + (1-y)^2 th2).

    Searches [-1, 2], which contains the minimizer for v in [-1, 2] and any
    nonnegative weights; used to validate the closed-form resolvents.  A
    three-point parabolic polish follows the bracketing phase: plain golden
    section bottoms out near sqrt(eps) in x, while the polish is exact (up
    to rounding) for this quadratic objective.
    """

    def f(y):
        return (y - v) ** 2 + 2.0 * tau * (y * y * theta1 + (1.0 - y) ** 2 * theta2)

    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = -1.0, 2.0
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    y0, delta = 0.5 * (a + b), 1e-4
    lo, mid, hi = f(y0 - delta), f(y0), f(y0 + delta)
    curv = hi - 2.0 * mid + lo
    if curv <= 0.0:
        return y0
    return y0 - 0.5 * delta * (hi - lo) / curv
