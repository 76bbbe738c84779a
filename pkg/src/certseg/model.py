"""Continuous model quantities for two-phase segmentation.

The binary segmentation energy for gray values ``c1``, ``c2`` and
regularization weight ``nu`` is

    E[chi] = int theta1*chi + theta2*(1 - chi) dx + TV(chi),

with the pointwise weights ``theta_i = (c_i - u0)^2 / nu``.  Its strictly
convex relaxation replaces the linear data term by
``u^2*theta1 + (1 - u)^2*theta2`` over real-valued fields; thresholding the
relaxed minimizer at 1/2 recovers a binary minimizer.

This module holds the model parameters, the weight fields, 2-means
initialization of the gray values and the thresholding step.  The discrete
energies themselves live on the scheme objects (see `fdgrid` and
`feschemes`), since their quadrature depends on the discretization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClusteringError, InputError


@dataclass(frozen=True)
class ModelParams:
    """Gray values and regularization weight of the segmentation model.

    c1 and c2 are the two phase intensities, nu > 0 weighs the perimeter
    term.  c1 == c2 is rejected: the certificate prefactor
    2*nu/(c1 - c2)^2 would be undefined.
    """

    c1: float
    c2: float
    nu: float

    def __post_init__(self):
        if not np.isfinite(self.c1) or not np.isfinite(self.c2):
            raise InputError("gray values must be finite")
        if self.c1 == self.c2:
            raise InputError("c1 and c2 must differ")
        if not (self.nu > 0.0):
            raise InputError("nu must be positive")

    @property
    def err_scale(self) -> float:
        """Prefactor 2*nu/(c1 - c2)^2 of the L2 error certificate."""
        return 2.0 * self.nu / (self.c1 - self.c2) ** 2

    @property
    def theta_sum_floor(self) -> float:
        """Pointwise lower bound (c1 - c2)^2 / (2 nu) of theta1 + theta2."""
        return (self.c1 - self.c2) ** 2 / (2.0 * self.nu)


@dataclass(frozen=True)
class ThetaFields:
    """Nonnegative weight fields theta_i = (c_i - u0)^2 / nu on one grid.

    Both arrays share the shape of the degrees of freedom they are attached
    to (lattice shape or DOF vector of a mesh).
    """

    theta1: np.ndarray
    theta2: np.ndarray

    def __post_init__(self):
        if self.theta1.shape != self.theta2.shape:
            raise InputError("theta fields must share one discretization")
        if np.any(self.theta1 < 0.0) or np.any(self.theta2 < 0.0):
            raise InputError("theta fields must be nonnegative")

    @property
    def sum(self) -> np.ndarray:
        return self.theta1 + self.theta2


def compute_theta(u0, params: ModelParams) -> ThetaFields:
    """Pointwise weights theta_i = (c_i - u0)^2 / nu.

    No shifting constant is added: every formula downstream divides by
    theta1 + theta2, which is bounded below by (c1 - c2)^2 / (2 nu), so the
    fields may vanish pointwise without harm.
    """
    u0 = np.asarray(u0, dtype=float)
    if not np.all(np.isfinite(u0)):
        raise InputError("input intensities must be finite")
    t1 = (params.c1 - u0) ** 2 / params.nu
    t2 = (params.c2 - u0) ** 2 / params.nu
    return ThetaFields(t1, t2)


def threshold(v, s: float = 0.5) -> np.ndarray:
    """Binary field 1 where v > s, else 0 (strict inequality at v == s)."""
    v = np.asarray(v, dtype=float)
    return (v > s).astype(float)


def lloyd_2means(values, max_iters: int = 1000) -> tuple[float, float]:
    """2-means clustering of intensities, started from centers {0, 1}.

    Returns (c1, c2) with c1 >= c2.  Values equidistant to both centers
    join the lower cluster; values are sorted before averaging, so the
    result is exactly invariant under permutation of the pixels.  A
    constant image has no two-phase structure and raises
    DegenerateClusteringError.
    """
    x = np.sort(np.asarray(values, dtype=float).ravel())
    if x.size == 0:
        raise InputError("empty intensity array")
    if x[0] == x[-1]:
        raise DegenerateClusteringError("degenerate clustering: constant image")
    lo, hi = 0.0, 1.0
    for _ in range(max_iters):
        # nearest-center assignment == midpoint rule in 1-D; ties
        # (x == mid) go to the lower cluster
        mid = 0.5 * (lo + hi)
        upper = x > mid
        # empty cluster keeps its previous center
        new_lo = float(np.mean(x[~upper])) if (~upper).any() else lo
        new_hi = float(np.mean(x[upper])) if upper.any() else hi
        if new_lo == lo and new_hi == hi:
            break
        lo, hi = new_lo, new_hi
    if lo == hi:
        raise DegenerateClusteringError("degenerate clustering: equal centers")
    return hi, lo


def optimal_constants(chi, u0, weights=None) -> tuple[float, float]:
    """Energy-optimal gray values for a fixed binary segmentation.

    For fixed chi the data term is minimized by the weighted means of u0
    over each phase.  Exposed as a helper only; the solver pipeline keeps
    c1, c2 fixed throughout.
    """
    chi = np.asarray(chi, dtype=float).ravel()
    u0 = np.asarray(u0, dtype=float).ravel()
    if weights is None:
        w = np.ones_like(u0)
    else:
        w = np.asarray(weights, dtype=float).ravel()
    m1 = float(np.sum(w * chi))
    m2 = float(np.sum(w * (1.0 - chi)))
    if m1 == 0.0 or m2 == 0.0:
        raise InputError("both phases must be nonempty")
    c1 = float(np.sum(w * chi * u0)) / m1
    c2 = float(np.sum(w * (1.0 - chi) * u0)) / m2
    return c1, c2


def check_binary(chi) -> np.ndarray:
    """Validate a 0/1-valued field, returning it as a float array."""
    chi = np.asarray(chi, dtype=float)
    if not np.all((chi == 0.0) | (chi == 1.0)):
        raise InputError("field is not 0/1-valued")
    return chi
