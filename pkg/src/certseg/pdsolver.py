"""First-order primal-dual iteration over any of the discretization schemes.

Each step projects the dual variable onto the unit-ball constraint after a
gradient ascent step on the extrapolated primal, then applies the proximal
map of the quadratic data term to the primal after a divergence descent
step.  The iteration is run with fixed steps tau, sigma and stops when the
sup-norm of the primal increment drops below the threshold.

Convergence requires tau * sigma * |div_h|^2 < 1; the solver refuses to
run when the scheme's closed-form operator-norm bound violates this.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, StepSizeError


@dataclass(frozen=True)
class SolverConfig:
    """Step sizes and stopping rule of the primal-dual iteration."""

    tau: float
    sigma: float
    threshold: float = 1e-7
    max_iters: int = 200_000

    def __post_init__(self):
        if not (self.tau > 0.0 and self.sigma > 0.0 and self.threshold > 0.0):
            raise InputError("tau, sigma and threshold must be positive")
        if self.max_iters < 1:
            raise InputError("max_iters must be at least 1")

    @classmethod
    def for_bound(cls, norm_bound_sq: float, safety: float = 0.9, **kw) -> "SolverConfig":
        """Balanced steps with tau = sigma and tau*sigma*bound = safety."""
        step = float(np.sqrt(safety / norm_bound_sq))
        return cls(tau=step, sigma=step, **kw)


@dataclass
class SolveResult:
    """Converged (or capped) primal/dual pair with iteration metadata."""

    u: np.ndarray
    p: np.ndarray
    iterations: int
    converged: bool
    last_increment: float
    aborted: bool = field(default=False)


def solve(scheme, config: SolverConfig, u0, p0, callback=None, gap_every: int = 100) -> SolveResult:
    """Run the primal-dual iteration on one scheme.

    u0, p0 give the initial primal/dual vectors.  The optional callback is
    invoked every gap_every iterations with (iteration, sup_increment,
    duality_gap) and may return False to abort early.  Identical inputs
    produce bit-identical iterates.
    """
    bound = scheme.norm_bound()
    if config.tau * config.sigma * bound >= 1.0:
        raise StepSizeError(
            "step size violation: tau*sigma*|div|^2 = "
            f"{config.tau * config.sigma * bound:.3g} >= 1"
        )
    u = np.array(u0, dtype=float)
    p = np.array(p0, dtype=float)
    u_bar = u.copy()
    tau, sigma = config.tau, config.sigma
    increment = np.inf
    iterations = 0
    for k in range(1, config.max_iters + 1):
        p = scheme.resolvent_F(p + sigma * scheme.gradient(u_bar), sigma)
        p = scheme.boundary_fix(p)
        u_new = scheme.resolvent_Gstar(u + tau * scheme.divergence(p), tau)
        u_bar = 2.0 * u_new - u
        increment = float(np.max(np.abs(u_new - u)))
        u = u_new
        iterations = k
        if callback is not None and k % gap_every == 0:
            gap = scheme.energy_relaxed(u) + scheme.energy_predual(p)
            if callback(k, increment, gap) is False:
                return SolveResult(u, p, k, False, increment, aborted=True)
        if increment <= config.threshold:
            return SolveResult(u, p, k, True, increment)
    return SolveResult(u, p, iterations, False, increment)
