"""Constrained minimization of the discrete action on the flux sphere.

In orthonormal coordinates the constraint ``P(u) = P0`` is the sphere
``|c|^2 = P0``, so the solver is Riemannian gradient descent: step along the
tangential part of ``-grad F``, renormalize back onto the sphere, and
backtrack (Armijo) on F.  Trial step lengths come from Barzilai-Borwein.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import BasisSet, ProblemSpec, Profile, project, setup, trial_function
from .errors import InvalidArgumentError, StalledSolverError, VortexError
from .functionals import Objective, beta_from_profile, residual_delta_beta
from .quadrature import QuadratureRule

log = logging.getLogger(__name__)

MIN_STEP = 1e-16


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 10000
    grad_tol: float = 1e-8
    step_shrink: float = 0.5
    armijo_c: float = 1e-4
    positivity_grid: int = 2048

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if not self.grad_tol > 0:
            raise InvalidArgumentError("grad_tol must be positive")
        if not 0 < self.step_shrink < 1:
            raise InvalidArgumentError("step_shrink must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise InvalidArgumentError("armijo_c must lie in (0, 1)")
        if self.positivity_grid < 1:
            raise InvalidArgumentError("positivity_grid must be >= 1")


@dataclass(frozen=True)
class SolveResult:
    spec: ProblemSpec
    profile: Profile
    beta: float
    delta_beta: float
    objective: float
    iterations: int
    converged: bool
    positive: bool
    grad_norm: float
    min_u: float
    rule: QuadratureRule = field(repr=False)

    @property
    def coeffs(self) -> np.ndarray:
        return self.profile.coeffs


def _on_sphere(c: np.ndarray, P0: float) -> np.ndarray:
    return c * (math.sqrt(P0) / np.linalg.norm(c))


def initial_guess(spec: ProblemSpec, basis: BasisSet, rule: QuadratureRule) -> Profile:
    """Projection of b*r*(R - r) rescaled to flux exactly P0."""
    p = project(trial_function(spec).u, basis, rule)
    return Profile(_on_sphere(p.coeffs, spec.P0), basis)


def positivity_radii(R: float, n: int) -> np.ndarray:
    """n equally spaced interior points of (0, R)."""
    return np.linspace(0.0, R, n + 2)[1:-1]


def minimize(spec: ProblemSpec, basis: Optional[BasisSet] = None,
             rule: Optional[QuadratureRule] = None,
             config: Optional[SolverConfig] = None,
             callback: Optional[Callable] = None) -> SolveResult:
    """Minimize F(c) subject to |c|^2 = P0 from the trial-function start.

    Returns a result with ``converged=False`` when ``max_iters`` runs out;
    raises StalledSolverError if the line search cannot make progress.
    ``callback(iteration, coeffs, F)`` is called after every accepted step.
    """
    config = config or SolverConfig()
    if basis is None or rule is None:
        if basis is not None or rule is not None:
            raise InvalidArgumentError("pass both basis and rule, or neither")
        basis, rule = setup(spec)
    if basis.spec != spec:
        # the basis depends on R and N only; rebind m, alpha, P0
        if (basis.R, basis.N) != (spec.R, spec.N):
            raise InvalidArgumentError("basis was built for a different R or N")
        basis = BasisSet(spec, basis.transform, basis.gram)

    P0 = spec.P0
    obj = Objective(basis, rule)
    c = initial_guess(spec, basis, rule).coeffs.copy()
    F = obj.value(c)
    converged = False
    gnorm = math.inf
    step = g_old = None
    it = 0
    for it in range(config.max_iters + 1):
        g = obj.gradient(c)
        lam = float(g @ c) / (2.0 * P0)
        g_t = g - (2.0 * lam) * c
        gnorm = float(np.linalg.norm(g_t))
        if gnorm <= config.grad_tol * max(1.0, abs(F)):
            converged = True
            break
        if it == config.max_iters:
            break
        if step is None:
            # unit-length first trial along the normalized direction
            t = 1.0 / gnorm
        else:
            # Barzilai-Borwein trial from the last step; fall back to doubling it
            sy = float(step @ (g_t - g_old))
            t = float(step @ step) / sy if sy > 0 else 2.0 * t
        while True:
            if t * gnorm < MIN_STEP:
                raise StalledSolverError(
                    f"line search stalled at iteration {it} (|grad| = {gnorm:.3e})")
            c_new = _on_sphere(c - t * g_t, P0)
            dc = c_new - c
            # rounding leaves |c_new|^2 off P0 by an ulp; the multiplier term cancels
            # that radial drift, which otherwise swamps dF near convergence
            dF = obj.change(c, c_new) - lam * float(dc @ (2.0 * c + dc))
            if dF <= -config.armijo_c * t * gnorm ** 2:
                break
            t *= config.step_shrink
        step, g_old = dc, g_t
        c = c_new
        F = F + dF
        if callback is not None:
            callback(it + 1, c, F)

    F = obj.value(c)
    if c @ (obj.psi @ (rule.weights * rule.nodes)) < 0:
        c = -c
    profile = Profile(c, basis)
    beta = beta_from_profile(profile, rule)
    delta = residual_delta_beta(profile, beta, rule)
    grid_u = profile.eval(positivity_radii(spec.R, config.positivity_grid))
    min_u = float(grid_u.min())
    log.debug("solve %s: %d iterations, converged=%s, beta=%.8f", spec, it, converged, beta)
    return SolveResult(spec, profile, beta, delta, F, it, converged, min_u > 0,
                       gnorm, min_u, rule)


def solve(spec: ProblemSpec, config: Optional[SolverConfig] = None,
          panel_count: Optional[int] = None,
          nodes_per_panel: Optional[int] = None) -> SolveResult:
    basis, rule = setup(spec, panel_count, nodes_per_panel)
    return minimize(spec, basis, rule, config)


@dataclass(frozen=True)
class SweepOutcome:
    spec: ProblemSpec
    result: Optional[SolveResult] = None
    error: Optional[Exception] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _solve_one(spec, config, panel_count, nodes_per_panel) -> SweepOutcome:
    try:
        return SweepOutcome(spec, solve(spec, config, panel_count, nodes_per_panel))
    except VortexError as exc:
        return SweepOutcome(spec, error=exc)


def sweep(specs: Sequence[ProblemSpec], config: Optional[SolverConfig] = None,
          workers: int = 1, panel_count: Optional[int] = None,
          nodes_per_panel: Optional[int] = None) -> list:
    """Independent solves in input order; failures are collected, not raised."""
    specs = list(specs)
    if workers <= 1 or len(specs) <= 1:
        return [_solve_one(s, config, panel_count, nodes_per_panel) for s in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: _solve_one(s, config, panel_count, nodes_per_panel),
                             specs))
