"""Weighted-orthonormal sine basis and profile evaluation.

The raw modes are ``sin(k*pi*r/R)``, k = 1..N.  They are orthonormalized
under ``<u, v> = 2*pi * int_0^R r u v dr`` with modified Gram-Schmidt, and the
result is stored as a lower-triangular change of basis ``T`` so that
``psi_j = sum_k T[j, k] sin(k*pi*r/R)``.  Derivatives are taken analytically
from the sine modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import IllConditionedBasisError, InvalidArgumentError
from .quadrature import (DEFAULT_NODES_PER_PANEL, QuadratureRule, build_rule,
                         default_rule, integrate_values)

ORTHO_TOL = 1e-10
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class ProblemSpec:
    """One solve: domain radius, vortex number, coupling, flux, basis size."""

    R: float
    m: int
    alpha: float = 1.0
    P0: float = 1.0
    N: int = 20

    def __post_init__(self):
        if not (math.isfinite(self.R) and self.R > 0):
            raise InvalidArgumentError("R must be positive")
        if int(self.m) != self.m:
            raise InvalidArgumentError("m must be an integer")
        if not (math.isfinite(self.alpha) and self.alpha >= 1):
            raise InvalidArgumentError("alpha must be >= 1")
        if not (math.isfinite(self.P0) and self.P0 > 0):
            raise InvalidArgumentError("P0 must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidArgumentError("N must be a positive integer")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "P0", float(self.P0))


def _sine_table(R: float, N: int, r: np.ndarray, order: int) -> np.ndarray:
    """Rows k=1..N of the order-th derivative of sin(k*pi*r/R) at r."""
    k = np.arange(1, N + 1)[:, None] * (np.pi / R)
    phase = k * np.asarray(r, dtype=float)[None, :]
    if order == 0:
        return np.sin(phase)
    if order == 1:
        return k * np.cos(phase)
    if order == 2:
        return -(k ** 2) * np.sin(phase)
    raise InvalidArgumentError(f"derivative order must be 0, 1 or 2, got {order!r}")


def gram_matrix(spec: ProblemSpec, rule: QuadratureRule) -> np.ndarray:
    """Weighted inner products of the raw sine modes."""
    if not math.isclose(rule.R, spec.R, rel_tol=1e-14):
        raise InvalidArgumentError(
            f"quadrature rule built for R={rule.R}, spec has R={spec.R}")
    S = _sine_table(spec.R, spec.N, rule.nodes, 0)
    G = 2.0 * np.pi * (S * (rule.weights * rule.nodes)) @ S.T
    return 0.5 * (G + G.T)


def _mgs_pass(V: np.ndarray, gram: np.ndarray) -> np.ndarray:
    """One modified Gram-Schmidt sweep over the rows of V in the gram metric."""
    Q = V.copy()
    n = Q.shape[0]
    scale = gram[0, 0]
    for j in range(n):
        q = Q[j]
        norm_sq = q @ gram @ q
        if not norm_sq > PIVOT_TOL * scale:
            raise IllConditionedBasisError(
                f"pivot {norm_sq:.3e} at mode {j + 1} is below {PIVOT_TOL:g} * gram[0, 0]")
        q /= math.sqrt(norm_sq)
        gq = gram @ q
        for k in range(j + 1, n):
            Q[k] -= (Q[k] @ gq) * q
    return Q


def orthonormalize(gram: np.ndarray) -> np.ndarray:
    """Lower-triangular T with ``T @ gram @ T.T == I`` and positive diagonal.

    Modes are processed in increasing frequency.  A second sweep is run when
    the first leaves an off-diagonal entry above ``ORTHO_TOL``.
    """
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise InvalidArgumentError("gram must be a square matrix")
    T = _mgs_pass(np.eye(gram.shape[0]), gram)
    check = T @ gram @ T.T
    if np.max(np.abs(check - np.eye(gram.shape[0]))) > ORTHO_TOL:
        T = _mgs_pass(T, gram)
    T = np.tril(T)
    # sweeps only mix in earlier rows, so the diagonal keeps the sign of e_j
    assert np.all(np.diag(T) > 0)
    return T


@dataclass(frozen=True, eq=False)
class BasisSet:
    spec: ProblemSpec
    transform: np.ndarray
    gram: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def N(self) -> int:
        return self.spec.N

    @property
    def R(self) -> float:
        return self.spec.R

    def tabulate(self, r, order: int = 0) -> np.ndarray:
        """Matrix whose row j holds psi_j (or its derivative) at the radii r."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return self.transform @ _sine_table(self.R, self.N, r, order)

    def node_tables(self, rule: QuadratureRule) -> tuple:
        """(psi, psi', psi'') at the rule's nodes; computed once per rule."""
        key = id(rule)
        hit = self._cache.get(key)
        if hit is None or hit[0] is not rule:
            tables = tuple(self.tabulate(rule.nodes, k) for k in range(3))
            for t in tables:
                t.setflags(write=False)
            hit = (rule, tables)
            self._cache[key] = hit
        return hit[1]


def build_basis(spec: ProblemSpec, rule: Optional[QuadratureRule] = None) -> BasisSet:
    if rule is None:
        rule = default_rule(spec.R, spec.N)
    gram = gram_matrix(spec, rule)
    T = orthonormalize(gram)
    T.setflags(write=False)
    gram.setflags(write=False)
    return BasisSet(spec, T, gram)


@dataclass(frozen=True, eq=False)
class Profile:
    """u(r) = sum_j coeffs[j] * psi_j(r)."""

    coeffs: np.ndarray
    basis: BasisSet

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size != self.basis.N:
            raise InvalidArgumentError(
                f"expected {self.basis.N} coefficients, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def R(self) -> float:
        return self.basis.R

    @property
    def spec(self) -> ProblemSpec:
        return self.basis.spec

    def flux(self) -> float:
        """Energy flux from the coefficients alone (orthonormal basis)."""
        return float(self.coeffs @ self.coeffs)

    def eval(self, r, order: int = 0):
        return eval_profile(self, r, order)

    __call__ = eval

    def sample_nodes(self, rule: QuadratureRule) -> tuple:
        psi, dpsi, d2psi = self.basis.node_tables(rule)
        c = self.coeffs
        return c @ psi, c @ dpsi, c @ d2psi


def eval_profile(profile: Profile, r, order: int = 0):
    """u, u_r or u_rr at radius r (scalar or array) from exact sine derivatives."""
    if order not in (0, 1, 2):
        raise InvalidArgumentError(f"derivative order must be 0, 1 or 2, got {order!r}")
    arr = np.asarray(r, dtype=float)
    R = profile.R
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > R):
        raise InvalidArgumentError(f"radius outside [0, {R}]")
    flat = arr.reshape(-1)
    values = profile.coeffs @ profile.basis.tabulate(flat, order)
    if order == 0:
        # sin(k*pi) is not exactly zero in floating point
        values[(flat == 0) | (flat == R)] = 0.0
    if arr.ndim == 0:
        return float(values[0])
    return values.reshape(arr.shape)


@dataclass(frozen=True)
class RadialFunction:
    """A profile given by explicit callables, e.g. a trial function.

    Evaluated only at interior quadrature nodes, so callables need not be
    defined at the endpoints.
    """

    spec: ProblemSpec
    u: Callable
    du: Callable
    d2u: Optional[Callable] = None

    @property
    def R(self) -> float:
        return self.spec.R

    def eval(self, r, order: int = 0):
        fn = (self.u, self.du, self.d2u)[order]
        if fn is None:
            raise InvalidArgumentError(f"no derivative of order {order} supplied")
        return fn(np.asarray(r, dtype=float))

    __call__ = eval

    def sample_nodes(self, rule: QuadratureRule) -> tuple:
        r = rule.nodes
        d2 = self.d2u(r) if self.d2u is not None else np.full_like(r, np.nan)
        return self.u(r), self.du(r), d2


def trial_function(spec: ProblemSpec) -> RadialFunction:
    """b*r*(R - r) with b chosen so the exact flux equals P0."""
    R = spec.R
    b = math.sqrt(30.0 * spec.P0 / (math.pi * R ** 6))
    return RadialFunction(
        spec,
        u=lambda r: b * r * (R - r),
        du=lambda r: b * (R - 2.0 * r),
        d2u=lambda r: np.full_like(np.asarray(r, dtype=float), -2.0 * b),
    )


def project(f: Callable, basis: BasisSet, rule: QuadratureRule) -> Profile:
    """Weighted L2 projection of f onto span{psi_j}."""
    r = rule.nodes
    fr = np.broadcast_to(np.asarray(f(r), dtype=float), r.shape)
    psi = basis.node_tables(rule)[0]
    coeffs = np.array([2.0 * np.pi * integrate_values(rule, r * fr * row) for row in psi])
    return Profile(coeffs, basis)


@lru_cache(maxsize=32)
def _cached_basis(spec: ProblemSpec, panel_count: int, nodes_per_panel: int):
    rule = build_rule(spec.R, panel_count, nodes_per_panel)
    return build_basis(spec, rule), rule


def setup(spec: ProblemSpec, panel_count: Optional[int] = None,
          nodes_per_panel: Optional[int] = None) -> tuple:
    """(basis, rule) for spec with the default or overridden quadrature."""
    # the basis only depends on R and N
    key = ProblemSpec(R=spec.R, m=0, N=spec.N)
    pc = max(8, spec.N) if panel_count is None else int(panel_count)
    npp = DEFAULT_NODES_PER_PANEL if nodes_per_panel is None else int(nodes_per_panel)
    basis, rule = _cached_basis(key, pc, npp)
    return BasisSet(spec, basis.transform, basis.gram), rule
