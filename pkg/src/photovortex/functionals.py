"""Action, flux and energy functionals, their gradient, and beta extraction.

With ``u = sum_j c_j psi_j`` in the weighted-orthonormal basis:

    I(u) = 1/2 int_0^R { r u_r^2 + (m^2/r) u^2 + (r/alpha) ln(1 + alpha u^2) } dr
    P(u) = 2 pi int_0^R r u^2 dr = |c|^2
    E(u) = int_0^R { r u_r^2 + (m^2/r) u^2 } dr
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSet, Profile
from .errors import InvalidArgumentError
from .quadrature import QuadratureRule, integrate_values


@dataclass(frozen=True)
class FunctionalValue:
    action: float
    flux: float
    energy: float


@dataclass(frozen=True)
class EigenResult:
    beta: float
    delta_beta: float


def _sample(profile, rule: QuadratureRule):
    u, ur, urr = profile.sample_nodes(rule)
    spec = profile.spec
    return rule.nodes, u, ur, urr, float(spec.m) ** 2, spec.alpha


def action(profile, rule: QuadratureRule) -> float:
    r, u, ur, _, m2, alpha = _sample(profile, rule)
    integrand = r * ur ** 2 + (m2 / r) * u ** 2 + (r / alpha) * np.log1p(alpha * u ** 2)
    return 0.5 * integrate_values(rule, integrand)


def flux(profile, rule: QuadratureRule) -> float:
    r, u = rule.nodes, profile.sample_nodes(rule)[0]
    return 2.0 * np.pi * integrate_values(rule, r * u ** 2)


def energy(profile, rule: QuadratureRule) -> float:
    r, u, ur, _, m2, _ = _sample(profile, rule)
    return integrate_values(rule, r * ur ** 2 + (m2 / r) * u ** 2)


def functional_values(profile, rule: QuadratureRule) -> FunctionalValue:
    return FunctionalValue(action(profile, rule), flux(profile, rule), energy(profile, rule))


def gradient_F(profile: Profile, rule: QuadratureRule) -> np.ndarray:
    """Gradient of F(c) = I(sum_j c_j psi_j) with respect to the coefficients.

    Component j is the weak form
    ``int { r u_r psi_j' + (m^2/r) u psi_j + r u psi_j / (1 + alpha u^2) } dr``.
    """
    return Objective(profile.basis, rule).gradient(profile.coeffs)


def beta_from_profile(profile, rule: QuadratureRule) -> float:
    """Propagation constant from the weak form tested against u itself."""
    r, u, ur, _, m2, alpha = _sample(profile, rule)
    P = 2.0 * np.pi * integrate_values(rule, r * u ** 2)
    if not P > 0:
        raise InvalidArgumentError("beta is undefined for a profile with zero flux")
    integrand = r * ur ** 2 + (m2 / r) * u ** 2 + r * u ** 2 / (1.0 + alpha * u ** 2)
    return -(2.0 * np.pi / P) * integrate_values(rule, integrand)


def residual_delta_beta(profile, beta: float, rule: QuadratureRule) -> float:
    """Integrated squared ODE residual, with (r u_r)_r = u_r + r u_rr."""
    r, u, ur, urr, m2, alpha = _sample(profile, rule)
    res = ur + r * urr - (m2 / r) * u - r * u / (1.0 + alpha * u ** 2) - beta * r * u
    return integrate_values(rule, res ** 2)


def eigen(profile, rule: QuadratureRule) -> EigenResult:
    beta = beta_from_profile(profile, rule)
    return EigenResult(beta, residual_delta_beta(profile, beta, rule))


def lagrange_multiplier(profile: Profile, rule: QuadratureRule) -> tuple:
    """Least-squares multiplier lam in grad F = lam * grad P, grad P = 2c.

    Returns ``(lam, misfit)`` where misfit is the norm of the part of grad F
    orthogonal to c, relative to the norm of grad F.  At a KKT point the
    propagation constant is ``-4*pi*lam``.
    """
    c = profile.coeffs
    cc = float(c @ c)
    if not cc > 0:
        raise InvalidArgumentError("multiplier is undefined for zero coefficients")
    g = gradient_F(profile, rule)
    lam = float(g @ c) / (2.0 * cc)
    gnorm = float(np.linalg.norm(g))
    misfit = float(np.linalg.norm(g - 2.0 * lam * c)) / gnorm if gnorm > 0 else 0.0
    return lam, misfit


class Objective:
    """F(c) and its gradient on fixed quadrature tables, for the optimizer."""

    def __init__(self, basis: BasisSet, rule: QuadratureRule):
        spec = basis.spec
        self.basis = basis
        self.rule = rule
        self.psi, self.dpsi, self.d2psi = basis.node_tables(rule)
        r = rule.nodes
        self.r = r
        self.m2 = float(spec.m) ** 2
        self.alpha = spec.alpha
        self._wr = rule.weights * r
        self._wm = rule.weights * self.m2 / r

    def value(self, c: np.ndarray) -> float:
        u = c @ self.psi
        ur = c @ self.dpsi
        a = self.alpha
        integrand = self.r * ur ** 2 + (self.m2 / self.r) * u ** 2 \
            + (self.r / a) * np.log1p(a * u ** 2)
        return 0.5 * integrate_values(self.rule, integrand)

    def gradient(self, c: np.ndarray) -> np.ndarray:
        u = c @ self.psi
        ur = c @ self.dpsi
        sat = u / (1.0 + self.alpha * u ** 2)
        return self.dpsi @ (self._wr * ur) + self.psi @ (self._wm * u + self._wr * sat)

    def change(self, c_old: np.ndarray, c_new: np.ndarray) -> float:
        """F(c_new) - F(c_old) without cancellation between two nearby values."""
        dc = c_new - c_old
        u = c_old @ self.psi
        du = dc @ self.psi
        dur = dc @ self.dpsi
        ur = c_old @ self.dpsi
        a = self.alpha
        # u'^2 - u^2 = du * (2u + du)
        dsq = du * (2.0 * u + du)
        integrand = self.r * dur * (2.0 * ur + dur) + (self.m2 / self.r) * dsq \
            + (self.r / a) * np.log1p(a * dsq / (1.0 + a * u ** 2))
        return 0.5 * integrate_values(self.rule, integrand)
