"""Post-solve checks: necessary bounds on beta and the peak, tail decay,
the radial Poincare inequality, and the coupled-system reduction rule."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .basis import ProblemSpec
from .errors import (DegenerateBoundError, InsufficientTailError, InvalidArgumentError,
                     UndefinedRatioError)
from .quadrature import QuadratureRule, integrate_values

# first zero of J0, to the digits used for the published bounds
R0 = 2.404825

PEAK_GRID = 4096
DECAY_GRID = 4096
MIN_TAIL_POINTS = 8


def _beta(result) -> float:
    return float(getattr(result, "beta", result))


def beta_upper_bound(spec: ProblemSpec) -> float:
    return -(spec.m ** 2 + R0 ** 2) / spec.R ** 2


def check_beta_bound(result, spec: ProblemSpec) -> tuple:
    """(threshold, beta < threshold).  ``result`` may be a SolveResult or a float."""
    threshold = beta_upper_bound(spec)
    return threshold, _beta(result) < threshold


def peak_bound_sq(beta: float, spec: ProblemSpec) -> float:
    shifted = beta + spec.m ** 2 / spec.R ** 2
    if shifted == 0:
        raise DegenerateBoundError("beta + m^2/R^2 is zero; the peak bound is undefined")
    return -(1.0 / spec.alpha) * (1.0 / shifted + 1.0)


def peak_value(profile, rule: Optional[QuadratureRule] = None) -> float:
    """max u on a uniform grid plus the quadrature nodes (if given)."""
    sample_max = getattr(profile, "sample_max", None)
    if sample_max is not None:
        return float(sample_max())
    r = np.linspace(0.0, profile.R, PEAK_GRID)
    if rule is not None:
        r = np.concatenate([r, rule.nodes])
    return float(np.max(profile.eval(r)))


def check_peak_bound(result, spec: ProblemSpec, peak: Optional[float] = None) -> tuple:
    """(bound_sq, max u^2 > bound_sq); vacuous when bound_sq <= 0."""
    bound = peak_bound_sq(_beta(result), spec)
    if peak is None:
        peak = peak_value(result.profile, getattr(result, "rule", None))
    if bound <= 0:
        return bound, True
    return bound, peak > 0 and peak ** 2 > bound


def decay_applicable(beta: float, spec: ProblemSpec) -> bool:
    return beta > -spec.m ** 2 / spec.R ** 2 - 1.0


@dataclass(frozen=True)
class DecayFit:
    applicable: bool
    epsilon0_fit: Optional[float]
    passed: Optional[bool]
    # lower bound 2*(beta + m^2/R^2 + 1) on the decay rate; reported, not enforced
    epsilon0_floor: float
    window: tuple = ()
    max_log_excess: Optional[float] = None


def fit_tail(r: np.ndarray, u: np.ndarray, R: float) -> tuple:
    """Least-squares fit of ln u^2 = a - sqrt(eps) r on r in [0.8R, r_cut].

    Returns ``(eps, a, max_excess, (r_start, r_cut))`` where max_excess is the
    largest amount by which ln u^2 sits above the fitted line.
    """
    r = np.asarray(r, dtype=float)
    u2 = np.asarray(u, dtype=float) ** 2
    usable = np.flatnonzero(u2 > 1e-14)
    if usable.size == 0:
        raise InsufficientTailError("profile never exceeds u^2 = 1e-14")
    r_cut = r[usable[-1]]
    mask = (r >= 0.8 * R) & (r <= r_cut) & (u2 > 1e-14)
    if np.count_nonzero(mask) < MIN_TAIL_POINTS:
        raise InsufficientTailError(
            f"only {np.count_nonzero(mask)} usable tail points in [{0.8 * R}, {r_cut}]")
    x, y = r[mask], np.log(u2[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    rate = -slope
    eps = float(rate ** 2) if rate > 0 else 0.0
    return eps, float(intercept), float(np.max(resid)), (float(x[0]), float(r_cut))


def fit_decay(result, spec: ProblemSpec, profile=None) -> DecayFit:
    """Diagnostic exponential fit of the tail when the decay condition holds.

    Passes when the fitted rate is positive and ten times the fitted
    exponential bounds u^2 from above at every tail point.  Points far below
    the line are expected: u drops to zero at r = R.
    """
    beta = _beta(result)
    floor = 2.0 * (beta + spec.m ** 2 / spec.R ** 2 + 1.0)
    if not decay_applicable(beta, spec):
        return DecayFit(False, None, None, floor)
    profile = profile if profile is not None else result.profile
    r = np.linspace(0.0, spec.R, DECAY_GRID)
    eps, _, worst, window = fit_tail(r, profile.eval(r), spec.R)
    ok = eps > 0 and worst <= math.log(10.0)
    return DecayFit(True, eps, ok, floor, window, worst)


def safe_fit_decay(result, spec: ProblemSpec, profile=None) -> DecayFit:
    """fit_decay, but a too-short tail counts as a failed check instead of raising."""
    try:
        return fit_decay(result, spec, profile)
    except InsufficientTailError:
        beta = _beta(result)
        return DecayFit(True, None, False, 2.0 * (beta + spec.m ** 2 / spec.R ** 2 + 1.0))


def poincare_ratio(profile, rule: QuadratureRule, spec: Optional[ProblemSpec] = None) -> float:
    R = (spec or profile.spec).R
    u, ur, _ = profile.sample_nodes(rule)
    r = rule.nodes
    mass = integrate_values(rule, r * u ** 2)
    if not mass > 0:
        raise UndefinedRatioError("Poincare ratio is undefined for the zero profile")
    return (R ** 2 / R0 ** 2) * integrate_values(rule, r * ur ** 2) / mass


def check_poincare(profile, rule: QuadratureRule, spec: Optional[ProblemSpec] = None) -> tuple:
    ratio = poincare_ratio(profile, rule, spec)
    return ratio, ratio >= 1.0 - 1e-9


@dataclass(frozen=True)
class BoundsReport:
    beta_upper: float
    beta_ok: bool
    peak_bound_sq: float
    peak_ok: bool
    decay_applicable: bool
    epsilon0_fit: Optional[float]
    decay_ok: Optional[bool]
    poincare_ratio: float
    epsilon0_floor: float = math.nan
    poincare_ok: bool = True

    @property
    def all_ok(self) -> bool:
        checks = [self.beta_ok, self.peak_ok, self.poincare_ok]
        if self.decay_applicable:
            checks.append(bool(self.decay_ok))
        return all(checks)


def bounds_report(result, spec: Optional[ProblemSpec] = None) -> BoundsReport:
    spec = spec or result.spec
    beta_upper, beta_ok = check_beta_bound(result, spec)
    bound_sq, peak_ok = check_peak_bound(result, spec)
    decay = safe_fit_decay(result, spec)
    ratio, p_ok = check_poincare(result.profile, result.rule, spec)
    return BoundsReport(beta_upper, beta_ok, bound_sq, peak_ok, decay.applicable,
                        decay.epsilon0_fit, decay.passed, ratio, decay.epsilon0_floor, p_ok)


# coupled two-field reduction

@dataclass(frozen=True)
class CoupledSpec:
    """Vortex numbers and propagation constants of the two coupled fields.

    When ``both_nonzero`` is false, ``zero_field`` names the vanishing one.
    """

    m1: int
    m2: int
    beta1: float
    beta2: float
    both_nonzero: bool
    zero_field: str = "v"

    def __post_init__(self):
        if self.zero_field not in ("u", "v"):
            raise InvalidArgumentError("zero_field must be 'u' or 'v'")


@dataclass(frozen=True)
class Reduction:
    m: int
    alpha: float
    beta: float


@dataclass(frozen=True)
class Rejection:
    reason: str


def reduce_coupled(coupled: CoupledSpec, alpha_candidate: float) -> Union[Reduction, Rejection]:
    """Reduce the coupled system to a single equation, or say why it cannot be.

    Nonzero fields that are scalar multiples (v = sqrt(alpha - 1) u) need equal
    |m| and equal beta.  A single nonvanishing field is already the alpha = 1
    equation.
    """
    if not alpha_candidate >= 1:
        raise InvalidArgumentError("alpha_candidate must be >= 1")
    if not coupled.both_nonzero:
        if coupled.zero_field == "v":
            return Reduction(abs(coupled.m1), 1.0, coupled.beta1)
        return Reduction(abs(coupled.m2), 1.0, coupled.beta2)
    if alpha_candidate == 1:
        return Rejection("alpha = 1 makes v = sqrt(alpha - 1) u vanish, "
                         "contradicting two nonzero fields")
    if abs(coupled.m1) != abs(coupled.m2):
        return Rejection(f"|m1| = {abs(coupled.m1)} differs from |m2| = {abs(coupled.m2)}")
    if coupled.beta1 != coupled.beta2:
        return Rejection(f"beta1 = {coupled.beta1} differs from beta2 = {coupled.beta2}")
    return Reduction(abs(coupled.m1), float(alpha_candidate), coupled.beta1)
