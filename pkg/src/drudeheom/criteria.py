"""A-priori accuracy control for the hierarchy order.

The only approximation in the Drude hierarchy is treating the off-basis-set
residue delta_C_N(t) as white noise.  That is justified when the residue's
inverse memory time Gamma_N (half-width of its spectrum) is fast compared
with the system, and when Kubo's motional-narrowing parameter

    kappa_N = sqrt(Gamma_N / Delta_N)

is large.  The half-width is well approximated in closed form by

    Gamma_N(gamma) ~ (1/beta) [ r_N + sqrt((beta gamma)^2 + 0.34 r_N^2) ],
    r_N = 1/(2 R_N) = 2 (N+1)(2N+3),

so both control parameters are available before any propagation.  The
dynamics is classified as numerically accurate when
min(Gamma_N/Omega_s, kappa_N) >= 5 and semi-quantitative above 2, with
Omega_s the characteristic system frequency supplied by the model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .bath import DrudeBath
from .errors import ArgumentError, CapabilityError
from .psd import MAX_ORDER

ACCURATE_THRESHOLD = 5.0
SEMI_QUANTITATIVE_THRESHOLD = 2.0


class Tier(enum.Enum):
    """Quality classification of a hierarchy order for a given scenario."""

    ACCURATE = "accurate"
    SEMI_QUANTITATIVE = "semi-quantitative"
    UNRELIABLE = "unreliable"


@dataclass(frozen=True)
class AccuracyReport:
    """Accuracy-control numbers for one (order, bath, system) combination.

    ``ratio`` is Gamma_N / Omega_s; the tier is Accurate when
    min(ratio, kappa_n) >= 5 and SemiQuantitative when >= 2.  The raw
    numbers are carried alongside the tier so borderline cases stay
    visible.
    """

    order: int
    gamma_n: float
    kappa_n: float
    omega_s: float
    ratio: float
    tier: Tier

    @property
    def control_minimum(self) -> float:
        return min(self.ratio, self.kappa_n)


def r_coefficient(order: int) -> float:
    """r_N = 1/(2 R_N) = 2 (N+1)(2N+3)."""
    return 2.0 * (order + 1) * (2 * order + 3)


def gamma_approx(order: int, bath: DrudeBath) -> float:
    """Closed-form approximant of the residue-spectrum half-width Gamma_N."""
    if order < 0:
        raise ArgumentError(f"order must be >= 0, got {order}")
    r_n = r_coefficient(order)
    bg = bath.beta * bath.gamma
    return (r_n + math.sqrt(bg * bg + 0.34 * r_n * r_n)) / bath.beta


def kappa(order: int, bath: DrudeBath) -> float:
    """Kubo narrowing parameter kappa_N = sqrt(Gamma_N / Delta_N)."""
    r_n = r_coefficient(order)
    gam_n = gamma_approx(order, bath)
    return math.sqrt(r_n * gam_n / (bath.beta * bath.lam * bath.gamma))


def classify(control_minimum: float) -> Tier:
    """Map min(Gamma_N/Omega_s, kappa_N) onto a quality tier (sharp thresholds)."""
    if control_minimum >= ACCURATE_THRESHOLD:
        return Tier.ACCURATE
    if control_minimum >= SEMI_QUANTITATIVE_THRESHOLD:
        return Tier.SEMI_QUANTITATIVE
    return Tier.UNRELIABLE


def accuracy_report(order: int, bath: DrudeBath, omega_s: float) -> AccuracyReport:
    """Assemble the full accuracy report for one hierarchy order."""
    if not (omega_s > 0):
        raise ArgumentError(f"omega_s must be positive, got {omega_s}")
    gam_n = gamma_approx(order, bath)
    kap = kappa(order, bath)
    ratio = gam_n / omega_s
    return AccuracyReport(
        order=order,
        gamma_n=gam_n,
        kappa_n=kap,
        omega_s=omega_s,
        ratio=ratio,
        tier=classify(min(ratio, kap)),
    )


def minimum_order(bath: DrudeBath, omega_s: float, target: Tier) -> int:
    """Smallest order in [0, MAX_ORDER] whose tier meets the target.

    Raises
    ------
    CapabilityError
        If even N = MAX_ORDER does not qualify; the exception carries the
        MAX_ORDER report in its ``report`` attribute so the caller can see
        how far off the scenario is.
    """
    if target is Tier.UNRELIABLE:
        raise ArgumentError("target tier must be Accurate or SemiQuantitative")
    threshold = (
        ACCURATE_THRESHOLD if target is Tier.ACCURATE else SEMI_QUANTITATIVE_THRESHOLD
    )
    report = None
    for order in range(MAX_ORDER + 1):
        report = accuracy_report(order, bath, omega_s)
        if report.control_minimum >= threshold:
            return order
    err = CapabilityError(
        f"no order up to {MAX_ORDER} reaches tier {target.value}: at N={MAX_ORDER}, "
        f"Gamma_N/Omega_s = {report.ratio:.3g}, kappa_N = {report.kappa_n:.3g}"
    )
    err.report = report
    raise err


def criteria_curves(order: int, beta_gamma_grid) -> list:
    """Rows (beta*gamma, beta*Gamma_N, kbar_N) over a beta*gamma grid.

    kbar_N = sqrt(beta lam) * kappa_N = sqrt(r_N * beta Gamma_N / (beta gamma))
    is independent of the reorganization energy, so one curve per order
    covers all coupling strengths.
    """
    r_n = r_coefficient(order)
    rows = []
    for bg in beta_gamma_grid:
        bg = float(bg)
        if not (bg > 0):
            raise ArgumentError(f"beta*gamma grid values must be positive, got {bg}")
        b_gamma_n = r_n + math.sqrt(bg * bg + 0.34 * r_n * r_n)
        kbar = math.sqrt(r_n * b_gamma_n / bg)
        rows.append((bg, b_gamma_n, kbar))
    return rows
