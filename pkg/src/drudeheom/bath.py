"""Drude bath and its exponential correlation-function expansion.

A Drude bath has spectral density J(w) = 2 lambda gamma w / (w^2 + gamma^2)
and, at inverse temperature beta, the correlation function

    C(t) = (1/pi) Int dw  e^{-iwt} J(w) / (1 - e^{-beta w}),   t >= 0.

Closing the contour in the lower half plane with the Bose function replaced
by its [N/N] pole decomposition turns C(t) into N+1 exponentials: one from
the Drude pole at -i gamma with complex coefficient

    c_D = -2 i lambda gamma f(-i beta gamma),

and one real term per Bose pole,

    c_k = 4 eta_k lambda gamma gamma_k / (beta (gamma_k^2 - gamma^2)),
    gamma_k = xi_k / beta.

What the finite pole set misses is the white-noise residue: a narrow even
function delta_C(t) of area 2 Delta_N, with Delta_N = 2 lambda beta gamma R_N.
Its spectrum delta_C(w) (half Fourier transform convention) starts at
delta_C(0) = Delta_N exactly and decays monotonically; the half-width of
that bell is the inverse memory time of everything the expansion left out.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegeneracyError, InternalError
from .psd import PadeDecomposition, bose_exact, eval_bose_approx

#: Relative tolerance below which a PSD exponent colliding with the Drude
#: cutoff (or a Matsubara frequency colliding with it) is treated as
#: degenerate rather than silently producing a huge coefficient.
POLE_COLLISION_RTOL = 1e-10


@dataclass(frozen=True)
class DrudeBath:
    """Drude bath parameters, all strictly positive.

    Attributes
    ----------
    lam : float
        Reorganization energy lambda (energy units, hbar = 1).
    gamma : float
        Drude cutoff rate gamma (energy units).
    beta : float
        Inverse temperature (inverse energy units).
    """

    lam: float
    gamma: float
    beta: float

    def __post_init__(self):
        for name in ("lam", "gamma", "beta"):
            value = getattr(self, name)
            if not (value > 0) or not math.isfinite(value):
                raise ArgumentError(f"{name} must be strictly positive, got {value}")

    def spectral_density(self, omega):
        """J(w) = 2 lambda gamma w / (w^2 + gamma^2); odd, peaks at |w| = gamma."""
        omega = np.asarray(omega, dtype=float)
        out = 2.0 * self.lam * self.gamma * omega / (omega ** 2 + self.gamma ** 2)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class BathExpansion:
    """Exponential expansion C(t) ~ sum_k c_k e^{-gamma_k t} of one Drude bath.

    Attributes
    ----------
    n_pade : int
        Order N of the underlying pole decomposition.
    c_drude : complex
        Coefficient of the Drude exponential (the only complex one).
    gamma_drude : float
        Drude exponent; equals the bath cutoff gamma.
    modes : tuple of (float, float)
        (c_k, gamma_k) pairs for the N Bose-pole terms; all real.
    wnr_strength : float
        Delta_N = 2 lambda beta gamma R_N, the white-noise-residue strength
        (delta_C(t) ~ 2 Delta_N delta(t)).
    """

    n_pade: int
    c_drude: complex
    gamma_drude: float
    modes: tuple
    wnr_strength: float

    def coefficients(self) -> np.ndarray:
        """All expansion coefficients, Drude first."""
        return np.array([self.c_drude] + [c for c, _ in self.modes], dtype=complex)

    def exponents(self) -> np.ndarray:
        """All decay exponents, Drude first."""
        return np.array([self.gamma_drude] + [g for _, g in self.modes], dtype=float)

    def evaluate(self, t):
        """sum_k c_k e^{-gamma_k t} for t >= 0 (scalar or array)."""
        t = np.asarray(t, dtype=float)
        val = np.tensordot(self.coefficients(),
                           np.exp(-np.multiply.outer(self.exponents(), t)), axes=(0, 0))
        return val if val.ndim else complex(val)


def expand(bath: DrudeBath, psd: PadeDecomposition) -> BathExpansion:
    """Expand the bath correlation function over the given pole decomposition.

    Raises
    ------
    DegeneracyError
        If some gamma_k = xi_k/beta collides with the Drude cutoff within
        POLE_COLLISION_RTOL relative; perturb gamma or change the order.
    """
    lam, gamma, beta = bath.lam, bath.gamma, bath.beta
    modes = []
    for xi, eta in zip(psd.poles, psd.residues):
        gk = xi / beta
        if abs(gk - gamma) < POLE_COLLISION_RTOL * gamma:
            raise DegeneracyError(
                f"expansion exponent xi/beta = {gk} collides with the Drude cutoff "
                f"gamma = {gamma}; perturb gamma (or beta) or change the order"
            )
        ck = 4.0 * eta * lam * gamma * gk / (beta * (gk * gk - gamma * gamma))
        modes.append((ck, gk))
    c_drude = -2j * lam * gamma * eval_bose_approx(psd, -1j * beta * gamma)
    delta = 2.0 * lam * beta * gamma * psd.remainder
    return BathExpansion(
        n_pade=psd.order,
        c_drude=complex(c_drude),
        gamma_drude=gamma,
        modes=tuple(modes),
        wnr_strength=delta,
    )


def _matsubara_terms(bath: DrudeBath, n_matsubara: int):
    """Coefficients and frequencies of the first M Matsubara exponentials."""
    m = np.arange(1, n_matsubara + 1, dtype=float)
    nu = 2.0 * math.pi * m / bath.beta
    near = np.abs(nu - bath.gamma) < POLE_COLLISION_RTOL * bath.gamma
    if near.any():
        k = int(np.argmax(near)) + 1
        raise DegeneracyError(
            f"beta*gamma = {bath.beta * bath.gamma} collides with the Matsubara "
            f"frequency 2*pi*{k}; the oracle coefficient diverges there"
        )
    coeff = (4.0 * bath.lam * bath.gamma / bath.beta) * nu / (nu ** 2 - bath.gamma ** 2)
    return coeff, nu


def correlation_tail_bound(bath: DrudeBath, t: float, n_matsubara: int) -> float:
    """Upper bound on the dropped Matsubara tail sum at time t >= 0.

    Terms decay like e^{-nu_m t}/nu_m; for nu_{M+1} > gamma the geometric
    bound below holds.  Diverges (returns inf) at t = 0 with too few terms,
    reflecting the genuine logarithmic short-time singularity of C(t).
    """
    nu_next = 2.0 * math.pi * (n_matsubara + 1) / bath.beta
    if nu_next <= bath.gamma:
        return math.inf
    amp = (4.0 * bath.lam * bath.gamma / bath.beta) / nu_next
    amp /= 1.0 - (bath.gamma / nu_next) ** 2
    ratio = math.exp(-2.0 * math.pi * t / bath.beta)
    if ratio >= 1.0:
        return math.inf
    return amp * math.exp(-nu_next * t) / (1.0 - ratio)


def correlation_exact(bath: DrudeBath, t, n_matsubara: int | None = None):
    """Matsubara-summed reference for the exact C(t), t >= 0 (test oracle).

    C(t) = lambda gamma (cot(beta gamma/2) - i) e^{-gamma t}
           + sum_m (4 lambda gamma / beta) nu_m/(nu_m^2 - gamma^2) e^{-nu_m t}.

    Parameters
    ----------
    t : float or array
        Times, all >= 0.  Strictly positive times are required for the
        adaptive mode: C(t) has a log singularity at t = 0+.
    n_matsubara : int, optional
        Number of Matsubara terms M.  When omitted, M is doubled until the
        analytic tail bound drops below 1e-10 * lambda * gamma at min(t).

    Raises
    ------
    DegeneracyError
        If beta*gamma sits on a Matsubara frequency 2 pi m.
    ArgumentError
        For negative times, or t = 0 in adaptive mode.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if (t_arr < 0).any():
        raise ArgumentError("correlation_exact is defined for t >= 0 only")
    if n_matsubara is None:
        t_min = float(t_arr.min())
        if t_min <= 0.0:
            raise ArgumentError(
                "adaptive truncation needs t > 0; C(t) is log-singular at t = 0"
            )
        target = 1e-10 * bath.lam * bath.gamma
        n_matsubara = max(8, int(bath.beta * bath.gamma / (2 * math.pi)) + 4)
        while correlation_tail_bound(bath, t_min, n_matsubara) > target:
            n_matsubara *= 2
            if n_matsubara > 2 ** 28:
                raise InternalError("Matsubara truncation did not converge")
    x = bath.beta * bath.gamma / 2.0
    drude = bath.lam * bath.gamma * (1.0 / math.tan(x) - 1j)
    coeff, nu = _matsubara_terms(bath, n_matsubara)
    val = drude * np.exp(-bath.gamma * t_arr)
    val = val + np.exp(-np.multiply.outer(t_arr, nu)) @ coeff
    return val if np.ndim(t) else complex(val[0])


def residue_spectrum(bath: DrudeBath, expansion: BathExpansion, omega: float) -> float:
    """Off-basis-set residue spectrum delta_C_N(w), real and even.

    delta_C_N(w) = J(w)/(1 - e^{-beta w}) - sum_k Re[c_k/(gamma_k - i w)],
    with the removable w -> 0 singularity of the first term evaluated by
    series (J(w) * bose(beta w) = 2 lambda gamma/(w^2+gamma^2) *
    (1/beta + w/2 + beta w^2/12 - ...) for small beta w).
    """
    lam, gamma, beta = bath.lam, bath.gamma, bath.beta
    bw = beta * omega
    if abs(bw) < 1e-3:
        poly = 1.0 / beta + omega / 2.0 + beta * omega ** 2 / 12.0 \
            - beta ** 3 * omega ** 4 / 720.0
        fdt = 2.0 * lam * gamma / (omega ** 2 + gamma ** 2) * poly
    else:
        fdt = bath.spectral_density(omega) * bose_exact(bw)
    fit = sum(
        (c / (g - 1j * omega)).real
        for c, g in zip(expansion.coefficients(), expansion.exponents())
    )
    return fdt - fit


def residue_hwhm(bath: DrudeBath, expansion: BathExpansion) -> float:
    """Exact half-width-at-half-maximum of delta_C_N(w), by bisection.

    Solves delta_C_N(w) = Delta_N / 2 on w > 0 to 1e-9 relative; this is
    the quantity that the closed-form approximant in `criteria` fits.
    """
    target = expansion.wnr_strength / 2.0
    hi = 1.0 / bath.beta
    while residue_spectrum(bath, expansion, hi) > target:
        hi *= 2.0
        if hi > 1e6 / bath.beta:
            raise InternalError(
                "no half-maximum crossing found below 1e6/beta; expansion is broken"
            )
    lo = 0.0
    while (hi - lo) > 1e-9 * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if residue_spectrum(bath, expansion, mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def spectrum_table(bath: DrudeBath, expansion: BathExpansion,
                   omega_grid) -> np.ndarray:
    """Rows (w, delta_C_N(w)/Delta_N, w/Gamma_N) over a frequency grid.

    The x-normalization uses the closed-form half-width approximant, which
    is what makes curves for different (N, beta gamma) collapse onto one
    bell shape.
    """
    from .criteria import gamma_approx

    gam_n = gamma_approx(expansion.n_pade, bath)
    delta = expansion.wnr_strength
    rows = [
        (float(w), residue_spectrum(bath, expansion, float(w)) / delta, float(w) / gam_n)
        for w in np.asarray(omega_grid, dtype=float)
    ]
    return np.array(rows)
