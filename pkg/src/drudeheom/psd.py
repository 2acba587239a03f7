"""[N/N] Pade sum-over-poles decomposition of the Bose function.

The Bose function is approximated by a pole expansion plus a linear
remainder,

    1/(1 - e^{-x})  ~  f(x) = 1/x + 1/2 + sum_k 2 eta_k x/(x^2 + xi_k^2) + R_N x,

with N pole positions xi_k > 0, weights eta_k > 0 and the remainder
coefficient R_N = 1/(4(N+1)(2N+3)).  The poles and weights are fixed by
matching the Laurent expansion of the Bose function through order
x^{4N-1}; writing b_j = B_{2j}/(2j)! for the Bernoulli-number Taylor
coefficients of the odd part, the defining moment conditions are

    sum_k 2 eta_k (-1)^{j-1} xi_k^{-2j} + delta_{j,1} R_N = b_j,   j = 1..2N.

Equivalently the pole part is the [N-1/N] Pade approximant in y = x^2 of
the regularized odd part.  compute_psd builds that approximant with exact
rational arithmetic for the linear algebra and extended-precision floating
point only for the polynomial rootfinding, then rounds the result to
doubles.  The moment conditions above are the verifiable contract; see
moment_residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath as mp

from .errors import ArgumentError, CapabilityError, DomainError, InternalError

#: Largest supported expansion order.  The closed-form half-width
#: approximant used by the accuracy criteria is only validated up to 16.
MAX_ORDER = 16

#: Relative distance to a pole of the approximant below which
#: eval_bose_approx refuses to evaluate.
POLE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PadeDecomposition:
    """Poles, weights and remainder of the [N/N] Bose-function approximant.

    Attributes
    ----------
    order : int
        Number of pole pairs N.
    poles : tuple of float
        xi_k, sorted ascending, all positive.
    residues : tuple of float
        eta_k, matched to ``poles``, all positive.
    remainder : float
        R_N = 1/(4(N+1)(2N+3)).
    """

    order: int
    poles: tuple
    residues: tuple
    remainder: float


def remainder_coefficient(order: int) -> Fraction:
    """Exact remainder coefficient R_N = 1/(4(N+1)(2N+3))."""
    return Fraction(1, 4 * (order + 1) * (2 * order + 3))


def bernoulli_numbers(n_max: int) -> list:
    """B_0 .. B_{n_max} as exact Fractions.

    Uses the defining recurrence sum_{j=0}^{m} C(m+1, j) B_j = 0, which is
    slow (O(n^2) fraction operations) but exact; orders here never exceed
    4 * MAX_ORDER.
    """
    coeffs = [Fraction(1)]
    for m in range(1, n_max + 1):
        acc = Fraction(0)
        for j in range(m):
            acc += math.comb(m + 1, j) * coeffs[j]
        coeffs.append(-acc / (m + 1))
    return coeffs


def _pade_denominator(series: list, n: int) -> list:
    """Solve the [n-1/n] Pade linear system exactly.

    Returns denominator coefficients [q_0=1, q_1, .., q_n] such that the
    Cauchy product of `series` and Q has vanishing coefficients for
    y^n .. y^{2n-1}.
    """
    rows = [[series[j - m] for m in range(1, n + 1)] for j in range(n, 2 * n)]
    rhs = [-series[j] for j in range(n, 2 * n)]
    # plain Gaussian elimination with partial pivoting, exact rationals
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(rows[r][col]))
        if rows[piv][col] == 0:
            raise InternalError("singular Pade system; moment matrix degenerate")
        rows[col], rows[piv] = rows[piv], rows[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        for r in range(col + 1, n):
            factor = rows[r][col] / rows[col][col]
            if factor == 0:
                continue
            for c in range(col, n):
                rows[r][c] -= factor * rows[col][c]
            rhs[r] -= factor * rhs[col]
    sol = [Fraction(0)] * n
    for r in range(n - 1, -1, -1):
        acc = rhs[r]
        for c in range(r + 1, n):
            acc -= rows[r][c] * sol[c]
        sol[r] = acc / rows[r][r]
    return [Fraction(1)] + sol


@lru_cache(maxsize=None)
def compute_psd(order: int) -> PadeDecomposition:
    """Compute the [N/N] decomposition of the Bose function.

    Parameters
    ----------
    order : int
        Expansion order N, 0 <= N <= MAX_ORDER.

    Returns
    -------
    PadeDecomposition
        Satisfies all 2N moment conditions to double-precision accuracy
        (residuals are around 1e-15; see moment_residuals).

    Raises
    ------
    ArgumentError
        If ``order`` is negative.
    CapabilityError
        If ``order`` exceeds MAX_ORDER.
    """
    if not isinstance(order, (int,)) or isinstance(order, bool):
        raise ArgumentError(f"order must be an integer, got {order!r}")
    if order < 0:
        raise ArgumentError(f"order must be >= 0, got {order}")
    if order > MAX_ORDER:
        raise CapabilityError(
            f"order {order} exceeds the supported maximum of {MAX_ORDER}"
        )
    remainder = remainder_coefficient(order)
    if order == 0:
        return PadeDecomposition(0, (), (), float(remainder))

    bern = bernoulli_numbers(4 * order)
    odd = [bern[2 * j] / math.factorial(2 * j) for j in range(1, 2 * order + 1)]
    series = [odd[0] - remainder] + odd[1:]
    denom = _pade_denominator(series, order)
    numer = []
    for i in range(order):
        acc = Fraction(0)
        for m in range(min(i, order) + 1):
            acc += series[i - m] * denom[m]
        numer.append(acc)

    # Rootfinding is the only inexact stage; run it with generous precision
    # (the monic denominator is graded over ~N decades in y = x^2).
    with mp.workdps(60 + 12 * order):
        qc = [mp.mpf(c.numerator) / c.denominator for c in denom]
        pc = [mp.mpf(c.numerator) / c.denominator for c in numer]
        roots = mp.polyroots(list(reversed(qc)), maxsteps=500, extraprec=300)
        dq = [i * qc[i] for i in range(len(qc) - 1, 0, -1)]
        pairs = []
        for root in roots:
            if abs(mp.im(root)) > mp.mpf(10) ** (-20) or mp.re(root) >= 0:
                raise InternalError(f"unphysical denominator root {root}")
            y = mp.re(root)
            xi = mp.sqrt(-y)
            eta = mp.polyval(list(reversed(pc)), y) / mp.polyval(dq, y) / 2
            if eta <= 0:
                raise InternalError(f"non-positive weight {eta} at pole {xi}")
            pairs.append((float(xi), float(eta)))

    pairs.sort()
    poles = tuple(p for p, _ in pairs)
    residues = tuple(e for _, e in pairs)
    return PadeDecomposition(order, poles, residues, float(remainder))


def moment_residuals(psd: PadeDecomposition) -> list:
    """Relative residuals of the 2N moment conditions.

    Evaluated in extended precision so the reported numbers reflect the
    stored double-precision poles/weights, not evaluation noise.
    """
    n = psd.order
    if n == 0:
        return []
    bern = bernoulli_numbers(4 * n)
    out = []
    with mp.workdps(60):
        for j in range(1, 2 * n + 1):
            target = mp.mpf(bern[2 * j].numerator) / bern[2 * j].denominator
            target /= mp.factorial(2 * j)
            acc = mp.mpf(0)
            sign = 1 if j % 2 == 1 else -1
            for xi, eta in zip(psd.poles, psd.residues):
                acc += 2 * eta * sign * mp.mpf(xi) ** (-2 * j)
            if j == 1:
                acc += mp.mpf(psd.remainder)
            out.append(float(abs(acc - target) / abs(target)))
    return out


def eval_bose_approx(psd: PadeDecomposition, x):
    """Evaluate the approximant f(x) = 1/x + 1/2 + sum_k 2 eta_k x/(x^2+xi_k^2) + R_N x.

    Accepts real or complex ``x``; the latter is needed when the expansion
    is continued to the Drude pole at x = -i beta gamma.

    Raises
    ------
    DomainError
        If ``x`` is within POLE_TOLERANCE (relative) of 0 or of a pole
        +-i xi_k of the approximant.
    """
    z = complex(x)
    if abs(z) < POLE_TOLERANCE:
        raise DomainError("x is at (or too close to) the pole of 1/x at the origin")
    for xi in psd.poles:
        if abs(z - 1j * xi) < POLE_TOLERANCE * xi or abs(z + 1j * xi) < POLE_TOLERANCE * xi:
            raise DomainError(f"x={x} is too close to the approximant pole at +-{xi}i")
    val = 1.0 / z + 0.5 + psd.remainder * z
    for xi, eta in zip(psd.poles, psd.residues):
        val += 2.0 * eta * z / (z * z + xi * xi)
    return val


def bose_exact(x: float) -> float:
    """Reference Bose function 1/(1 - e^{-x}) for real nonzero x.

    Uses the Laurent series 1/x + 1/2 + x/12 - x^3/720 for |x| < 1e-3 and
    the overflow-safe form 1 + 1/expm1(x) elsewhere.
    """
    if x == 0:
        raise DomainError("Bose function has a pole at x = 0")
    ax = abs(x)
    if ax < 1e-3:
        return 1.0 / x + 0.5 + x / 12.0 - x ** 3 / 720.0
    if x > 700.0:
        return 1.0
    return 1.0 + 1.0 / math.expm1(x)
