"""Numba kernels for the packed hierarchy propagator.

The packed state is one contiguous complex array y of shape (top, d, d)
whose row 0 is a permanent all-zero sentinel; neighbor pointer tables
(up/dn) index into it, with 0 meaning "absent".  Freed slots keep zeroed
value and coefficient rows, so they contribute nothing and receive a zero
derivative without any branching in the hot loop.

Everything here must reproduce hierarchy.heom_rhs exactly (same operation
structure, fastmath off); the equivalence is covered by tests.
"""

import warnings

with warnings.catch_warnings():
    # the sandboxed TBB build predates numba's minimum; numba falls back
    # to another threading layer and the run is unaffected
    warnings.filterwarnings("ignore", message=".*TBB threading layer.*")
    import numba

import numpy as np


@numba.njit(cache=True, fastmath=False)
def heom_rhs_kernel(y, out, h, qs, q2s, deltas, bath_of, gamma_n,
                    up, dn, cu, cl, cr, top, scratch):
    """Hierarchy right-hand side on the packed state.

    Parameters are the packed per-slot tables; ``scratch`` is a
    (3, n_baths, d, d) complex workspace for the per-bath weighted
    neighbor sums.  Writes rows 1..top-1 of ``out``.
    """
    d = y.shape[1]
    n_baths = qs.shape[0]
    n_modes = up.shape[1]
    usum = scratch[0]
    lsum = scratch[1]
    rsum = scratch[2]
    for s in range(1, top):
        for b in range(n_baths):
            for a in range(d):
                for c in range(d):
                    usum[b, a, c] = 0.0
                    lsum[b, a, c] = 0.0
                    rsum[b, a, c] = 0.0
        for k in range(n_modes):
            iu = up[s, k]
            idn = dn[s, k]
            if iu == 0 and idn == 0:
                continue
            b = bath_of[k]
            cuk = cu[s, k]
            clk = cl[s, k]
            crk = cr[s, k]
            for a in range(d):
                for c in range(d):
                    usum[b, a, c] += cuk * y[iu, a, c]
                    yd = y[idn, a, c]
                    lsum[b, a, c] += clk * yd
                    rsum[b, a, c] += crk * yd
        for a in range(d):
            for c in range(d):
                acc = 0.0 + 0.0j
                for m in range(d):
                    acc += h[a, m] * y[s, m, c] - y[s, a, m] * h[m, c]
                out[s, a, c] = -1j * acc - gamma_n[s] * y[s, a, c]
        for b in range(n_baths):
            for a in range(d):
                for c in range(d):
                    wn = 0.0 + 0.0j
                    qrq = 0.0 + 0.0j
                    tier_l = 0.0 + 0.0j
                    tier_r = 0.0 + 0.0j
                    for m in range(d):
                        wn += q2s[b, a, m] * y[s, m, c] + y[s, a, m] * q2s[b, m, c]
                        tier_l += qs[b, a, m] * (usum[b, m, c] + lsum[b, m, c])
                        tier_r += (usum[b, a, m] + rsum[b, a, m]) * qs[b, m, c]
                        for n in range(d):
                            qrq += qs[b, a, m] * y[s, m, n] * qs[b, n, c]
                    out[s, a, c] += -deltas[b] * (wn - 2.0 * qrq) + tier_l - tier_r


@numba.njit(cache=True, fastmath=False, parallel=True)
def heom_rhs_kernel_parallel(y, out, h, qs, q2s, deltas, bath_of, gamma_n,
                             up, dn, cu, cl, cr, top, scratch_mt):
    """Thread-parallel variant of heom_rhs_kernel.

    Slots write disjoint output rows and each slot's arithmetic is
    identical to the serial kernel, so results are bitwise independent of
    the thread count.  ``scratch_mt`` is (n_threads, 3, n_baths, d, d).
    """
    d = y.shape[1]
    n_baths = qs.shape[0]
    n_modes = up.shape[1]
    for s in numba.prange(1, top):
        tid = numba.get_thread_id()
        usum = scratch_mt[tid, 0]
        lsum = scratch_mt[tid, 1]
        rsum = scratch_mt[tid, 2]
        for b in range(n_baths):
            for a in range(d):
                for c in range(d):
                    usum[b, a, c] = 0.0
                    lsum[b, a, c] = 0.0
                    rsum[b, a, c] = 0.0
        for k in range(n_modes):
            iu = up[s, k]
            idn = dn[s, k]
            if iu == 0 and idn == 0:
                continue
            b = bath_of[k]
            cuk = cu[s, k]
            clk = cl[s, k]
            crk = cr[s, k]
            for a in range(d):
                for c in range(d):
                    usum[b, a, c] += cuk * y[iu, a, c]
                    yd = y[idn, a, c]
                    lsum[b, a, c] += clk * yd
                    rsum[b, a, c] += crk * yd
        for a in range(d):
            for c in range(d):
                acc = 0.0 + 0.0j
                for m in range(d):
                    acc += h[a, m] * y[s, m, c] - y[s, a, m] * h[m, c]
                out[s, a, c] = -1j * acc - gamma_n[s] * y[s, a, c]
        for b in range(n_baths):
            for a in range(d):
                for c in range(d):
                    wn = 0.0 + 0.0j
                    qrq = 0.0 + 0.0j
                    tier_l = 0.0 + 0.0j
                    tier_r = 0.0 + 0.0j
                    for m in range(d):
                        wn += q2s[b, a, m] * y[s, m, c] + y[s, a, m] * q2s[b, m, c]
                        tier_l += qs[b, a, m] * (usum[b, m, c] + lsum[b, m, c])
                        tier_r += (usum[b, a, m] + rsum[b, a, m]) * qs[b, m, c]
                        for n in range(d):
                            qrq += qs[b, a, m] * y[s, m, n] * qs[b, n, c]
                    out[s, a, c] += -deltas[b] * (wn - 2.0 * qrq) + tier_l - tier_r


@numba.njit(cache=True, fastmath=False)
def heom_rhs_kernel_2x2(yf, outf, h, qs, q2s, deltas, bath_of, gamma_n,
                        up, dn, cu, cl, cr, top):
    """Fully unrolled right-hand side for two-level systems.

    ``yf``/``outf`` are the packed states viewed as (slots, 4), row-major
    2x2.  Same arithmetic as heom_rhs_kernel, hand-specialized because the
    deep spin-boson hierarchies dominate the total runtime.
    """
    n_baths = qs.shape[0]
    n_modes = up.shape[1]
    h00 = h[0, 0]
    h01 = h[0, 1]
    h10 = h[1, 0]
    h11 = h[1, 1]
    for s in range(1, top):
        y0 = yf[s, 0]
        y1 = yf[s, 1]
        y2 = yf[s, 2]
        y3 = yf[s, 3]
        g = gamma_n[s]
        # -i [H, y] - gamma_n y
        o0 = -1j * (h00 * y0 + h01 * y2 - y0 * h00 - y1 * h10) - g * y0
        o1 = -1j * (h00 * y1 + h01 * y3 - y0 * h01 - y1 * h11) - g * y1
        o2 = -1j * (h10 * y0 + h11 * y2 - y2 * h00 - y3 * h10) - g * y2
        o3 = -1j * (h10 * y1 + h11 * y3 - y2 * h01 - y3 * h11) - g * y3
        for b in range(n_baths):
            u0 = 0.0 + 0.0j
            u1 = 0.0 + 0.0j
            u2 = 0.0 + 0.0j
            u3 = 0.0 + 0.0j
            l0 = 0.0 + 0.0j
            l1 = 0.0 + 0.0j
            l2 = 0.0 + 0.0j
            l3 = 0.0 + 0.0j
            r0 = 0.0 + 0.0j
            r1 = 0.0 + 0.0j
            r2 = 0.0 + 0.0j
            r3 = 0.0 + 0.0j
            for k in range(n_modes):
                if bath_of[k] != b:
                    continue
                iu = up[s, k]
                idn = dn[s, k]
                if iu == 0 and idn == 0:
                    continue
                cuk = cu[s, k]
                u0 += cuk * yf[iu, 0]
                u1 += cuk * yf[iu, 1]
                u2 += cuk * yf[iu, 2]
                u3 += cuk * yf[iu, 3]
                clk = cl[s, k]
                crk = cr[s, k]
                d0 = yf[idn, 0]
                d1 = yf[idn, 1]
                d2 = yf[idn, 2]
                d3 = yf[idn, 3]
                l0 += clk * d0
                l1 += clk * d1
                l2 += clk * d2
                l3 += clk * d3
                r0 += crk * d0
                r1 += crk * d1
                r2 += crk * d2
                r3 += crk * d3
            q00 = qs[b, 0, 0]
            q01 = qs[b, 0, 1]
            q10 = qs[b, 1, 0]
            q11 = qs[b, 1, 1]
            p00 = q2s[b, 0, 0]
            p01 = q2s[b, 0, 1]
            p10 = q2s[b, 1, 0]
            p11 = q2s[b, 1, 1]
            delta = deltas[b]
            # WNR double commutator: Q2 y + y Q2 - 2 Q y Q
            qy0 = q00 * y0 + q01 * y2
            qy1 = q00 * y1 + q01 * y3
            qy2 = q10 * y0 + q11 * y2
            qy3 = q10 * y1 + q11 * y3
            wn0 = p00 * y0 + p01 * y2 + y0 * p00 + y1 * p10 \
                - 2.0 * (qy0 * q00 + qy1 * q10)
            wn1 = p00 * y1 + p01 * y3 + y0 * p01 + y1 * p11 \
                - 2.0 * (qy0 * q01 + qy1 * q11)
            wn2 = p10 * y0 + p11 * y2 + y2 * p00 + y3 * p10 \
                - 2.0 * (qy2 * q00 + qy3 * q10)
            wn3 = p10 * y1 + p11 * y3 + y2 * p01 + y3 * p11 \
                - 2.0 * (qy2 * q01 + qy3 * q11)
            # Q (usum + lsum) - (usum + rsum) Q
            a0 = u0 + l0
            a1 = u1 + l1
            a2 = u2 + l2
            a3 = u3 + l3
            b0 = u0 + r0
            b1 = u1 + r1
            b2 = u2 + r2
            b3 = u3 + r3
            o0 += -delta * wn0 + q00 * a0 + q01 * a2 - (b0 * q00 + b1 * q10)
            o1 += -delta * wn1 + q00 * a1 + q01 * a3 - (b0 * q01 + b1 * q11)
            o2 += -delta * wn2 + q10 * a0 + q11 * a2 - (b2 * q00 + b3 * q10)
            o3 += -delta * wn3 + q10 * a1 + q11 * a3 - (b2 * q01 + b3 * q11)
        outf[s, 0] = o0
        outf[s, 1] = o1
        outf[s, 2] = o2
        outf[s, 3] = o3


@numba.njit(cache=True, fastmath=False, parallel=True)
def heom_rhs_kernel_2x2_parallel(yf, outf, h, qs, q2s, deltas, bath_of,
                                 gamma_n, up, dn, cu, cl, cr, top):
    """Thread-parallel twin of heom_rhs_kernel_2x2 (disjoint row writes)."""
    n_baths = qs.shape[0]
    n_modes = up.shape[1]
    h00 = h[0, 0]
    h01 = h[0, 1]
    h10 = h[1, 0]
    h11 = h[1, 1]
    for s in numba.prange(1, top):
        y0 = yf[s, 0]
        y1 = yf[s, 1]
        y2 = yf[s, 2]
        y3 = yf[s, 3]
        g = gamma_n[s]
        o0 = -1j * (h00 * y0 + h01 * y2 - y0 * h00 - y1 * h10) - g * y0
        o1 = -1j * (h00 * y1 + h01 * y3 - y0 * h01 - y1 * h11) - g * y1
        o2 = -1j * (h10 * y0 + h11 * y2 - y2 * h00 - y3 * h10) - g * y2
        o3 = -1j * (h10 * y1 + h11 * y3 - y2 * h01 - y3 * h11) - g * y3
        for b in range(n_baths):
            u0 = 0.0 + 0.0j
            u1 = 0.0 + 0.0j
            u2 = 0.0 + 0.0j
            u3 = 0.0 + 0.0j
            l0 = 0.0 + 0.0j
            l1 = 0.0 + 0.0j
            l2 = 0.0 + 0.0j
            l3 = 0.0 + 0.0j
            r0 = 0.0 + 0.0j
            r1 = 0.0 + 0.0j
            r2 = 0.0 + 0.0j
            r3 = 0.0 + 0.0j
            for k in range(n_modes):
                if bath_of[k] != b:
                    continue
                iu = up[s, k]
                idn = dn[s, k]
                if iu == 0 and idn == 0:
                    continue
                cuk = cu[s, k]
                u0 += cuk * yf[iu, 0]
                u1 += cuk * yf[iu, 1]
                u2 += cuk * yf[iu, 2]
                u3 += cuk * yf[iu, 3]
                clk = cl[s, k]
                crk = cr[s, k]
                d0 = yf[idn, 0]
                d1 = yf[idn, 1]
                d2 = yf[idn, 2]
                d3 = yf[idn, 3]
                l0 += clk * d0
                l1 += clk * d1
                l2 += clk * d2
                l3 += clk * d3
                r0 += crk * d0
                r1 += crk * d1
                r2 += crk * d2
                r3 += crk * d3
            q00 = qs[b, 0, 0]
            q01 = qs[b, 0, 1]
            q10 = qs[b, 1, 0]
            q11 = qs[b, 1, 1]
            p00 = q2s[b, 0, 0]
            p01 = q2s[b, 0, 1]
            p10 = q2s[b, 1, 0]
            p11 = q2s[b, 1, 1]
            delta = deltas[b]
            qy0 = q00 * y0 + q01 * y2
            qy1 = q00 * y1 + q01 * y3
            qy2 = q10 * y0 + q11 * y2
            qy3 = q10 * y1 + q11 * y3
            wn0 = p00 * y0 + p01 * y2 + y0 * p00 + y1 * p10 \
                - 2.0 * (qy0 * q00 + qy1 * q10)
            wn1 = p00 * y1 + p01 * y3 + y0 * p01 + y1 * p11 \
                - 2.0 * (qy0 * q01 + qy1 * q11)
            wn2 = p10 * y0 + p11 * y2 + y2 * p00 + y3 * p10 \
                - 2.0 * (qy2 * q00 + qy3 * q10)
            wn3 = p10 * y1 + p11 * y3 + y2 * p01 + y3 * p11 \
                - 2.0 * (qy2 * q01 + qy3 * q11)
            a0 = u0 + l0
            a1 = u1 + l1
            a2 = u2 + l2
            a3 = u3 + l3
            bb0 = u0 + r0
            bb1 = u1 + r1
            bb2 = u2 + r2
            bb3 = u3 + r3
            o0 += -delta * wn0 + q00 * a0 + q01 * a2 - (bb0 * q00 + bb1 * q10)
            o1 += -delta * wn1 + q00 * a1 + q01 * a3 - (bb0 * q01 + bb1 * q11)
            o2 += -delta * wn2 + q10 * a0 + q11 * a2 - (bb2 * q00 + bb3 * q10)
            o3 += -delta * wn3 + q10 * a1 + q11 * a3 - (bb2 * q01 + bb3 * q11)
        outf[s, 0] = o0
        outf[s, 1] = o1
        outf[s, 2] = o2
        outf[s, 3] = o3


@numba.njit(cache=True, fastmath=False)
def rk4_combine(y, k1, k2, k3, k4, dt, top):
    """y += dt/6 (k1 + 2 k2 + 2 k3 + k4) over rows 0..top-1."""
    d = y.shape[1]
    w = dt / 6.0
    for s in range(top):
        for a in range(d):
            for c in range(d):
                y[s, a, c] += w * (k1[s, a, c] + 2.0 * k2[s, a, c]
                                   + 2.0 * k3[s, a, c] + k4[s, a, c])


@numba.njit(cache=True, fastmath=False)
def axpy_into(dest, y, k, factor, top):
    """dest = y + factor * k over rows 0..top-1."""
    d = y.shape[1]
    for s in range(top):
        for a in range(d):
            for c in range(d):
                dest[s, a, c] = y[s, a, c] + factor * k[s, a, c]
