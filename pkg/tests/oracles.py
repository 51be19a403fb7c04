"""Reference computations that share no code path with the package."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy import integrate


def signed_integral(jumps, sign0, upper):
    """Exact rational integral of sign0 * (-1)**N(u) over [0, upper]."""
    total = Fraction(0)
    sign = sign0
    prev = Fraction(0)
    up = Fraction(upper)
    for j in jumps:
        j = Fraction(float(j))
        if j > up:
            break
        total += sign * (j - prev)
        prev = j
        sign = -sign
    total += sign * (up - prev)
    return total


def transport_oracle(jumps, sign0, n, t):
    return float(signed_integral(jumps, sign0, Fraction(t) * n)) / math.sqrt(n)


def transport_second_moment_quad(n, s, t):
    """E[X_n(s) X_n(t)] = (1/n) * double integral of exp(-2|u-v|) over [0,sn] x [0,tn]."""
    if s == 0 or t == 0:
        return 0.0
    val, _ = integrate.dblquad(lambda v, u: math.exp(-2.0 * abs(u - v)), 0.0, s * n,
                               0.0, t * n, epsabs=1e-12, epsrel=1e-12)
    return val / n


def barrier_pairs_by_rejection(n, count, rng):
    """Draw (alpha, beta) with density prop. to (b + a) exp(-2n a) exp(-2n b), a = -alpha.

    Proposal: a, b iid Exp(n); acceptance ratio (a + b) exp(-n (a + b)) / max,
    with max = 1 / (n e) attained at a + b = 1 / n.
    """
    out_a, out_b = [], []
    c = 2.0 * n
    while len(out_a) < count:
        a = rng.exponential(2.0 / c, size=4 * count)
        b = rng.exponential(2.0 / c, size=4 * count)
        ratio = (a + b) * np.exp(-(c / 2.0) * (a + b)) * (c / 2.0) * math.e
        keep = rng.random(a.size) < ratio
        out_a.extend(a[keep])
        out_b.extend(b[keep])
    return -np.array(out_a[:count]), np.array(out_b[:count])
