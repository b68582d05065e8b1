"""Independent reference implementations used to cross-check the library.

Everything here is deliberately plain-Python and loop-based so it shares
no code path with the vectorized implementations under test.
"""

import math


def brute_force_best_split(rows, cost_fn, cost_fp):
    """Exhaustive (feature, midpoint) search over instance tuples.

    `rows` is a list of (x_t, rate, label). Returns (feature_index,
    threshold, decrease) or None, with the same tie policy as the library:
    earlier feature first, then lowest threshold, strictly-greater wins.
    """

    def gini(n_n, n_h):
        mass = cost_fp * n_n + cost_fn * n_h
        p_h = cost_fn * n_h / mass
        return 2.0 * p_h * (1.0 - p_h)

    n = len(rows)
    if n < 2:
        return None
    tot_h = sum(r[2] for r in rows)
    tot_n = n - tot_h
    if tot_h == 0 or tot_n == 0:
        return None
    parent = gini(tot_n, tot_h)
    parent_mass = cost_fp * tot_n + cost_fn * tot_h

    best = None
    for fi in range(2):
        values = sorted(set(r[fi] for r in rows))
        for lo, hi in zip(values, values[1:]):
            threshold = (lo + hi) / 2.0
            if not threshold > lo:
                threshold = hi
            left = [r for r in rows if r[fi] < threshold]
            right = [r for r in rows if r[fi] >= threshold]
            l_h = sum(r[2] for r in left)
            l_n = len(left) - l_h
            r_h = tot_h - l_h
            r_n = tot_n - l_n
            mass_l = cost_fp * l_n + cost_fn * l_h
            mass_r = cost_fp * r_n + cost_fn * r_h
            decrease = parent - (mass_l * gini(l_n, l_h) + mass_r * gini(r_n, r_h)) / parent_mass
            if decrease > 0.0 and (best is None or decrease > best[2]):
                best = (fi, threshold, decrease)
    return best


def f_upper_tail_by_quadrature(f_value, d1, d2):
    """Upper-tail probability of the F(d1, d2) distribution by numerical
    integration of its density (no incomplete-beta shortcut)."""
    from scipy.integrate import quad

    log_beta = math.lgamma(d1 / 2.0) + math.lgamma(d2 / 2.0) - math.lgamma((d1 + d2) / 2.0)

    def density(x):
        if x <= 0.0:
            return 0.0
        log_num = (d1 / 2.0) * math.log(d1 * x) + (d2 / 2.0) * math.log(d2) \
            - ((d1 + d2) / 2.0) * math.log(d1 * x + d2)
        return math.exp(log_num - log_beta) / x

    if f_value <= 0.0:
        return 1.0
    upper, _ = quad(density, f_value, math.inf, limit=200)
    return max(0.0, min(1.0, upper))
