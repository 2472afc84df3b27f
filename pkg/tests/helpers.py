"""Shared test helpers."""

import numpy as np


def intervals_overlap(m1, s1, m2, s2, nsigma=3.0):
    """True iff [m1 +- nsigma*s1] and [m2 +- nsigma*s2] intersect."""
    return abs(m1 - m2) <= nsigma * (s1 + s2)


def mean_and_se(x):
    x = np.asarray(x, dtype=float)
    n = len(x)
    se = x.std(ddof=1) / np.sqrt(n) if n > 1 else float("inf")
    return float(x.mean()), float(se)


# critical values solved independently at 30-digit precision (mpmath:
# golden-section/ternary inner infimum plus bisection/newton on the outer
# root), frozen here as the solver oracle
LAMBDA_C_HIGHPREC = {
    2: 0.2933671276754,
    3: 0.26101865132982,
    4: 0.25331756699956,
    5: 0.25106035716874,
    6: 0.25034725463435,
    7: 0.25011489746699,
}
LAMBDA_S_HIGHPREC = {
    2: 1.6180339887499,
    3: 2.2405875006674,
    4: 2.8650466485528,
    5: 3.4904878664773,
    6: 4.1165015025567,
    7: 4.7428779663898,
}

# printed table values (4-5 digits) that the solvers are compared against
PAPER_LAMBDA_C = {2: 0.29335, 3: 0.26103, 4: 0.25333, 5: 0.25107,
                  6: 0.2504, 7: 0.2501}
PAPER_LAMBDA_S = {2: 1.6180, 3: 2.2406, 4: 2.8650, 5: 3.4904,
                  6: 4.1165, 7: 4.7429}

# dense-grid oracle values for the threshold function (independent 30-digit
# computation, same method as above)
F_2_OF_0_2 = 0.73120446032811     # f_2(0.2); geometric bound f/(1-f) ~ 2.7203
F_2_OF_1 = 1.9092217048737        # f_2(1.0), attained near u = 0.18614
