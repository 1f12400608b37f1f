"""Independent reference implementations used to cross-check the library.

Everything here deliberately avoids the library's own code paths: direct
term-by-term summation at extended precision (np.longdouble, 80-bit on
x86) or compensated summation via math.fsum. Keep these naive and
readable; they are the ground truth the fast implementations are held to.
"""

import math

import numpy as np

LD = np.longdouble


def column_mean_fsum(matrix) -> np.ndarray:
    """Compensated per-column mean of a 2-d array."""
    m = np.asarray(matrix, dtype=np.float64)
    n = m.shape[0]
    return np.array([math.fsum(m[:, j]) / n for j in range(m.shape[1])])


def kl_direct(p, q, floor=1e-12) -> float:
    """Term-by-term sum p_i * ln(p_i / q_i) at extended precision, after
    flooring and renormalizing both vectors."""
    p = np.maximum(np.asarray(p, dtype=LD), LD(floor))
    q = np.maximum(np.asarray(q, dtype=LD), LD(floor))
    p = p / p.sum()
    q = q / q.sum()
    total = LD(0)
    for pi, qi in zip(p, q):
        total += pi * np.log(pi / qi)
    return float(total)


def symmetric_kl_direct(p, q, floor=1e-12) -> float:
    return 0.5 * (kl_direct(p, q, floor) + kl_direct(q, p, floor))


def one_hot_direct(p, floor=1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    out = np.full(p.shape, floor)
    out[int(np.argmax(p))] = 1.0 - (p.shape[0] - 1) * floor
    return out


def score_direct(p_a, p_c, variant: str, floor=1e-12) -> float:
    """Direct extended-precision evaluation of every score variant."""
    a = np.asarray(p_a, dtype=LD)
    c = np.asarray(p_c, dtype=LD)
    if variant == "VLAD1":
        return symmetric_kl_direct(p_a, p_c, floor)
    if variant == "VLAD2":
        return symmetric_kl_direct(one_hot_direct(p_a, floor), p_c, floor)
    if variant == "A1":
        an = a / np.sqrt((a * a).sum())
        cn = c / np.sqrt((c * c).sum())
        return float(abs(an.max() - cn.max()))
    if variant == "A2":
        return float(abs(a.max() - c.max()))
    if variant == "A3":
        an = a / np.sqrt((a * a).sum())
        cn = c / np.sqrt((c * c).sum())
        return float(np.abs(an - cn).sum())
    if variant == "A4":
        return float(np.abs(a - c).sum())
    raise ValueError(variant)


def random_simplex(rng: np.random.Generator, m: int, peaked: bool = False) -> np.ndarray:
    """Random point on the M-simplex; `peaked` concentrates mass like a
    confident classifier output."""
    alpha = 0.3 if peaked else 1.0
    v = rng.gamma(alpha, size=m)
    v = np.maximum(v, 1e-300)
    return v / v.sum()


def auc_pairwise(clean, adv) -> float:
    """Brute-force Mann-Whitney AUC: wins plus half-credit ties over all
    (clean, adversarial) score pairs, counted exactly."""
    wins = 0
    ties = 0
    for a in adv:
        for c in clean:
            if a > c:
                wins += 1
            elif a == c:
                ties += 1
    return (wins + 0.5 * ties) / (len(clean) * len(adv))
