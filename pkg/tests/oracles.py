"""Independent reference implementations used to check the main code.

Everything here is written as direct enumeration over the generative
model, sharing no code with the package: per-item posteriors enumerate
candidate truths explicitly, pair posteriors multiply the stated event
probabilities term by term.
"""

from __future__ import annotations

import math
from fractions import Fraction


def enum_item_posterior(claims: list[tuple[str, float]], accuracies: dict[str, float],
                        n: int, weights: dict[str, float] | None = None,
                        probs: dict[str, float] | None = None) -> dict[str, float]:
    """Posterior over candidate truths by explicit enumeration.

    claims: list of (source, value-index as str) pairs... actually claims
    are (source, value). For each candidate truth v (uniform prior over
    the observed values), P(claims | truth=v) is the product over sources
    of A_S if the claim matches v else (1-A_S)/n, with optional exponent
    weights.
    """
    values = sorted({v for _, v in claims})
    likes = {}
    for candidate in values:
        like = 1.0
        for (src, val) in claims:
            a = accuracies[src]
            w = (weights or {}).get(src, 1.0) * (probs or {}).get(src, 1.0)
            term = a if val == candidate else (1.0 - a) / n
            like *= term ** w
        likes[candidate] = like
    z = sum(likes.values())
    return {v: l / z for v, l in likes.items()}


def pair_likelihoods(kt: int, kf: int, kd: int, a1: float, a2: float,
                     n: float, c: float) -> tuple[float, float]:
    """(L_independent, L_dependent) as plain products of event probabilities."""
    p_same_true_ind = a1 * a2
    p_same_false_ind = (1 - a1) * (1 - a2) / n
    p_differ_ind = 1 - p_same_true_ind - p_same_false_ind
    amax = max(a1, a2)
    p_same_true_dep = c * amax + (1 - c) * p_same_true_ind
    p_same_false_dep = c * (1 - amax) + (1 - c) * p_same_false_ind
    p_differ_dep = (1 - c) * p_differ_ind
    l_ind = (p_same_true_ind ** kt) * (p_same_false_ind ** kf) * (p_differ_ind ** kd)
    l_dep = (p_same_true_dep ** kt) * (p_same_false_dep ** kf) * (p_differ_dep ** kd)
    return l_ind, l_dep


def pair_posterior(kt: int, kf: int, kd: int, a1: float, a2: float, n: float,
                   c: float, alpha: float) -> float:
    l_ind, l_dep = pair_likelihoods(kt, kf, kd, a1, a2, n, c)
    return alpha * l_dep / (alpha * l_dep + (1 - alpha) * l_ind)


def exact_agreement_expectation(m1: dict[str, Fraction], m2: dict[str, Fraction]
                                ) -> Fraction:
    dom = set(m1) | set(m2)
    return sum((m1.get(v, Fraction(0)) * m2.get(v, Fraction(0)) for v in dom),
               Fraction(0))


def greedy_rank(profiles: dict[str, tuple[float, float]],
                posteriors: dict[tuple[str, str], float], k: int) -> list[str]:
    """Reference greedy: literal evaluation of the ranking objective."""
    chosen: list[str] = []
    rest = sorted(profiles)
    while rest and len(chosen) < k:
        scored = []
        for s in rest:
            acc, cov = profiles[s]
            val = acc * cov
            for p in chosen:
                key = (min(s, p), max(s, p))
                val *= 1 - posteriors.get(key, 0.0)
            scored.append((-val, s))
        scored.sort()
        pick = scored[0][1]
        chosen.append(pick)
        rest.remove(pick)
    return chosen
