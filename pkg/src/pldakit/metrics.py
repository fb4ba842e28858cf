"""Detection metrics over verification trial scores.

Conventions: a trial is accepted when ``score >= threshold``.  EER is read
off the piecewise-linear ROC between the two operating points straddling
``P_miss == P_fa``; minDCF sweeps all unique scores plus accept-all /
reject-all sentinels and is normalized by the best trivial system, so it
never exceeds 1.  Both metrics depend only on the ordering of the scores.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError


@dataclass(frozen=True)
class DcfParams:
    """Detection cost parameters: target prior and miss / false-alarm costs."""

    p_target: float = 0.01
    c_miss: float = 1.0
    c_fa: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.p_target < 1.0:
            raise DataError(f"p_target must be in (0, 1), got {self.p_target}")
        if self.c_miss <= 0.0 or self.c_fa <= 0.0:
            raise DataError("c_miss and c_fa must be positive")


def error_rates(scores: np.ndarray, labels: np.ndarray) -> tuple:
    """Miss/false-alarm rates at every unique score plus the two sentinels.

    Returns ``(p_miss, p_fa)`` arrays ordered by increasing threshold, from
    the accept-everything operating point ``(0, 1)`` up to the
    reject-everything point ``(1, 0)``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be 1-D arrays of equal length")
    n_target = int(labels.sum())
    n_nontarget = int(labels.size - n_target)
    if n_target == 0 or n_nontarget == 0:
        raise DataError(
            f"need both target and nontarget trials, got {n_target} targets "
            f"and {n_nontarget} nontargets"
        )
    thresholds = np.unique(scores)
    target_sorted = np.sort(scores[labels])
    nontarget_sorted = np.sort(scores[~labels])
    # accept iff score >= threshold: misses are targets strictly below it,
    # false alarms are nontargets at or above it
    p_miss = np.searchsorted(target_sorted, thresholds, side="left") / n_target
    p_fa = (n_nontarget - np.searchsorted(nontarget_sorted, thresholds, side="left")) / n_nontarget
    p_miss = np.concatenate(([0.0], p_miss, [1.0]))
    p_fa = np.concatenate(([1.0], p_fa, [0.0]))
    return p_miss, p_fa


def eer_from_rates(p_miss: np.ndarray, p_fa: np.ndarray) -> float:
    """Interpolate the crossing of a (p_miss, p_fa) sweep with the diagonal."""
    diff = p_miss - p_fa
    cross = int(np.argmax(diff >= 0.0))
    if cross == 0:
        return float(p_fa[0])
    f1, m1 = p_fa[cross - 1], p_miss[cross - 1]
    f2, m2 = p_fa[cross], p_miss[cross]
    denom = (m2 - m1) - (f2 - f1)
    if denom == 0.0:
        return float(m2)
    t = (f1 - m1) / denom
    return float(f1 + t * (f2 - f1))


def eer(scores: np.ndarray, labels: np.ndarray) -> float:
    """Equal error rate of a labeled score set, in [0, 1]."""
    p_miss, p_fa = error_rates(scores, labels)
    return eer_from_rates(p_miss, p_fa)


def min_dcf(scores: np.ndarray, labels: np.ndarray, params: DcfParams = DcfParams()) -> float:
    """Minimum normalized detection cost over all swept thresholds."""
    p_miss, p_fa = error_rates(scores, labels)
    costs = params.c_miss * params.p_target * p_miss + params.c_fa * (1.0 - params.p_target) * p_fa
    floor = min(params.c_miss * params.p_target, params.c_fa * (1.0 - params.p_target))
    return float(costs.min() / floor)
