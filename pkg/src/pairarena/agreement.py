"""Human-model agreement statistics over three-way preference labels.

Annotators rate on a five-point scale relative to side A; the scale is merged
onto the canonical three-way preference, aggregated by majority vote, and
compared against judge labels via Pearson correlation and Cohen's kappa.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

from scipy import stats as scipy_stats


class CanonicalLabel(enum.Enum):
    """Three-way preference with the project-wide ordinal encoding +1/0/-1."""

    A_PREFERRED = 1
    TIE = 0
    B_PREFERRED = -1

    @property
    def ordinal(self) -> int:
        return self.value

    def flipped(self) -> "CanonicalLabel":
        """The same preference seen from the other side of the pair."""
        return CanonicalLabel(-self.value)


class FivePointLabel(enum.Enum):
    """Annotator rating scale, expressed with respect to side A."""

    BETTER = "better"
    SLIGHTLY_BETTER = "slightly_better"
    TIE = "tie"
    SLIGHTLY_WORSE = "slightly_worse"
    WORSE = "worse"


class AgreementError(ValueError):
    """Raised when an agreement statistic is undefined for its input."""


_MERGE = {
    FivePointLabel.BETTER: CanonicalLabel.A_PREFERRED,
    FivePointLabel.SLIGHTLY_BETTER: CanonicalLabel.A_PREFERRED,
    FivePointLabel.TIE: CanonicalLabel.TIE,
    FivePointLabel.SLIGHTLY_WORSE: CanonicalLabel.B_PREFERRED,
    FivePointLabel.WORSE: CanonicalLabel.B_PREFERRED,
}


def merge_five_point(label: FivePointLabel) -> CanonicalLabel:
    """Collapse the five-point scale onto the three-way preference."""
    return _MERGE[label]


def majority_vote(labels: Sequence[CanonicalLabel]) -> CanonicalLabel:
    """Strict-majority label; defaults to TIE when no label exceeds half."""
    if not labels:
        raise AgreementError("majority_vote needs at least one label")
    ((top, count),) = Counter(labels).most_common(1)
    if count * 2 > len(labels):
        return top
    return CanonicalLabel.TIE


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Sample Pearson r plus a two-tailed p-value from the t distribution.

    The p-value uses t = r * sqrt((n - 2) / (1 - r^2)) with n - 2 degrees of
    freedom. Inputs are ordinal encodings; any positive affine re-encoding
    yields the same r.
    """
    if len(x) != len(y):
        raise AgreementError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise AgreementError("pearson needs at least 3 paired observations")
    mean_x = sum(x) / n
    mean_y = sum(y) / n
    dx = [v - mean_x for v in x]
    dy = [v - mean_y for v in y]
    sxx = sum(v * v for v in dx)
    syy = sum(v * v for v in dy)
    if sxx == 0.0 or syy == 0.0:
        raise AgreementError("correlation undefined for constant input")
    r = sum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p_value = 2.0 * float(scipy_stats.t.sf(abs(t), df=n - 2))
    return r, p_value


def cohens_kappa(a: Sequence[CanonicalLabel], b: Sequence[CanonicalLabel]) -> float:
    """Unweighted Cohen's kappa over the three preference categories."""
    if len(a) != len(b):
        raise AgreementError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    if n == 0:
        raise AgreementError("kappa needs at least one label pair")
    p_observed = sum(1 for u, v in zip(a, b) if u == v) / n
    count_a = Counter(a)
    count_b = Counter(b)
    p_expected = sum(
        (count_a[label] / n) * (count_b[label] / n) for label in CanonicalLabel
    )
    if p_expected == 1.0:
        raise AgreementError("kappa degenerate: both raters constant and identical")
    return (p_observed - p_expected) / (1.0 - p_expected)


def label_distribution(labels: Sequence[CanonicalLabel]) -> dict[str, float]:
    """Percentage of each label, keyed by label name."""
    n = len(labels)
    counts = Counter(labels)
    return {label.name: 100.0 * counts[label] / n if n else 0.0 for label in CanonicalLabel}


@dataclass(frozen=True)
class AgreementReport:
    """Agreement between one human label set and one model label set."""

    n_items: int
    pearson_r: float
    p_value: float
    kappa: float
    human_distribution: dict[str, float]
    model_distribution: dict[str, float]
    # Correlation statistics are computed on majority-voted human labels,
    # not per-annotator ones.
    label_basis: str = "majority"

    def to_record(self) -> dict:
        return asdict(self)


def compare_label_sets(
    human: Sequence[CanonicalLabel], model: Sequence[CanonicalLabel]
) -> AgreementReport:
    """Full agreement report over aligned human/model label sequences."""
    r, p_value = pearson([h.ordinal for h in human], [m.ordinal for m in model])
    kappa = cohens_kappa(human, model)
    return AgreementReport(
        n_items=len(human),
        pearson_r=r,
        p_value=p_value,
        kappa=kappa,
        human_distribution=label_distribution(human),
        model_distribution=label_distribution(model),
    )
