"""Scoring of abstaining predictions: weighted P/R/F1 and abstention rates."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = ["ClassificationReport", "weighted_prf", "abstain_rates", "make_report"]

ABSTAIN = -1


@dataclass
class ClassificationReport:
    weighted_f1: float
    weighted_precision: float
    weighted_recall: float
    coverage: float
    abstain_seen_pct: float | None = None
    abstain_novel_pct: float | None = None
    per_class: list[dict] = field(default_factory=list)
    evaluated: int = 0
    abstained: int = 0
    flags: list[str] = field(default_factory=list)
    hierarchy: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _per_class(y_true, y_pred, classes):
    rows = []
    for c in classes:
        tp = int(np.sum((y_true == c) & (y_pred == c)))
        fp = int(np.sum((y_true != c) & (y_pred == c)))
        fn = int(np.sum((y_true == c) & (y_pred != c)))
        support = int(np.sum(y_true == c))
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        rows.append({"class": int(c), "precision": p, "recall": r, "f1": f, "support": support})
    return rows


def weighted_prf(y_true, y_pred, abstain_policy: str = "exclude") -> ClassificationReport:
    """Support-weighted precision, recall and F1 of abstaining predictions.

    ``exclude`` scores only non-abstained samples. ``count-as-wrong`` keeps
    abstained samples, which then count as misses for their true class.
    Classes are those present in ``y_true`` or predicted; weights are the
    true-class supports of the scored samples.
    """
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.int64).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have the same length")
    if abstain_policy not in ("exclude", "count-as-wrong"):
        raise ValueError(f"unknown abstain policy {abstain_policy!r}")

    answered = y_pred != ABSTAIN
    n = y_true.size
    coverage = float(answered.mean()) if n else 0.0
    flags = []
    if abstain_policy == "exclude":
        t, p = y_true[answered], y_pred[answered]
    else:
        t, p = y_true, y_pred
    if t.size == 0 or not np.any(answered):
        flags.append("no-predictions")
        return ClassificationReport(0.0, 0.0, 0.0, coverage, evaluated=n,
                                    abstained=int(n - answered.sum()), flags=flags)

    classes = np.union1d(t, p[p != ABSTAIN])
    rows = _per_class(t, p, classes)
    support = np.array([r["support"] for r in rows], dtype=float)
    weights = support / support.sum()
    avg = lambda key: float(np.dot(weights, [r[key] for r in rows]))  # noqa: E731
    return ClassificationReport(avg("f1"), avg("precision"), avg("recall"), coverage,
                                per_class=rows, evaluated=n,
                                abstained=int(n - answered.sum()), flags=flags)


def abstain_rates(y_true, y_pred, known_classes, mask=None) -> tuple[float | None, float | None]:
    """Percent of abstentions among seen-class and among novel-class samples.

    ``mask`` selects the samples to audit (normally the unknown ones); by
    default all samples are used. A rate with an empty denominator is None.
    """
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.int64).ravel()
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        y_true, y_pred = y_true[mask], y_pred[mask]
    seen = np.isin(y_true, np.asarray(list(known_classes), dtype=np.int64))
    abstained = y_pred == ABSTAIN

    def pct(sel):
        return float(100.0 * abstained[sel].mean()) if sel.any() else None

    return pct(seen), pct(~seen)


def make_report(y_true, y_pred, y_observed, abstain_policy: str = "exclude",
                hierarchy: dict | None = None) -> ClassificationReport:
    """Report over the unknown samples (``y_observed == -1``)."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    y_observed = np.asarray(y_observed, dtype=np.int64)
    unknown = y_observed == ABSTAIN
    rep = weighted_prf(y_true[unknown], y_pred[unknown], abstain_policy)
    known_classes = np.unique(y_observed[~unknown])
    rep.abstain_seen_pct, rep.abstain_novel_pct = abstain_rates(y_true, y_pred, known_classes, unknown)
    rep.hierarchy = hierarchy
    return rep
