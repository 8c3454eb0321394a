"""Evaluation metrics, run summaries, and the two-sample t-test.

AUROC follows the Mann-Whitney convention: it equals the fraction of
positive-negative pairs where the positive outscores the negative, with
tied pairs credited 0.5.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .errors import MetricUndefinedError, ParameterError

ALPHA = 0.05


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class ClassificationReport:
    auroc: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    threshold: float
    confusion: ConfusionMatrix

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "threshold": self.threshold,
            "confusion": self.confusion.to_dict(),
        }


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p_value: float
    degenerate: bool = False

    @property
    def significant(self) -> bool:
        return self.p_value < ALPHA

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "df": self.df,
            "p_value": self.p_value,
            "significant": self.significant,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class RunSummary:
    values: tuple[float, ...]
    mean: float
    sd: float
    n_runs: int
    total_seconds: float
    mean_seconds: float
    single_run: bool = False
    timings: tuple[float, ...] = field(default=(), repr=False)

    def format(self, digits: int = 3) -> str:
        return f"{self.mean:.{digits}f} ± {self.sd:.{digits}f}"

    def to_dict(self) -> dict:
        return {
            "values": list(self.values),
            "mean": self.mean,
            "sd": self.sd,
            "n_runs": self.n_runs,
            "total_seconds": self.total_seconds,
            "mean_seconds": self.mean_seconds,
            "single_run": self.single_run,
        }


def _tied_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the group-average rank."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], len(x)]
    avg = (starts + ends + 1) / 2.0  # mean of 1-based ranks start+1 .. end
    ranks = np.empty(len(x), dtype=float)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auroc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum formulation.

    Equals (concordant pairs + 0.5 * tied pairs) / (n_pos * n_neg).
    Raises MetricUndefinedError when only one class is present.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape:
        raise ParameterError("scores and labels must have the same length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("AUROC undefined: both classes must be present")
    ranks = _tied_ranks(scores)
    pos_rank_sum = float(np.sum(ranks[labels == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def classification_report(scores, labels, threshold: float = 0.5) -> ClassificationReport:
    """All common metrics at a fixed threshold, plus AUROC.

    Prediction rule: score >= threshold. Zero-denominator conventions:
    precision=0 with no positive predictions, recall=0 with no positives,
    f1=0 when precision+recall=0.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    preds = scores >= threshold
    actual = labels == 1
    tp = int(np.sum(preds & actual))
    fp = int(np.sum(preds & ~actual))
    fn = int(np.sum(~preds & actual))
    tn = int(np.sum(~preds & ~actual))
    n = len(labels)
    accuracy = (tp + tn) / n if n else 0.0
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return ClassificationReport(
        auroc=auroc(scores, labels),
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        threshold=threshold,
        confusion=ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn),
    )


def _t_sf_two_sided(t: float, df: float) -> float:
    # P(|T| > |t|) for Student's t: the regularized incomplete beta
    # I_{df/(df+t^2)}(df/2, 1/2).
    if t == 0.0:
        return 1.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def t_test(sample_a, sample_b, welch: bool = False) -> TTestResult:
    """Two-sample Student's t-test, two-sided.

    Default is the pooled-variance form with df = n_a + n_b - 2; pass
    welch=True for the unequal-variance variant. Degenerate inputs
    (zero variance on both sides) yield t=0, p=1 for equal means and
    p=0 flagged degenerate otherwise.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    n_a, n_b = len(a), len(b)
    if n_a < 2 or n_b < 2:
        raise ParameterError("each sample must contain at least 2 values")
    mean_a, mean_b = float(np.mean(a)), float(np.mean(b))
    var_a = float(np.var(a, ddof=1))
    var_b = float(np.var(b, ddof=1))
    if welch:
        se2 = var_a / n_a + var_b / n_b
        if se2 == 0.0:
            if mean_a == mean_b:
                return TTestResult(t=0.0, df=float(n_a + n_b - 2), p_value=1.0)
            return TTestResult(
                t=math.copysign(math.inf, mean_a - mean_b),
                df=float(n_a + n_b - 2), p_value=0.0, degenerate=True)
        df = se2 ** 2 / (
            (var_a / n_a) ** 2 / (n_a - 1) + (var_b / n_b) ** 2 / (n_b - 1))
        t = (mean_a - mean_b) / math.sqrt(se2)
    else:
        df = float(n_a + n_b - 2)
        pooled = ((n_a - 1) * var_a + (n_b - 1) * var_b) / df
        if pooled == 0.0:
            if mean_a == mean_b:
                return TTestResult(t=0.0, df=df, p_value=1.0)
            return TTestResult(
                t=math.copysign(math.inf, mean_a - mean_b),
                df=df, p_value=0.0, degenerate=True)
        t = (mean_a - mean_b) / math.sqrt(pooled * (1.0 / n_a + 1.0 / n_b))
    return TTestResult(t=float(t), df=float(df), p_value=_t_sf_two_sided(t, df))


def summarize_runs(values, timings=None) -> RunSummary:
    """Mean and sample SD (n-1 denominator) plus wall-clock aggregates.

    A single run reports SD 0 with the single_run flag set.
    """
    vals = [float(v) for v in values]
    if not vals:
        raise ParameterError("summarize_runs requires at least one value")
    times = [float(t) for t in (timings if timings is not None else [])]
    n = len(vals)
    mean = sum(vals) / n
    if n == 1:
        sd, single = 0.0, True
    else:
        sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / (n - 1))
        single = False
    total_s = sum(times)
    mean_s = total_s / len(times) if times else 0.0
    return RunSummary(
        values=tuple(vals), mean=mean, sd=sd, n_runs=n,
        total_seconds=total_s, mean_seconds=mean_s,
        single_run=single, timings=tuple(times))
