"""Prediction-quality metrics and the beam-training rate-ratio sweep.

Scores are thresholded (strictly above 0.5, so the empty-input score of 0.5
maps to the empty set) into a predicted beam set, which is compared against
the oracle set via per-sample precision ("accuracy") and recall. The sweep
measures how much of the exhaustive-search rate survives when only the k
highest-scoring beams are trained.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codebook import Codebook
from .rate import LinkChannels, achievable_rate, best_beam, topk_trained_rate


def threshold(scores, delta: float = 0.5) -> set:
    """Predicted beam set {q : score_q > delta} (strict comparison)."""
    scores = np.asarray(scores, dtype=float)
    return {int(i) + 1 for i in np.nonzero(scores > delta)[0]}


def _precision_one(optimal: set, predicted: set) -> float:
    # Empty predictions score 1 only when the optimal set is empty too.
    if not predicted:
        return 1.0 if not optimal else 0.0
    return len(optimal & predicted) / len(predicted)


def accuracy(pairs) -> float:
    """Mean per-sample precision |optimal & predicted| / |predicted|."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("accuracy needs at least one sample")
    return float(np.mean([_precision_one(set(o), set(p)) for o, p in pairs]))


def recall(pairs) -> float:
    """Mean per-sample recall |optimal & predicted| / |optimal|.

    Samples with an empty optimal set must be excluded upstream.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("recall needs at least one sample")
    out = []
    for optimal, predicted in pairs:
        optimal, predicted = set(optimal), set(predicted)
        if not optimal:
            raise ValueError("recall is undefined for an empty optimal set")
        out.append(len(optimal & predicted) / len(optimal))
    return float(np.mean(out))


@dataclass(eq=False)
class SampleOutcome:
    scene_id: int
    camera_id: int
    optimal: tuple
    predicted: tuple
    ue_rates: tuple = ()


@dataclass(eq=False)
class EvalReport:
    accuracy: float
    recall: float
    n_test: int
    records: list[SampleOutcome] = field(default_factory=list)


def make_report(outcomes) -> EvalReport:
    """Aggregate outcomes; recall averages only samples with nonempty optimal sets."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("cannot build a report from zero samples")
    pairs = [(set(o.optimal), set(o.predicted)) for o in outcomes]
    nonempty = [(o, p) for o, p in pairs if o]
    rec = recall(nonempty) if nonempty else 0.0
    return EvalReport(accuracy(pairs), rec, len(outcomes), outcomes)


@dataclass(eq=False)
class SampleLinks:
    """One test sample together with the channels of its qualifying UEs."""

    scene_id: int
    camera_id: int
    features: np.ndarray
    links: list[LinkChannels]


def rate_ratio_curve(net, test_links, cb: Codebook, k_values) -> list[tuple[int, float]]:
    """(k, achieved rate / exhaustive rate) per sub-codebook size k.

    For each sample the network's scores pick the top-k beams; each
    qualifying UE sweeps that sub-codebook and its best rate is compared to
    its own exhaustive optimum. Per-UE ratios are averaged within a sample,
    then across samples. Samples without usable UEs contribute nothing.
    """
    k_values = sorted(set(int(k) for k in k_values))
    if not k_values:
        raise ValueError("k_values must be nonempty")
    for k in k_values:
        if not 1 <= k <= cb.size:
            raise ValueError(f"k={k} outside 1..{cb.size}")

    per_k_ratios: dict[int, list[float]] = {k: [] for k in k_values}
    for sample in test_links:
        rated = []
        for link in sample.links:
            ref = achievable_rate(link, cb.beam(best_beam(link, cb)))
            if ref > 0.0:
                rated.append((link, ref))
        if not rated:
            continue
        scores = net.forward(sample.features)
        for k in k_values:
            ratios = [topk_trained_rate(scores, k, link, cb) / ref for link, ref in rated]
            per_k_ratios[k].append(float(np.mean(ratios)))

    curve = []
    for k in k_values:
        vals = per_k_ratios[k]
        if not vals:
            raise ValueError("no sample provided a usable UE link")
        curve.append((k, float(np.mean(vals))))
    return curve


def _fmt(x) -> str:
    return repr(float(x))


def write_curve_csv(path, rows, header=("k", "rate_ratio")) -> None:
    """Generic two-column table; newline and float formatting are fixed."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) if isinstance(x, float) else str(x) for x in row) + "\n")


def write_learning_csv(path, curves) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,test_loss\n")
        for epoch, (tr, te) in enumerate(zip(curves.train_loss, curves.test_loss)):
            fh.write(f"{epoch},{_fmt(tr)},{_fmt(te)}\n")


def write_eval_csv(path, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("accuracy,recall,n_test\n")
        fh.write(f"{_fmt(report.accuracy)},{_fmt(report.recall)},{report.n_test}\n")


def write_records_csv(path, report: EvalReport) -> None:
    """Per-sample optimal vs predicted sets (space-separated index lists)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("scene_id,camera_id,optimal,predicted\n")
        for rec in report.records:
            opt = " ".join(str(q) for q in sorted(rec.optimal))
            pred = " ".join(str(q) for q in sorted(rec.predicted))
            fh.write(f"{rec.scene_id},{rec.camera_id},{opt},{pred}\n")
