"""Trial observables and the paired nonparametric analysis.

A trial records collision episodes, human interventions, per-step timings and
total time for one run under condition C1 (anticipated medium active) or C2
(real motion only). Reports summarize per-condition box-plot statistics and
compare conditions with the one-tailed Wilcoxon signed-rank test.

Wilcoxon conventions (standard ones; documented, not prescribed by any
source): zero differences are dropped, tied absolute differences share
average ranks, W is reported as min(W+, W-) for the two-sided test and as
the alternative-appropriate one-sided rank sum otherwise. Exact p-values are
computed by full enumeration of sign assignments up to n=20, then by normal
approximation with tie correction and continuity correction.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

EXACT_ENUMERATION_LIMIT = 20

OBSERVABLES = ("collisions", "interventions", "total_time")

TEST_ALTERNATIVES = {"collisions": "less", "interventions": "greater", "total_time": "less"}


class TrialClosed(RuntimeError):
    pass


class AllZeroDifferences(ValueError):
    pass


class OutOfTableRange(ValueError):
    pass


@dataclass
class TrialRecord:
    condition: str  # "C1" (anticipated medium active) or "C2" (real only)
    seed: int
    collisions: list = field(default_factory=list)  # (t, link, object_id)
    interventions: list = field(default_factory=list)  # (t, object_id)
    step_durations: list = field(default_factory=list)
    total_time: float = 0.0

    def observable(self, name: str) -> float:
        if name == "collisions":
            return float(len(self.collisions))
        if name == "interventions":
            return float(len(self.interventions))
        if name == "total_time":
            return float(self.total_time)
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "seed": self.seed,
            "collisions": [[t, link, oid] for t, link, oid in self.collisions],
            "interventions": [[t, oid] for t, oid in self.interventions],
            "step_durations": self.step_durations,
            "total_time": self.total_time,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrialRecord":
        return TrialRecord(
            condition=d["condition"],
            seed=d["seed"],
            collisions=[(c[0], c[1], c[2]) for c in d["collisions"]],
            interventions=[(i[0], i[1]) for i in d["interventions"]],
            step_durations=list(d["step_durations"]),
            total_time=d["total_time"],
        )


class Trial:
    """Mutable accumulator for one run; finalize() freezes it."""

    def __init__(self, condition: str, seed: int):
        if condition not in ("C1", "C2"):
            raise ValueError(f"condition must be C1 or C2, got {condition!r}")
        self._record = TrialRecord(condition=condition, seed=seed)
        self._open = True

    def record(self, event) -> None:
        """Append a scheduler event (collision_event or intervention)."""
        if not self._open:
            raise TrialClosed("trial already finalized")
        if event.type == "collision_event":
            contacts = event.payload.get("contacts") or [[None, None]]
            link, oid = contacts[0]
            self._record.collisions.append((event.t, link, oid))
        elif event.type == "intervention":
            self._record.interventions.append((event.t, event.payload["object_id"]))

    def finalize(self, step_durations: list[float], total_time: float) -> TrialRecord:
        if not self._open:
            raise TrialClosed("trial already finalized")
        self._open = False
        self._record.step_durations = [float(v) for v in step_durations]
        self._record.total_time = float(total_time)
        return self._record


@dataclass
class PairedSample:
    pairs: list[tuple[float, float]]  # (c1_value, c2_value) per subject

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("need at least one pair")


def _signed_ranks(sample: PairedSample) -> tuple[np.ndarray, np.ndarray]:
    d = np.array([c1 - c2 for c1, c2 in sample.pairs], dtype=float)
    d = d[d != 0.0]
    if len(d) == 0:
        raise AllZeroDifferences("every paired difference is zero")
    return d, rankdata(np.abs(d))


def _null_sums(ranks: np.ndarray) -> np.ndarray:
    """All 2^n signed-rank sums: full enumeration by iterative doubling."""
    sums = np.zeros(1)
    for r in ranks:
        sums = np.concatenate([sums, sums + r])
    return sums


def _tie_corrected_sigma(ranks: np.ndarray) -> float:
    n = len(ranks)
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(counts ** 3 - counts)) / 48.0
    return math.sqrt(var)


def wilcoxon_signed_rank(sample: PairedSample, alternative: str = "two_sided") -> tuple[float, float, int]:
    """(W, p, n_effective) for the paired signed-rank test.

    alternative 'greater' tests median(c1 - c2) > 0 (statistic W-),
    'less' tests < 0 (statistic W+), 'two_sided' uses min(W+, W-).
    """
    if alternative not in ("less", "greater", "two_sided"):
        raise ValueError(f"unknown alternative {alternative!r}")
    d, ranks = _signed_ranks(sample)
    n = len(d)
    w_plus = float(np.sum(ranks[d > 0]))
    w_minus = float(np.sum(ranks[d < 0]))
    if alternative == "greater":
        stat = w_minus
    elif alternative == "less":
        stat = w_plus
    else:
        stat = min(w_plus, w_minus)
    if n <= EXACT_ENUMERATION_LIMIT:
        sums = _null_sums(ranks)
        p_le = float(np.count_nonzero(sums <= stat)) / len(sums)
    else:
        mean = n * (n + 1) / 4.0
        sigma = _tie_corrected_sigma(ranks)
        z = (stat + 0.5 - mean) / sigma
        p_le = 0.5 * math.erfc(-z / math.sqrt(2.0))
    p = min(1.0, 2.0 * p_le) if alternative == "two_sided" else p_le
    return stat, p, n


def critical_value(n: int, alpha: float, tails: str = "one") -> int:
    """Largest w with P(W <= w) <= alpha under the exact null distribution.

    Computed from the signed-rank null (ranks 1..n, no ties) rather than a
    hard-coded table. Two-tailed lookups use alpha/2 per side.
    """
    if not 5 <= n <= 30:
        raise OutOfTableRange(f"n must be in [5, 30], got {n}")
    if alpha not in (0.01, 0.025, 0.05):
        raise OutOfTableRange(f"alpha must be one of 0.01, 0.025, 0.05, got {alpha}")
    if tails not in ("one", "two"):
        raise ValueError(f"tails must be 'one' or 'two', got {tails!r}")
    threshold = alpha if tails == "one" else alpha / 2.0
    # exact null counts of W = sum of a random subset of {1..n}
    max_w = n * (n + 1) // 2
    counts = np.zeros(max_w + 1, dtype=object)
    counts[0] = 1
    for r in range(1, n + 1):
        counts[r:] = counts[r:] + counts[:-r].copy()
    total = 2 ** n
    cum = 0
    best = None
    for w in range(max_w + 1):
        cum += int(counts[w])
        if cum / total <= threshold:
            best = w
        else:
            break
    if best is None:
        raise OutOfTableRange(f"no critical value exists for n={n}, alpha={alpha}, {tails}-tailed")
    return best


def _box_stats(values: list[float]) -> dict:
    arr = np.array(values, dtype=float)
    q1, med, q3 = (float(v) for v in np.percentile(arr, [25, 50, 75]))
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = [float(v) for v in arr[(arr < lo) | (arr > hi)]]
    return {
        "n": len(values),
        "median": med,
        "q1": q1,
        "q3": q3,
        "min": float(arr.min()),
        "max": float(arr.max()),
        "outliers": outliers,
    }


def report(trials: list[TrialRecord]) -> dict:
    """Per-condition box-plot summaries plus paired tests (pure function).

    Trials are paired across conditions by seed; observables with no nonzero
    paired difference are reported as {"no_difference": true}.
    """
    if not trials:
        raise ValueError("need at least one trial")
    doc: dict = {"n_trials": len(trials), "conditions": {}, "tests": {}}
    for condition in ("C1", "C2"):
        subset = [t for t in trials if t.condition == condition]
        if not subset:
            continue
        doc["conditions"][condition] = {
            name: _box_stats([t.observable(name) for t in subset]) for name in OBSERVABLES
        }
    by_seed: dict[int, dict[str, TrialRecord]] = {}
    for t in trials:
        by_seed.setdefault(t.seed, {})[t.condition] = t
    paired = [
        (conds["C1"], conds["C2"])
        for seed, conds in sorted(by_seed.items())
        if "C1" in conds and "C2" in conds
    ]
    for name in OBSERVABLES:
        if not paired:
            doc["tests"][name] = {"no_pairs": True}
            continue
        sample = PairedSample([(a.observable(name), b.observable(name)) for a, b in paired])
        alternative = TEST_ALTERNATIVES[name]
        try:
            w, p, n_eff = wilcoxon_signed_rank(sample, alternative)
        except AllZeroDifferences:
            doc["tests"][name] = {"no_difference": True, "n_pairs": len(paired)}
            continue
        doc["tests"][name] = {
            "W": w,
            "p": p,
            "n_effective": n_eff,
            "n_pairs": len(paired),
            "alternative": alternative,
        }
    return doc


def write_report(doc: dict, json_path: str | Path, csv_path: str | Path) -> None:
    Path(json_path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["observable", "condition", "n", "median", "q1", "q3", "min", "max", "outliers"])
        for condition, stats in doc["conditions"].items():
            for name in OBSERVABLES:
                s = stats[name]
                writer.writerow(
                    [
                        name,
                        condition,
                        s["n"],
                        s["median"],
                        s["q1"],
                        s["q3"],
                        s["min"],
                        s["max"],
                        ";".join(str(v) for v in s["outliers"]),
                    ]
                )


def load_trials(paths: list[str | Path]) -> list[TrialRecord]:
    """Read trial records from files of newline-delimited JSON."""
    trials = []
    for path in paths:
        text = Path(path).read_text(encoding="utf-8")
        for line in text.splitlines():
            line = line.strip()
            if line:
                trials.append(TrialRecord.from_dict(json.loads(line)))
    return trials
