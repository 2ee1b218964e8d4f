"""Stratified, stimulus-grouped train/validation/test assignment.

Splitting operates on stimulus ids so every subject's trial for a stimulus
lands in the same partition. Within each class, counts follow largest-
remainder apportionment of the requested ratios.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .features import FeatureMatrix
from .trials import TrialSet

SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True)
class SplitAssignment:
    """stimulus_id -> split name, plus the ratios and seed that produced it."""

    assignment: dict[int, str]
    ratios: tuple[float, float, float]
    seed: int

    def subset_ids(self, split: str) -> list[int]:
        return [sid for sid, name in self.assignment.items() if name == split]


def _apportion(n: int, ratios: tuple[float, float, float]) -> list[int]:
    """Largest-remainder apportionment; remainder ties go in split order."""
    quotas = [r * n for r in ratios]
    counts = [int(np.floor(q)) for q in quotas]
    leftover = n - sum(counts)
    remainders = [q - c for q, c in zip(quotas, counts)]
    # sort by descending remainder; equal remainders keep split order
    order = sorted(range(3), key=lambda i: (-remainders[i], i))
    for i in range(leftover):
        counts[order[i % 3]] += 1
    return counts


def stratified_group_split(s: TrialSet, ratios: tuple[float, float, float] = (0.7, 0.15, 0.15),
                           seed: int = 0) -> SplitAssignment:
    """Assign each stimulus id to train/validation/test, stratified by class.

    Within each class the stimulus list is shuffled with a seeded generator
    and filled into the apportioned quotas, so the assignment is
    deterministic for a fixed (TrialSet, ratios, seed).
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"need three nonnegative ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)}")
    by_class: dict[int, set[int]] = {}
    stim_class: dict[int, int] = {}
    for t in s.trials:
        prev = stim_class.get(t.stimulus_id)
        if prev is not None and prev != t.class_label:
            raise DataError(
                f"stimulus {t.stimulus_id} appears with labels {prev} and {t.class_label}"
            )
        stim_class[t.stimulus_id] = t.class_label
        by_class.setdefault(t.class_label, set()).add(t.stimulus_id)
    for label in range(len(s.class_names)):
        if label not in by_class:
            raise DataError(f"class {label} has no stimuli")
    rng = np.random.default_rng(seed)
    assignment: dict[int, str] = {}
    for label in sorted(by_class):
        stimuli = np.array(sorted(by_class[label]), dtype=np.int64)
        rng.shuffle(stimuli)
        counts = _apportion(len(stimuli), ratios)
        pos = 0
        for split_name, count in zip(SPLIT_NAMES, counts):
            for sid in stimuli[pos:pos + count]:
                assignment[int(sid)] = split_name
            pos += count
    return SplitAssignment(assignment=assignment, ratios=ratios, seed=seed)


def apply_split(a: SplitAssignment, data: TrialSet | FeatureMatrix):
    """Partition a TrialSet or FeatureMatrix into (train, validation, test).

    Subsets are disjoint, their union is the input, and relative order is
    preserved. FeatureMatrix rows are matched through their sample_ids.
    An empty TrialSet partition comes back as None (a TrialSet cannot be
    empty); FeatureMatrix partitions may be empty matrices.
    """
    if isinstance(data, TrialSet):
        buckets: dict[str, list] = {name: [] for name in SPLIT_NAMES}
        for t in data.trials:
            split = a.assignment.get(t.stimulus_id)
            if split is None:
                raise DataError(f"stimulus {t.stimulus_id} has no split assignment")
            buckets[split].append(t)
        out = []
        for name in SPLIT_NAMES:
            if not buckets[name]:
                out.append(None)
            else:
                out.append(TrialSet(trials=tuple(buckets[name]), band_tag=data.band_tag,
                                    class_names=data.class_names,
                                    n_subjects=data.n_subjects))
        return tuple(out)
    if isinstance(data, FeatureMatrix):
        index: dict[str, list[int]] = {name: [] for name in SPLIT_NAMES}
        for i, sid in enumerate(data.sample_ids):
            split = a.assignment.get(int(sid))
            if split is None:
                raise DataError(f"sample id {int(sid)} has no split assignment")
            index[split].append(i)
        return tuple(
            data.subset(np.array(index[name], dtype=np.intp))
            for name in SPLIT_NAMES
        )
    raise DataError(f"cannot split object of type {type(data).__name__}")


def save_assignment(a: SplitAssignment, path) -> None:
    doc = {
        "ratios": list(a.ratios),
        "seed": a.seed,
        "assignment": {str(sid): name for sid, name in a.assignment.items()},
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)


def load_assignment(path) -> SplitAssignment:
    with open(path) as f:
        doc = json.load(f)
    return SplitAssignment(
        assignment={int(sid): name for sid, name in doc["assignment"].items()},
        ratios=tuple(doc["ratios"]),
        seed=doc["seed"],
    )
