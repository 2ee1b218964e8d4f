import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegimg.errors import ConfigError, DataError
from eegimg.features import FeatureMatrix
from eegimg.splitting import (SPLIT_NAMES, apply_split, load_assignment,
                              save_assignment, stratified_group_split)
from eegimg.trials import SyntheticSpec, generate_synthetic


def synth(n_classes=2, n_stimuli=10, n_subjects=2, seed=0):
    return generate_synthetic(SyntheticSpec(
        n_classes=n_classes, n_stimuli_per_class=n_stimuli, n_subjects=n_subjects,
        n_channels=2, n_samples=4, seed=seed))


def split_counts(a, s):
    counts = {name: {c: 0 for c in range(len(s.class_names))} for name in SPLIT_NAMES}
    stim_class = {t.stimulus_id: t.class_label for t in s.trials}
    for sid, name in a.assignment.items():
        counts[name][stim_class[sid]] += 1
    return counts


def test_single_class_ten_stimuli_7_2_1():
    s = synth(n_classes=1, n_stimuli=10, n_subjects=1)
    a = stratified_group_split(s, (0.7, 0.15, 0.15), seed=3)
    sizes = {name: len(a.subset_ids(name)) for name in SPLIT_NAMES}
    # quotas 7.0/1.5/1.5: the leftover's remainder tie resolves to validation
    assert sizes == {"train": 7, "validation": 2, "test": 1}


def test_39_classes_50_stimuli_apportionment():
    s = synth(n_classes=39, n_stimuli=50, n_subjects=1)
    a = stratified_group_split(s, (0.7, 0.15, 0.15), seed=0)
    counts = split_counts(a, s)
    for c in range(39):
        assert counts["train"][c] == 35
        assert counts["validation"][c] == 8
        assert counts["test"][c] == 7
    sizes = {name: len(a.subset_ids(name)) for name in SPLIT_NAMES}
    assert sizes == {"train": 1365, "validation": 312, "test": 273}


def test_degenerate_ratios_all_train():
    s = synth(n_classes=2, n_stimuli=5)
    a = stratified_group_split(s, (1.0, 0.0, 0.0), seed=1)
    assert len(a.subset_ids("train")) == 10
    assert not a.subset_ids("validation") and not a.subset_ids("test")


def test_invalid_ratios_error():
    s = synth()
    with pytest.raises(ConfigError):
        stratified_group_split(s, (0.5, 0.2, 0.2), seed=0)
    with pytest.raises(ConfigError):
        stratified_group_split(s, (1.2, -0.1, -0.1), seed=0)


def test_deterministic_for_seed():
    s = synth(n_classes=3, n_stimuli=7, n_subjects=2)
    a = stratified_group_split(s, seed=42)
    b = stratified_group_split(s, seed=42)
    assert a.assignment == b.assignment
    c = stratified_group_split(s, seed=43)
    assert c.assignment != a.assignment  # overwhelmingly likely to differ


@given(st.integers(1, 5), st.integers(1, 12), st.integers(1, 4), st.integers(0, 99))
@settings(max_examples=40, deadline=None)
def test_partition_and_stratification_properties(n_classes, n_stimuli, n_subjects, seed):
    s = synth(n_classes=n_classes, n_stimuli=n_stimuli, n_subjects=n_subjects,
              seed=seed)
    ratios = (0.7, 0.15, 0.15)
    a = stratified_group_split(s, ratios, seed=seed)
    all_stimuli = {t.stimulus_id for t in s.trials}
    assert set(a.assignment) == all_stimuli  # exhaustive
    counts = split_counts(a, s)
    for c in range(n_classes):
        class_total = sum(counts[name][c] for name in SPLIT_NAMES)
        assert class_total == n_stimuli
        for ratio, name in zip(ratios, SPLIT_NAMES):
            assert abs(counts[name][c] - ratio * n_stimuli) < 1.0


def test_group_integrity_subjects_share_split():
    s = synth(n_classes=2, n_stimuli=4, n_subjects=6)
    a = stratified_group_split(s, seed=5)
    train, val, test = apply_split(a, s)
    seen = {}
    for part_name, part in zip(SPLIT_NAMES, (train, val, test)):
        if part is None:
            continue
        for t in part.trials:
            seen.setdefault(t.stimulus_id, set()).add(part_name)
    assert all(len(names) == 1 for names in seen.values())
    for sid, subjects in _subjects_by_stim(s).items():
        assert len(subjects) == 6


def _subjects_by_stim(s):
    out = {}
    for t in s.trials:
        out.setdefault(t.stimulus_id, set()).add(t.subject_id)
    return out


def test_apply_split_trialset_partition():
    s = synth(n_classes=2, n_stimuli=10, n_subjects=3)
    a = stratified_group_split(s, seed=7)
    train, val, test = apply_split(a, s)
    total = sum(len(p) for p in (train, val, test) if p is not None)
    assert total == len(s)
    order = [t.stimulus_id for t in s.trials if a.assignment[t.stimulus_id] == "train"]
    assert [t.stimulus_id for t in train.trials] == order  # order preserved


def test_apply_split_feature_matrix():
    s = synth(n_classes=2, n_stimuli=6, n_subjects=2)
    a = stratified_group_split(s, seed=9)
    ids = np.array([t.stimulus_id for t in s.trials])
    labels = np.array([t.class_label for t in s.trials])
    m = FeatureMatrix(rows=np.arange(len(ids), dtype=float)[:, None],
                      sample_ids=ids, labels=labels)
    train, val, test = apply_split(a, m)
    assert train.n_samples + val.n_samples + test.n_samples == len(ids)
    for part, name in zip((train, val, test), SPLIT_NAMES):
        for sid in part.sample_ids:
            assert a.assignment[int(sid)] == name


def test_apply_split_unknown_stimulus_errors():
    s = synth(n_classes=1, n_stimuli=3, n_subjects=1)
    a = stratified_group_split(s, seed=0)
    m = FeatureMatrix(rows=np.zeros((1, 2)), sample_ids=[999], labels=[0])
    with pytest.raises(DataError):
        apply_split(a, m)


def test_assignment_round_trip(tmp_path):
    s = synth(n_classes=2, n_stimuli=5, n_subjects=2)
    a = stratified_group_split(s, (0.7, 0.15, 0.15), seed=13)
    path = tmp_path / "split.json"
    save_assignment(a, path)
    b = load_assignment(path)
    assert b.assignment == a.assignment
    assert b.ratios == a.ratios
    assert b.seed == a.seed
