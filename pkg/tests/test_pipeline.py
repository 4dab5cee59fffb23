import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subalign import knn, pipeline
from subalign.data_model import DataError, FeatureMatrix, array_to_labels
from subalign.metrics import ScoredPredictions, accuracy
from subalign.pipeline import ConfigError, FitResult, Modality, ModelConfig
from subalign.subspace import standardize
from subalign.synth import ShiftSpec, generate, synth_schema

SMALL = ShiftSpec(n_source=60, n_target=50, M=16, D_latent=3, n_rotated_axes=1, n_invariant_columns=2)


def _fm(X, y=None, prefix="r", tag="source"):
    cols = tuple(f"f{j}__mean" for j in range(X.shape[1]))
    labels = array_to_labels(y) if y is not None else None
    return FeatureMatrix(tuple(f"{prefix}{i}" for i in range(len(X))), cols, X, labels, tag)


def _acc(r: FitResult, y):
    return accuracy(ScoredPredictions(r.video_ids, y, r.labels, r.proba))


def test_stratified_folds():
    y = np.array([0] * 10 + [1] * 7)
    f = pipeline.stratified_folds(y, 3, seed=5)
    for cls, n in ((0, 10), (1, 7)):
        counts = np.bincount(f[y == cls], minlength=3)
        assert counts.max() - counts.min() <= 1 and counts.sum() == n
    assert np.array_equal(f, pipeline.stratified_folds(y, 3, seed=5))
    with pytest.raises(DataError):
        pipeline.stratified_folds(np.array([0, 0, 0, 1, 1]), 3, 0)


def test_singleton_grid_returns_that_point():
    s, _ = generate(SMALL)
    k, D, cv = pipeline.select_hyperparams(s, ModelConfig(k_range=(3, 3), D_range=(6, 6)))
    assert (k, D) == (3, 6)
    assert 0 <= cv <= 1


def test_separable_source_scores_perfectly():
    rng = np.random.default_rng(0)
    y = np.arange(40) % 2
    X = rng.normal(scale=0.05, size=(40, 5))
    X[:, :3] += 10 * y[:, None]
    k, D, cv = pipeline.select_hyperparams(_fm(X, y), ModelConfig())
    assert cv == 1.0
    # PC1 is the class axis, so (1, 1) is already perfect and wins the tie rule
    assert (k, D) == (1, 1)


def test_random_labels_score_near_chance():
    # singleton grid: the max over a full grid is biased upward
    cfg = ModelConfig(k_range=(5, 5), D_range=(3, 3))
    scores = []
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        y = rng.permutation(np.arange(30) % 2)
        scores.append(pipeline.select_hyperparams(_fm(rng.normal(size=(30, 8)), y), cfg)[2])
    # 50 x 30 held-out predictions: sd of the mean is about 0.013
    assert abs(np.mean(scores) - 0.5) < 0.05


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 30), st.integers(0, 29), st.integers(1, 10), st.integers(0, 9), st.integers(0, 99))
def test_chosen_hyperparameters_stay_in_range(k_lo, k_span, d_lo, d_span, seed):
    cfg = ModelConfig(k_range=(k_lo, min(30, k_lo + k_span)), D_range=(d_lo, min(10, d_lo + d_span)), seed=seed)
    s, t = generate(ShiftSpec(n_source=60, n_target=40, M=12, D_latent=3, seed=seed))
    r = pipeline.run_sa_experiment(s, t, cfg)
    assert cfg.k_range[0] <= r.chosen_k <= cfg.k_range[1]
    assert cfg.D_range[0] <= r.chosen_D <= cfg.D_range[1]
    assert np.all((r.proba >= 0) & (r.proba <= 1))


def test_grid_is_clipped_to_feasible_values():
    rng = np.random.default_rng(2)
    y = np.arange(9) % 2
    y[-1] = 0
    # 9 rows: training parts hold 6 rows, so k <= 6; the 4 columns cap D
    src = _fm(rng.normal(size=(9, 4)), y)
    k, D, _ = pipeline.select_hyperparams(src, ModelConfig())
    assert k <= 6 and D <= 4
    with pytest.raises(DataError):
        pipeline.select_hyperparams(src, ModelConfig(k_range=(7, 30)))


def test_self_alignment_equals_unaligned_pca_baseline():
    s, _ = generate(SMALL)
    cfg = ModelConfig(baseline_variant="pca_no_align")
    sa = pipeline.run_sa_experiment(s, s, cfg)
    bl = pipeline.run_baseline(s, s, cfg, sa.chosen_k, sa.chosen_D)
    assert np.array_equal(sa.proba, bl.proba)


def test_standardized_baseline_on_source_is_plain_knn():
    s, _ = generate(SMALL)
    r = pipeline.run_baseline(s, s, ModelConfig(), matched_k=4)
    Z = standardize(s.X)
    assert np.array_equal(r.proba, knn.predict_proba_many(knn.fit(Z, s.y, 4), Z))
    for k in (0, s.n_rows + 1):
        with pytest.raises(DataError):
            pipeline.run_baseline(s, s, ModelConfig(), matched_k=k)


def test_target_labels_are_never_used():
    s, t = generate(SMALL)
    flipped = FeatureMatrix(t.video_ids, t.column_names, t.X, array_to_labels(1 - t.y), "target")
    a = pipeline.run_sa_experiment(s, t, ModelConfig())
    b = pipeline.run_sa_experiment(s, flipped, ModelConfig())
    c = pipeline.run_sa_experiment(s, t.without_labels(), ModelConfig())
    for r in (b, c):
        assert np.array_equal(a.proba, r.proba) and (a.chosen_k, a.chosen_D) == (r.chosen_k, r.chosen_D)


def test_determinism():
    s, t = generate(SMALL)
    a = pipeline.run_sa_experiment(s, t, ModelConfig(seed=3))
    b = pipeline.run_sa_experiment(s, t, ModelConfig(seed=3))
    assert np.array_equal(a.proba, b.proba) and a.cv_score == b.cv_score


def test_sa_recovers_rotated_domain():
    s, t = generate(ShiftSpec(seed=7))
    sa = pipeline.run_sa_experiment(s, t, ModelConfig())
    bl = pipeline.run_baseline(s, t, ModelConfig(), sa.chosen_k)
    assert _acc(sa, t.y) > _acc(bl, t.y)


def test_sa_errors():
    s, t = generate(SMALL)
    with pytest.raises(DataError):
        pipeline.run_sa_experiment(s, t.take_columns(range(5)), ModelConfig())
    tiny = _fm(np.arange(4.0).reshape(2, 2), [0, 1])
    with pytest.raises(DataError):
        pipeline.run_sa_experiment(tiny, tiny, ModelConfig())


def test_chance_baseline():
    y = np.array([1] * 55 + [0] * 53)
    t = _fm(np.zeros((108, 1)), y, tag="target")
    r = pipeline.run_chance_baseline(t)
    assert np.all(r.proba == 1.0)
    assert _acc(r, y) == 55 / 108
    assert _acc(pipeline.run_chance_baseline(10), np.zeros(10, dtype=int)) == 0.0
    assert _acc(pipeline.run_chance_baseline(10), np.ones(10, dtype=int)) == 1.0
    with pytest.raises(DataError):
        pipeline.run_chance_baseline(0)


def test_fusion_rules():
    ids = ("a", "b")
    fused = pipeline.fuse((FitResult(ids, np.array([1.0, 0.8])), FitResult(ids, np.array([1.0, 0.2]))))
    assert fused.proba.tolist() == [1.0, 0.5]
    assert fused.labels.tolist() == [1, 1]


def test_late_fusion_with_identical_branches_equals_single_branch():
    s, t = generate(SMALL)
    single = pipeline.run_sa_experiment(s, t, ModelConfig())
    fused = pipeline.fuse((single, pipeline.run_sa_experiment(s, t, ModelConfig())))
    assert np.array_equal(fused.proba, single.proba)


def test_late_fusion_runs_branches_independently():
    s, t = generate(SMALL)
    schema = synth_schema(SMALL)
    cfg = ModelConfig(modality=Modality("late", audio_groups={"MFCC"}, visual_groups={"FAU"}))
    r = pipeline.run_late_fusion(s, t, cfg, schema)
    a, v = r.branches
    assert a.video_ids == v.video_ids == t.video_ids
    assert np.allclose(r.proba, (a.proba + v.proba) / 2)
    assert r.chosen_k == (a.chosen_k, v.chosen_k)


def test_early_fusion_is_sa_on_all_columns():
    s, t = generate(SMALL)
    schema = synth_schema(SMALL)
    ef = pipeline.run_early_fusion(s, t, ModelConfig(), schema)
    full = pipeline.run_sa_experiment(s, t, ModelConfig())
    assert np.array_equal(ef.proba, full.proba)


def test_early_fusion_is_column_order_invariant():
    s, t = generate(SMALL)
    perm = np.random.default_rng(4).permutation(len(s.column_names))
    a = pipeline.run_sa_experiment(s, t, ModelConfig())
    b = pipeline.run_sa_experiment(s.take_columns(perm), t.take_columns(perm), ModelConfig())
    assert (a.chosen_k, a.chosen_D) == (b.chosen_k, b.chosen_D)
    assert np.array_equal(a.proba, b.proba)


def test_modality_validation_and_names():
    with pytest.raises(ConfigError):
        Modality("late", audio_groups={"MFCC"}, visual_groups={"MFCC"})
    with pytest.raises(ConfigError):
        Modality.unimodal(set())
    with pytest.raises(ConfigError):
        ModelConfig(k_range=(5, 4))
    with pytest.raises(ConfigError):
        ModelConfig(mode="supervised")
    assert Modality.unimodal({"gaze"}).family == "Visual"
    assert Modality.unimodal({"MFCC", "eGeMAPs"}).name == "Audio (MFCC + eGeMAPs)"
    assert Modality("early").name == "Audio-Visual Early Fusion (EF)"


def test_config_text_round_trip():
    cfg = ModelConfig(modality=Modality.unimodal({"FAU", "pose"}), k_range=(2, 9), D_range=(1, 4), seed=12)
    text = pipeline.format_config(pipeline.config_to_dict(cfg))
    assert pipeline.config_from_dict(pipeline.parse_config_text(text)) == cfg
    parsed = pipeline.parse_config_text("# comment\n\nseed = 4  # trailing\nmode=chance\n")
    assert parsed == {"seed": "4", "mode": "chance"}
    with pytest.raises(ConfigError):
        pipeline.parse_config_text("colour = red\n")
    with pytest.raises(ConfigError):
        pipeline.parse_config_text("just words\n")
    with pytest.raises(ConfigError):
        pipeline.config_from_dict({"k_min": "three"})
