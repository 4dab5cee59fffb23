"""Experiment orchestration: SA models, matched no-SA baselines and the chance baseline.

Target labels never enter any fitting path; every entry point strips them
before use and scoring happens separately in :mod:`subalign.metrics`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from . import knn
from .data_model import (
    AUDIO_GROUPS,
    VISUAL_GROUPS,
    DataError,
    FeatureMatrix,
    FeatureSchema,
    select_columns,
)
from .subspace import (
    align,
    apply_standardizer,
    fit_pca,
    fit_standardizer,
    project_source,
    project_target,
    standardize,
)

N_FOLDS = 3
MODES = ("sa", "baseline_no_sa", "chance")
BASELINE_VARIANTS = ("standardized", "pca_no_align")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Modality:
    kind: str = "early"  # "groups" | "early" | "late"
    groups: frozenset[str] = frozenset()
    audio_groups: frozenset[str] = AUDIO_GROUPS
    visual_groups: frozenset[str] = VISUAL_GROUPS

    def __post_init__(self):
        object.__setattr__(self, "groups", frozenset(self.groups))
        object.__setattr__(self, "audio_groups", frozenset(self.audio_groups))
        object.__setattr__(self, "visual_groups", frozenset(self.visual_groups))
        if self.kind not in ("groups", "early", "late"):
            raise ConfigError(f"unknown modality kind {self.kind!r}")
        if self.kind == "groups" and not self.groups:
            raise ConfigError("a unimodal model needs at least one feature group")
        if self.kind == "late":
            if not self.audio_groups or not self.visual_groups:
                raise ConfigError("late fusion needs nonempty audio and visual group sets")
            if self.audio_groups & self.visual_groups:
                raise ConfigError("late fusion branches must use disjoint groups")

    @classmethod
    def unimodal(cls, groups: Iterable[str]) -> Modality:
        return cls("groups", frozenset(groups))

    @property
    def family(self) -> str:
        """Audio, Visual or Audio-Visual."""
        if self.kind == "groups":
            if self.groups <= AUDIO_GROUPS:
                return "Audio"
            if self.groups <= VISUAL_GROUPS:
                return "Visual"
        return "Audio-Visual"

    @property
    def name(self) -> str:
        if self.kind == "early":
            return "Audio-Visual Early Fusion (EF)"
        if self.kind == "late":
            return "Audio-Visual Late Fusion (LF)"
        if self.groups == AUDIO_GROUPS:
            return "Audio (MFCC + eGeMAPs)"
        if self.groups == VISUAL_GROUPS:
            return "Visual (FAU + Gaze + Pose)"
        return " + ".join(g if g in ("MFCC", "eGeMAPs", "FAU") else g.capitalize() for g in sorted(self.groups))


@dataclass(frozen=True)
class ModelConfig:
    mode: str = "sa"
    modality: Modality = field(default_factory=Modality)
    k_range: tuple[int, int] = (1, 30)
    D_range: tuple[int, int] = (1, 10)
    seed: int = 0
    baseline_variant: str = "standardized"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.baseline_variant not in BASELINE_VARIANTS:
            raise ConfigError(f"baseline_variant must be one of {BASELINE_VARIANTS}")
        for name, (lo, hi) in (("k_range", self.k_range), ("D_range", self.D_range)):
            if not 1 <= lo <= hi:
                raise ConfigError(f"{name} must satisfy 1 <= min <= max, got {(lo, hi)}")


@dataclass(frozen=True)
class FitResult:
    video_ids: tuple[str, ...]
    proba: np.ndarray
    chosen_k: int | tuple[int, ...] | None = None
    chosen_D: int | tuple[int, ...] | None = None
    cv_score: float | tuple[float, ...] | None = None
    branches: tuple[FitResult, ...] = ()
    degenerate_training: bool = False

    @property
    def labels(self) -> np.ndarray:
        """Predicted labels (1 = deceptive) by the >= 0.5 rule."""
        return knn.label_from_proba(self.proba)


def _check_pair(source: FeatureMatrix, target: FeatureMatrix) -> None:
    if source.column_names != target.column_names:
        raise DataError("source and target do not share the same column schema")
    if source.labels is None:
        raise DataError("source matrix must be fully labeled")


def stratified_folds(y: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Fold index per row; each class is shuffled and dealt round-robin."""
    rng = np.random.default_rng(seed)
    folds = np.empty(len(y), dtype=int)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if len(idx) < n_folds:
            raise DataError(
                f"class {'deceptive' if cls else 'truthful'} has {len(idx)} source rows; "
                f"{n_folds}-fold stratified CV needs at least {n_folds}"
            )
        folds[rng.permutation(idx)] = np.arange(len(idx)) % n_folds
    return folds


def _grid(lo_hi: tuple[int, int], cap: int, what: str) -> list[int]:
    lo, hi = lo_hi
    vals = list(range(lo, min(hi, cap) + 1))
    if not vals:
        raise DataError(f"no feasible {what} in [{lo}, {hi}] (at most {cap} possible)")
    return vals


def select_hyperparams(
    source: FeatureMatrix, cfg: ModelConfig, max_D: int | None = None
) -> tuple[int, int, float]:
    """Grid-search (k, D) by stratified 3-fold CV accuracy on the source alone.

    Ties go to the smallest D, then the smallest k. Grid values that no fold
    can support (k above the training-part size, D above its rank bound) are
    dropped.
    """
    y = source.y
    n, m = source.X.shape
    if n < N_FOLDS:
        raise DataError(f"need at least {N_FOLDS} source rows for cross-validation, got {n}")
    folds = stratified_folds(y, N_FOLDS, cfg.seed)
    n_train = min(int(np.sum(folds != f)) for f in range(N_FOLDS))
    ks = _grid(cfg.k_range, n_train, "k")
    D_cap = min(n_train, m, max_D if max_D is not None else m)
    Ds = _grid(cfg.D_range, D_cap, "D")
    acc = np.zeros((len(Ds), len(ks)))
    k_idx = np.array(ks) - 1
    for f in range(N_FOLDS):
        tr, te = folds != f, folds == f
        st = fit_standardizer(source.X[tr])
        A = apply_standardizer(st, source.X[tr])
        B = apply_standardizer(st, source.X[te])
        full = fit_pca(A, Ds[-1])
        for a, D in enumerate(Ds):
            C = full.components[:, :D]
            counts = knn.deceptive_counts(A @ C, y[tr], B @ C)[:, k_idx]
            pred = counts / np.array(ks) >= 0.5
            acc[a] += np.mean(pred == y[te][:, None], axis=0)
    acc /= N_FOLDS
    best = acc.max()
    a, b = np.argwhere(acc >= best - 1e-12)[0]
    return ks[b], Ds[a], float(acc[a, b])


@dataclass(frozen=True)
class SAProjection:
    source: np.ndarray
    target: np.ndarray
    phi: np.ndarray


def sa_project(Xs: np.ndarray, Xt: np.ndarray, D: int) -> SAProjection:
    """Standardize each domain on its own, fit both PCA subspaces and align them."""
    Zs, Zt = standardize(Xs), standardize(Xt)
    Ss, St = fit_pca(Zs, D), fit_pca(Zt, D)
    amap = align(Ss, St)
    return SAProjection(project_source(Zs, Ss, amap), project_target(Zt, St), amap.phi)


def run_sa_experiment(
    source: FeatureMatrix,
    target: FeatureMatrix,
    cfg: ModelConfig,
    k: int | None = None,
    D: int | None = None,
) -> FitResult:
    """Select (k, D) by source CV unless given, then classify target rows in aligned coordinates."""
    _check_pair(source, target)
    target = target.without_labels()
    if source.n_rows < N_FOLDS:
        raise DataError(f"need at least {N_FOLDS} source rows, got {source.n_rows}")
    cv = None
    if k is None or D is None:
        max_D = min(target.n_rows, source.n_rows)
        k_sel, D_sel, cv = select_hyperparams(source, cfg, max_D=max_D)
        k = k_sel if k is None else k
        D = D_sel if D is None else D
    proj = sa_project(source.X, target.X, D)
    model = knn.fit(proj.source, source.y, k)
    proba = knn.predict_proba_many(model, proj.target)
    return FitResult(target.video_ids, proba, k, D, cv, degenerate_training=model.degenerate)


def run_baseline(
    source: FeatureMatrix,
    target: FeatureMatrix,
    cfg: ModelConfig,
    matched_k: int,
    matched_D: int | None = None,
) -> FitResult:
    """KNN without alignment at the SA model's k.

    The default variant classifies per-domain standardized columns directly;
    ``pca_no_align`` projects each domain on its own PCA basis at `matched_D`
    but skips phi.
    """
    _check_pair(source, target)
    target = target.without_labels()
    if not 1 <= matched_k <= source.n_rows:
        raise DataError(f"matched_k={matched_k} outside [1, {source.n_rows}]")
    Zs, Zt = standardize(source.X), standardize(target.X)
    if cfg.baseline_variant == "pca_no_align":
        if matched_D is None:
            raise ConfigError("the pca_no_align baseline needs matched_D")
        Zs = Zs @ fit_pca(Zs, matched_D).components
        Zt = Zt @ fit_pca(Zt, matched_D).components
    model = knn.fit(Zs, source.y, matched_k)
    return FitResult(
        target.video_ids,
        knn.predict_proba_many(model, Zt),
        matched_k,
        matched_D if cfg.baseline_variant == "pca_no_align" else None,
        degenerate_training=model.degenerate,
    )


def run_chance_baseline(target: FeatureMatrix | int) -> FitResult:
    """Always predict deceptive with probability 1."""
    if isinstance(target, FeatureMatrix):
        ids = target.video_ids
    else:
        if target < 1:
            raise DataError("target_size must be >= 1")
        ids = tuple(f"row{i}" for i in range(target))
    return FitResult(ids, np.ones(len(ids)))


def fuse(branches: tuple[FitResult, ...]) -> FitResult:
    """Unweighted mean of branch probabilities."""
    ids = branches[0].video_ids
    if any(b.video_ids != ids for b in branches):
        raise DataError("fusion branches predict different rows")
    proba = np.mean([b.proba for b in branches], axis=0)
    return FitResult(
        ids,
        proba,
        tuple(b.chosen_k for b in branches),
        tuple(b.chosen_D for b in branches),
        tuple(b.cv_score for b in branches) if all(b.cv_score is not None for b in branches) else None,
        branches,
        any(b.degenerate_training for b in branches),
    )


def modality_views(
    source: FeatureMatrix, target: FeatureMatrix, modality: Modality, schema: FeatureSchema
) -> list[tuple[FeatureMatrix, FeatureMatrix]]:
    """Column-restricted (source, target) pairs: one per branch."""
    _check_pair(source, target)
    if modality.kind == "groups":
        sets = [modality.groups]
    elif modality.kind == "early":
        sets = [schema.groups]
    else:
        sets = [modality.audio_groups & schema.groups, modality.visual_groups & schema.groups]
        if not all(sets):
            raise DataError("late fusion needs both audio and visual groups in the schema")
    return [(select_columns(source, g, schema), select_columns(target, g, schema)) for g in sets]


def run_late_fusion(
    source: FeatureMatrix, target: FeatureMatrix, cfg: ModelConfig, schema: FeatureSchema
) -> FitResult:
    if cfg.modality.kind != "late":
        raise ConfigError("run_late_fusion needs a late-fusion modality")
    views = modality_views(source, target, cfg.modality, schema)
    return fuse(tuple(run_sa_experiment(s, t, cfg) for s, t in views))


def run_early_fusion(
    source: FeatureMatrix, target: FeatureMatrix, cfg: ModelConfig, schema: FeatureSchema
) -> FitResult:
    if cfg.modality.kind != "early":
        raise ConfigError("run_early_fusion needs an early-fusion modality")
    ((s, t),) = modality_views(source, target, cfg.modality, schema)
    return run_sa_experiment(s, t, cfg)


@dataclass(frozen=True)
class ExperimentResult:
    sa: FitResult
    baseline: FitResult
    chance: FitResult


def run_experiment(
    source: FeatureMatrix, target: FeatureMatrix, cfg: ModelConfig, schema: FeatureSchema
) -> ExperimentResult:
    """SA model for `cfg.modality`, its matched-k baseline and the chance baseline."""
    views = modality_views(source, target, cfg.modality, schema)
    sa_branches, bl_branches = [], []
    for s, t in views:
        sa = run_sa_experiment(s, t, cfg)
        sa_branches.append(sa)
        bl_branches.append(run_baseline(s, t, cfg, sa.chosen_k, sa.chosen_D))
    if len(views) == 1:
        sa, bl = sa_branches[0], bl_branches[0]
    else:
        sa, bl = fuse(tuple(sa_branches)), fuse(tuple(bl_branches))
    return ExperimentResult(sa, bl, run_chance_baseline(target))


# -- experiment configuration files ---------------------------------------------------

CONFIG_KEYS = (
    "mode",
    "modality",
    "groups",
    "audio_groups",
    "visual_groups",
    "k_min",
    "k_max",
    "D_min",
    "D_max",
    "seed",
    "baseline_variant",
    "matched_k",
    "matched_D",
    "source",
    "target",
    "schema",
    "out",
)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def _group_set(text: str) -> frozenset[str]:
    return frozenset(g.strip() for g in text.split(",") if g.strip())


def config_from_dict(d: dict[str, str]) -> ModelConfig:
    try:
        kind = d.get("modality", "early")
        if kind == "groups":
            modality = Modality.unimodal(_group_set(d.get("groups", "")))
        elif kind == "late":
            modality = Modality(
                "late",
                audio_groups=_group_set(d.get("audio_groups", ",".join(sorted(AUDIO_GROUPS)))),
                visual_groups=_group_set(d.get("visual_groups", ",".join(sorted(VISUAL_GROUPS)))),
            )
        else:
            modality = Modality(kind)
        return ModelConfig(
            mode=d.get("mode", "sa"),
            modality=modality,
            k_range=(int(d.get("k_min", 1)), int(d.get("k_max", 30))),
            D_range=(int(d.get("D_min", 1)), int(d.get("D_max", 10))),
            seed=int(d.get("seed", 0)),
            baseline_variant=d.get("baseline_variant", "standardized"),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None


def config_to_dict(cfg: ModelConfig) -> dict[str, str]:
    m = cfg.modality
    d = {"mode": cfg.mode, "modality": m.kind}
    if m.kind == "groups":
        d["groups"] = ",".join(sorted(m.groups))
    if m.kind == "late":
        d["audio_groups"] = ",".join(sorted(m.audio_groups))
        d["visual_groups"] = ",".join(sorted(m.visual_groups))
    d.update(
        k_min=str(cfg.k_range[0]),
        k_max=str(cfg.k_range[1]),
        D_min=str(cfg.D_range[0]),
        D_max=str(cfg.D_range[1]),
        seed=str(cfg.seed),
        baseline_variant=cfg.baseline_variant,
    )
    return d


def format_config(d: dict[str, str]) -> str:
    return "".join(f"{k} = {d[k]}\n" for k in CONFIG_KEYS if k in d)


def with_mode(cfg: ModelConfig, mode: str) -> ModelConfig:
    return replace(cfg, mode=mode)
