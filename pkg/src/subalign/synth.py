"""Seeded synthetic source/target pairs with a known domain shift.

Latent class-conditional Gaussians (means +-separation/2 on every latent axis)
are written into feature columns by a coordinate embedding: latent axis i
drives column a_i. In the target domain the first `n_rotated_axes` latent axes
are rotated by `rotation_deg` within the plane (a_i, b_i), where b_i is a column
unused by the source. At 90 degrees those cues have moved to different columns.
Isotropic noise is added to every structured column; a few designated columns
are drawn from the same law in both domains and carry no shift at all.

Randomness comes from numpy's PCG64. Every (seed, purpose) pair gets its own
stream through ``SeedSequence(seed, spawn_key=(purpose,))`` so the layout, the
two domains and the offsets never share draws. Normal deviates come from the
Box-Muller transform of those uniform draws.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .data_model import (
    Feature,
    FeatureMatrix,
    FeatureSchema,
    array_to_labels,
    write_frame_csv,
)

_PURPOSES = {"layout": 0, "source": 1, "target": 2, "shift": 3}
ATTRIBUTE = "value"


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ShiftSpec:
    n_source: int = 200
    n_target: int = 200
    M: int = 40
    D_latent: int = 4
    class_separation: float = 3.0
    rotation_deg: float = 90.0
    n_rotated_axes: int = 2
    random_orthogonal: bool = False
    noise_sigma: float = 0.3
    latent_std: float = 1.0
    deceptive_fraction: float = 0.5
    n_invariant_columns: int = 3
    mean_shift: float = 0.0
    seed: int = 7

    def validate(self) -> None:
        if min(self.n_source, self.n_target, self.M, self.D_latent) < 1:
            raise SpecError("n_source, n_target, M and D_latent must be >= 1")
        if self.n_invariant_columns < 0 or self.n_rotated_axes < 0:
            raise SpecError("column counts must be >= 0")
        if self.n_rotated_axes > self.D_latent:
            raise SpecError("cannot rotate more axes than D_latent")
        if self.D_latent + self.n_rotated_axes + self.n_invariant_columns > self.M:
            raise SpecError("M too small for latent, rotation and invariant columns")
        if not self.class_separation >= 0 or not self.noise_sigma >= 0 or not self.latent_std > 0:
            raise SpecError("separation and noise must be >= 0, latent_std > 0")
        if not 0 < self.deceptive_fraction < 1:
            raise SpecError("deceptive_fraction must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> ShiftSpec:
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k not in kinds:
                raise SpecError(f"unknown synth parameter {k!r}")
            default = getattr(cls, k)
            if isinstance(default, bool):
                out[k] = v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")
            else:
                out[k] = type(default)(v)
        return cls(**out)

    def to_dict(self) -> dict:
        return asdict(self)


def stream(seed: int, purpose: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(_PURPOSES[purpose],))))


def normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals by Box-Muller from uniform draws."""
    n = int(np.prod(shape))
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1]
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:n].reshape(shape)


def _random_orthogonal(rng, n) -> np.ndarray:
    q, r = np.linalg.qr(normals(rng, (n, n)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


@dataclass(frozen=True)
class _Layout:
    invariant: np.ndarray
    structured: np.ndarray
    source_embedding: np.ndarray  # M x D_latent
    target_embedding: np.ndarray


def _layout(spec: ShiftSpec) -> _Layout:
    rng = stream(spec.seed, "layout")
    M, L, r = spec.M, spec.D_latent, spec.n_rotated_axes
    perm = rng.permutation(M)
    invariant = np.sort(perm[: spec.n_invariant_columns])
    structured = np.sort(perm[spec.n_invariant_columns :])
    cols = structured[rng.permutation(len(structured))]
    A = np.zeros((M, L))
    A[cols[:L], np.arange(L)] = 1.0
    B = np.zeros((M, r))
    B[cols[L : L + r], np.arange(r)] = 1.0
    if spec.random_orthogonal:
        E = np.hstack([A, B])
        At = E @ _random_orthogonal(rng, L + r)[:, :L]
    else:
        theta = math.radians(spec.rotation_deg)
        At = A.copy()
        At[:, :r] = math.cos(theta) * A[:, :r] + math.sin(theta) * B
    return _Layout(invariant, structured, A, At)


def feature_names(spec: ShiftSpec) -> tuple[str, ...]:
    return tuple(f"x{j:02d}" for j in range(spec.M))


def column_names(spec: ShiftSpec) -> tuple[str, ...]:
    return tuple(f"{f}__{ATTRIBUTE}" for f in feature_names(spec))


def synth_schema(spec: ShiftSpec) -> FeatureSchema:
    """Nominal split: first half of the columns MFCC (audio), the rest FAU (visual)."""
    half = spec.M // 2
    return FeatureSchema(
        tuple(
            Feature(name, "audio", "MFCC") if j < half else Feature(name, "visual", "FAU")
            for j, name in enumerate(feature_names(spec))
        )
    )


def invariant_columns(spec: ShiftSpec) -> tuple[str, ...]:
    spec.validate()
    names = column_names(spec)
    return tuple(names[j] for j in _layout(spec).invariant)


def _draw(spec: ShiftSpec, lay: _Layout, n: int, embedding: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    n_dec = min(max(round(n * spec.deceptive_fraction), 1), n - 1) if n > 1 else 1
    y = np.zeros(n, dtype=np.int8)
    y[:n_dec] = 1
    y = y[rng.permutation(n)]
    sign = np.where(y == 1, 1.0, -1.0)[:, None]
    z = spec.latent_std * normals(rng, (n, spec.D_latent)) + sign * (spec.class_separation / 2.0)
    X = z @ embedding.T
    X[:, lay.structured] += spec.noise_sigma * normals(rng, (n, len(lay.structured)))
    X[:, lay.invariant] = normals(rng, (n, len(lay.invariant)))
    return X, y


def generate(spec: ShiftSpec = ShiftSpec()) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Labeled (source, target) matrices; the pipeline hides target labels itself."""
    spec.validate()
    lay = _layout(spec)
    names = column_names(spec)
    Xs, ys = _draw(spec, lay, spec.n_source, lay.source_embedding, stream(spec.seed, "source"))
    Xt, yt = _draw(spec, lay, spec.n_target, lay.target_embedding, stream(spec.seed, "target"))
    if spec.mean_shift:
        signs = np.where(stream(spec.seed, "shift").random(len(lay.structured)) < 0.5, -1.0, 1.0)
        Xt[:, lay.structured] += spec.mean_shift * signs
    source = FeatureMatrix(
        tuple(f"s{i:04d}" for i in range(spec.n_source)), names, Xs, array_to_labels(ys), "source"
    )
    target = FeatureMatrix(
        tuple(f"t{i:04d}" for i in range(spec.n_target)), names, Xt, array_to_labels(yt), "target"
    )
    return source, target


def emit_frames(m: FeatureMatrix, out_dir: str | Path, n_frames: int = 16, wobble: float = 0.25) -> Path:
    """Write one frame-level CSV per row plus a manifest; returns the manifest path.

    Each feature's frames alternate value +- wobble, so their mean is the
    featurized value.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if n_frames < 2 or n_frames % 2:
        raise SpecError("n_frames must be an even number >= 2")
    feats = m.features
    pattern = wobble * np.where(np.arange(n_frames) % 2 == 0, 1.0, -1.0)[:, None]
    lines = ["video_id,label,path"]
    labels = m.labels if m.labels is not None else (None,) * m.n_rows
    for vid, lab, row in zip(m.video_ids, labels, m.X):
        write_frame_csv(out_dir / f"{vid}.csv", feats, row[None, :] + pattern)
        lines.append(f"{vid},{lab.value if lab else 'unlabeled'},{vid}.csv")
    manifest = out_dir / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest
