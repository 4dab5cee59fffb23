"""Per-domain standardization, PCA subspaces and closed-form subspace alignment.

The alignment maps source principal coordinates onto the target basis with
``phi = C_s.T @ C_t``, the minimizer of ``||C_s @ phi - C_t||_F`` when the
source basis is orthonormal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        """Mask of zero-variance columns."""
        return self.stds == 0.0

    @property
    def n_columns(self) -> int:
        return len(self.means)


def fit_standardizer(X: np.ndarray) -> Standardizer:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DimensionError("need a nonempty 2-D matrix")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds[X.max(axis=0) == X.min(axis=0)] = 0.0
    return Standardizer(means, stds)


def apply_standardizer(s: Standardizer, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != s.n_columns:
        raise DimensionError(f"expected {s.n_columns} columns, got shape {X.shape}")
    safe = np.where(s.constant, 1.0, s.stds)
    Z = (X - s.means) / safe
    Z[:, s.constant] = 0.0
    return Z


def standardize(X: np.ndarray) -> np.ndarray:
    return apply_standardizer(fit_standardizer(X), X)


@dataclass(frozen=True)
class Subspace:
    components: np.ndarray
    explained_variances: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    def truncate(self, D: int) -> Subspace:
        if not 1 <= D <= self.dim:
            raise DimensionError(f"D={D} outside [1, {self.dim}]")
        return Subspace(self.components[:, :D], self.explained_variances[:D])


def _fix_signs(C: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made nonnegative
    pivot = C[np.argmax(np.abs(C), axis=0), np.arange(C.shape[1])]
    return C * np.where(pivot < 0, -1.0, 1.0)


def fit_pca(X: np.ndarray, D: int) -> Subspace:
    """Top-D principal directions of a column-centered matrix via thin SVD.

    Explained variances use the n-1 normalization of the sample covariance.
    """
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    if not 1 <= D <= min(n, m):
        raise DimensionError(f"D={D} outside [1, {min(n, m)}] for a {n}x{m} matrix")
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    C = _fix_signs(vt[:D].T.copy())
    var = s[:D] ** 2 / max(n - 1, 1)
    return Subspace(C, var)


@dataclass(frozen=True)
class AlignmentMap:
    phi: np.ndarray

    @property
    def dim(self) -> int:
        return self.phi.shape[0]


def align(source: Subspace, target: Subspace) -> AlignmentMap:
    if source.components.shape != target.components.shape:
        raise DimensionError(
            f"source basis {source.components.shape} and target basis "
            f"{target.components.shape} are not conformable"
        )
    return AlignmentMap(source.components.T @ target.components)


def alignment_objective(Cs: np.ndarray, Ct: np.ndarray, phi: np.ndarray) -> float:
    r = Cs @ phi - Ct
    return float(np.sum(r * r))


def project_source(Xs: np.ndarray, source: Subspace, amap: AlignmentMap) -> np.ndarray:
    """Aligned source coordinates ``Xs @ C_s @ phi``."""
    Xs = np.asarray(Xs, dtype=float)
    if Xs.ndim != 2 or Xs.shape[1] != source.ambient_dim:
        raise DimensionError(f"source rows must have {source.ambient_dim} columns, got {Xs.shape}")
    if amap.dim != source.dim:
        raise DimensionError(f"alignment is {amap.dim}-D but the source subspace is {source.dim}-D")
    return Xs @ source.components @ amap.phi


def project_target(Xt: np.ndarray, target: Subspace) -> np.ndarray:
    Xt = np.asarray(Xt, dtype=float)
    if Xt.ndim != 2 or Xt.shape[1] != target.ambient_dim:
        raise DimensionError(f"target rows must have {target.ambient_dim} columns, got {Xt.shape}")
    return Xt @ target.components
