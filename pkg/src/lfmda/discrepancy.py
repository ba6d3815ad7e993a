"""Biased (V-statistic) Gaussian-kernel MMD as a domain-gap meter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .nn import preprocess


@dataclass
class MmdReport:
    mmd2: float
    bandwidths: list
    n_source: int
    n_target: int
    per_bandwidth: list

    def to_lines(self) -> str:
        out = [f"mmd2={self.mmd2!r}", f"n_source={self.n_source}", f"n_target={self.n_target}"]
        out += [f"bandwidth={b!r} mmd2={v!r}" for b, v in zip(self.bandwidths, self.per_bandwidth)]
        return "\n".join(out) + "\n"


def _as_samples(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return X.reshape(len(X), -1)


def median_heuristic(X, Y, max_points: int = 1000, seed: int = 0) -> float:
    """Median pairwise Euclidean distance over the pooled sample; 1.0 if that median is 0."""
    Z = np.concatenate([_as_samples(X), _as_samples(Y)])
    if len(Z) < 2:
        raise ValueError("median heuristic needs at least two points")
    if len(Z) > max_points:
        Z = Z[np.sort(np.random.default_rng(seed).choice(len(Z), max_points, replace=False))]
    med = float(np.median(pdist(Z)))
    return med if med > 0 else 1.0


def gaussian_gram(X, Y, sigma: float) -> np.ndarray:
    return np.exp(-cdist(X, Y, "sqeuclidean") / (2.0 * sigma * sigma))


def _kmean(X, Y, sigma):
    # exactly rounded sum, so the value does not depend on sample order
    k = gaussian_gram(X, Y, sigma)
    return math.fsum(k.ravel()) / k.size


def mmd2_biased(X, Y, bandwidths=None) -> MmdReport:
    """mean k(X,X) + mean k(Y,Y) - 2 mean k(X,Y), averaged over bandwidths.

    Without explicit bandwidths uses {1/2, 1, 2} times the median heuristic.
    """
    X, Y = _as_samples(X), _as_samples(Y)
    if len(X) == 0 or len(Y) == 0:
        raise ValueError("both samples must be non-empty")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if bandwidths is None:
        s = median_heuristic(X, Y)
        bandwidths = [s / 2, s, 2 * s]
    bandwidths = [float(b) for b in bandwidths]
    if not bandwidths or any(not b > 0 for b in bandwidths):
        raise ValueError("bandwidths must be positive")
    per = [_kmean(X, X, b) + _kmean(Y, Y, b) - 2.0 * _kmean(X, Y, b) for b in bandwidths]
    return MmdReport(math.fsum(per) / len(per), bandwidths, len(X), len(Y), per)


def embed(images, model=None, batch_size: int = 256) -> np.ndarray:
    """Flattened pixels, or the model's globally pooled features when a model is given."""
    x = np.asarray(images, dtype=np.float64)
    if model is None:
        return x.reshape(len(x), -1)
    x = x.astype(model.dtype)
    return np.concatenate([model.features(x[i : i + batch_size]) for i in range(0, len(x), batch_size)]).astype(np.float64)


def domain_gap(images_a, images_b, preproc: str = "none", m: int = 3, model=None, bandwidths=None) -> MmdReport:
    """MMD^2 between two image sets after optional Gaussian pre-filtering."""
    a = np.asarray(images_a, dtype=np.float64)
    b = np.asarray(images_b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("image sets must be non-empty")
    if a.shape[1:] != b.shape[1:]:
        raise ValueError(f"image sizes differ: {a.shape[1:]} vs {b.shape[1:]}")
    return mmd2_biased(embed(preprocess(a, preproc, m), model), embed(preprocess(b, preproc, m), model), bandwidths)
