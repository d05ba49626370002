"""Test problems and data handling.

Provides the regularized logistic-regression min-min objective, synthetic
coupled-quadratic families with analytic solutions (for oracle-free checks),
finite-sum quadratics for the variance-reduced solver, and LIBSVM-format IO.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .core import Ball, FiniteSum, seeded_rng
from .solver import MinMinComponents, MinMinProblem

__all__ = [
    "Dataset",
    "FiniteSumQuadratic",
    "LibsvmParseError",
    "QuadraticSolution",
    "UnsupportedLabelError",
    "load_libsvm",
    "logistic_loss",
    "make_finite_sum_quadratic",
    "make_logreg_minmin",
    "make_quadratic_minmin",
    "make_synthetic_classification",
    "save_libsvm",
]


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input; the message carries the line number."""


class UnsupportedLabelError(ValueError):
    """Labels are not binary ({-1,+1} or {0,1})."""


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix with labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be 2-d")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must have one entry per example")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise UnsupportedLabelError("labels must be -1 or +1")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def num_examples(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


def logistic_loss(w, z, label: float) -> tuple[float, np.ndarray]:
    """Overflow-safe logistic loss log(1 + exp(-label*<w, z>)) and gradient.

    Large positive margins underflow gracefully (value ~ exp(-margin)); large
    negative margins return value ~ -margin without overflow.
    """
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    if w.shape != z.shape:
        raise ValueError("w and z must have equal shapes")
    if label not in (-1.0, 1.0):
        raise ValueError("label must be -1 or +1")
    margin = label * float(w @ z)
    value = float(np.logaddexp(0.0, -margin))
    gradient = (-label * float(expit(-margin))) * z
    return value, gradient


def load_libsvm(path, num_features: int | None = None, standardize: bool = False) -> Dataset:
    """Read a LIBSVM/SVMlight file (1-based sparse indices) into a dense Dataset.

    Labels in {-1,+1} are kept; {0,1} labels are mapped 0 -> -1.  Anything else
    raises UnsupportedLabelError.  Malformed lines raise LibsvmParseError with
    the offending line number.  ``standardize`` z-scores the feature columns.
    """
    raw_labels: list[float] = []
    rows: list[list[tuple[int, float]]] = []
    max_index = 0
    with open(path, encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError as exc:
                raise LibsvmParseError(f"line {line_number}: bad label {tokens[0]!r}") from exc
            pairs: list[tuple[int, float]] = []
            for token in tokens[1:]:
                index_text, sep, value_text = token.partition(":")
                if not sep:
                    raise LibsvmParseError(
                        f"line {line_number}: expected index:value, got {token!r}"
                    )
                try:
                    index = int(index_text)
                    value = float(value_text)
                except ValueError as exc:
                    raise LibsvmParseError(f"line {line_number}: bad pair {token!r}") from exc
                if index < 1:
                    raise LibsvmParseError(f"line {line_number}: indices are 1-based, got {index}")
                pairs.append((index, value))
                max_index = max(max_index, index)
            raw_labels.append(label)
            rows.append(pairs)
    if not rows:
        raise LibsvmParseError("no data rows found")
    if num_features is None:
        num_features = max_index
    elif num_features < max_index:
        raise ValueError(f"num_features={num_features} below largest index {max_index}")

    label_set = set(raw_labels)
    if label_set <= {-1.0, 1.0}:
        labels = np.asarray(raw_labels)
    elif label_set <= {0.0, 1.0}:
        labels = np.asarray([1.0 if v == 1.0 else -1.0 for v in raw_labels])
    else:
        raise UnsupportedLabelError(f"labels must be binary, got {sorted(label_set)}")

    features = np.zeros((len(rows), num_features))
    for row_index, pairs in enumerate(rows):
        for index, value in pairs:
            features[row_index, index - 1] = value
    if standardize:
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        std[std == 0.0] = 1.0
        features = (features - mean) / std
    return Dataset(features, labels)


def save_libsvm(dataset: Dataset, path) -> None:
    """Write a Dataset in LIBSVM format (nonzeros only, full float precision)."""
    lines = []
    for row, label in zip(dataset.features, dataset.labels):
        parts = [f"{int(label):d}"]
        for index in np.nonzero(row)[0]:
            parts.append(f"{index + 1}:{float(row[index])!r}")
        lines.append(" ".join(parts))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def make_synthetic_classification(
    num_examples: int,
    num_features: int,
    seed: int,
    label_noise: float = 0.05,
) -> Dataset:
    """Gaussian features with labels from a noisy random hyperplane."""
    rng = seeded_rng(seed)
    features = rng.normal(size=(num_examples, num_features))
    direction = rng.normal(size=num_features) / math.sqrt(num_features)
    margins = features @ direction + 0.3 * rng.normal(size=num_examples)
    labels = np.where(margins >= 0.0, 1.0, -1.0)
    flip = rng.random(num_examples) < label_noise
    labels[flip] *= -1.0
    return Dataset(features, labels)


def make_logreg_minmin(
    dataset: Dataset,
    d: int,
    sigma2_inv: float,
    radius_x: float | None = None,
    radius_y: float | None = None,
) -> MinMinProblem:
    """Regularized logistic regression split into an (x, y) min-min problem.

    The first ``d`` feature columns form the low-dimensional block x; the rest
    form y, which carries the Tikhonov term sigma2_inv * ||y||^2.  Then
    mu = 2*sigma2_inv and L_i = ||z_{i,y}||^2/4 + 2*sigma2_inv per example
    (each component replicates the regularizer).
    """
    if sigma2_inv <= 0:
        raise ValueError("sigma2_inv must be positive")
    total = dataset.num_features
    if not 0 < d < total:
        raise ValueError(f"d must be strictly between 0 and {total}")
    Zx = dataset.features[:, :d].copy()
    Zy = dataset.features[:, d:].copy()
    t = dataset.labels.copy()
    m = dataset.num_examples
    n = total - d

    scale = float(np.mean(np.linalg.norm(dataset.features, axis=1)))
    if radius_x is None:
        radius_x = 10.0 * (1.0 + scale)
    if radius_y is None:
        radius_y = 10.0 * (1.0 + scale)

    mu = 2.0 * sigma2_inv
    lipschitz = 0.25 * np.einsum("ij,ij->i", Zy, Zy) + mu

    def margins(x, y):
        return t * (Zx @ x + Zy @ y)

    def value(x, y):
        return float(np.mean(np.logaddexp(0.0, -margins(x, y))) + sigma2_inv * (y @ y))

    def grad_y(x, y):
        weights = t * expit(-margins(x, y))
        return -(Zy.T @ weights) / m + mu * y

    def subgrad_x(x, y):
        weights = t * expit(-margins(x, y))
        return -(Zx.T @ weights) / m

    def component_value(i, x, y):
        loss, _ = logistic_loss(np.concatenate([x, y]), np.concatenate([Zx[i], Zy[i]]), t[i])
        return loss + sigma2_inv * float(y @ y)

    def component_grad_y(i, x, y):
        weight = t[i] * float(expit(-t[i] * (Zx[i] @ x + Zy[i] @ y)))
        return -weight * Zy[i] + mu * y

    def component_subgrad_x(i, x, y):
        weight = t[i] * float(expit(-t[i] * (Zx[i] @ x + Zy[i] @ y)))
        return -weight * Zx[i]

    grad_norm_bound = float(np.mean(np.linalg.norm(Zy, axis=1))) + mu * radius_y
    return MinMinProblem(
        x_dim=d,
        y_dim=n,
        set_x=Ball(np.zeros(d), radius_x),
        set_y=Ball(np.zeros(n), radius_y),
        value=value,
        grad_y=grad_y,
        subgrad_x=subgrad_x,
        L=float(np.mean(lipschitz)),
        mu=mu,
        grad_norm_bound=grad_norm_bound,
        components=MinMinComponents(
            m=m,
            lipschitz=lipschitz,
            value=component_value,
            grad_y=component_grad_y,
            subgrad_x=component_subgrad_x,
        ),
    )


class QuadraticSolution(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    value: float


def make_quadratic_minmin(
    x_dim: int,
    y_dim: int,
    mu: float,
    seed: int,
    coupling: np.ndarray | None = None,
    nu: float = 0.1,
    radius_x: float | None = None,
    radius_y: float | None = None,
    num_components: int | None = None,
) -> tuple[MinMinProblem, QuadraticSolution]:
    """Coupled quadratic F(x,y) = ||y - Bx||^2/2 + mu*||y||^2/2 + nu*||x - x0||^2/2.

    The inner minimizer is y(x) = Bx/(1+mu), so f(x) is an explicit quadratic
    and the optimal pair is returned in closed form (both interior by the
    default radius choices, hence G = 0 exactly).  ``num_components`` splits
    the residual rows into a finite-sum decomposition with L_i = m + mu.
    """
    if mu <= 0 or nu <= 0:
        raise ValueError("mu and nu must be positive")
    rng = seeded_rng(seed)
    B = (
        np.asarray(coupling, dtype=float)
        if coupling is not None
        else rng.normal(size=(y_dim, x_dim)) / math.sqrt(y_dim)
    )
    if B.shape != (y_dim, x_dim):
        raise ValueError(f"coupling must have shape ({y_dim}, {x_dim})")
    x0 = 0.5 * rng.normal(size=x_dim)
    if radius_x is None:
        radius_x = 2.0 * (1.0 + float(np.linalg.norm(x0)))
    b_norm = float(np.linalg.norm(B, 2))
    if radius_y is None:
        radius_y = 1.0 + 2.0 * b_norm * radius_x / (1.0 + mu)

    def value(x, y):
        r = y - B @ x
        return float(0.5 * (r @ r) + 0.5 * mu * (y @ y) + 0.5 * nu * ((x - x0) @ (x - x0)))

    def grad_y(x, y):
        return (1.0 + mu) * y - B @ x

    def subgrad_x(x, y):
        return -B.T @ (y - B @ x) + nu * (x - x0)

    components = None
    L = 1.0 + mu
    if num_components is not None:
        if not 1 <= num_components <= y_dim:
            raise ValueError("num_components must lie in [1, y_dim]")
        blocks = np.array_split(np.arange(y_dim), num_components)
        nc = num_components

        def component_value(i, x, y):
            blk = blocks[i]
            r = y[blk] - B[blk] @ x
            return float(
                0.5 * nc * (r @ r) + 0.5 * mu * (y @ y) + 0.5 * nu * ((x - x0) @ (x - x0))
            )

        def component_grad_y(i, x, y):
            blk = blocks[i]
            g = mu * y.copy()
            g[blk] += nc * (y[blk] - B[blk] @ x)
            return g

        def component_subgrad_x(i, x, y):
            blk = blocks[i]
            return -nc * (B[blk].T @ (y[blk] - B[blk] @ x)) + nu * (x - x0)

        components = MinMinComponents(
            m=nc,
            lipschitz=np.full(nc, nc + mu),
            value=component_value,
            grad_y=component_grad_y,
            subgrad_x=component_subgrad_x,
        )
        L = float(nc + mu)

    # Closed-form optimum: f(x) = mu/(2(1+mu))*||Bx||^2 + nu/2*||x-x0||^2.
    M = (mu / (1.0 + mu)) * (B.T @ B) + nu * np.eye(x_dim)
    x_star = np.linalg.solve(M, nu * x0)
    y_star = B @ x_star / (1.0 + mu)
    problem = MinMinProblem(
        x_dim=x_dim,
        y_dim=y_dim,
        set_x=Ball(np.zeros(x_dim), radius_x),
        set_y=Ball(np.zeros(y_dim), radius_y),
        value=value,
        grad_y=grad_y,
        subgrad_x=subgrad_x,
        L=L,
        mu=mu,
        grad_norm_bound=0.0,
        components=components,
    )
    return problem, QuadraticSolution(x=x_star, y=y_star, value=value(x_star, y_star))


class FiniteSumQuadratic(NamedTuple):
    oracle: FiniteSum
    region: Ball
    y_star: np.ndarray
    f_star: float


def make_finite_sum_quadratic(
    num_components: int,
    dim: int,
    mu: float,
    L: float,
    seed: int,
    heterogeneity: float = 0.0,
) -> FiniteSumQuadratic:
    """Finite sum of quadratics f_i(y) = s_i/2 * (y - c_i)^T D (y - c_i).

    ``D`` is diagonal with log-spaced entries spanning [mu, L], so the
    aggregate Hessian has exactly those extreme eigenvalues (the scales s_i
    average to one).  ``heterogeneity`` > 0 spreads the per-component Lipschitz
    constants, exercising nonuniform sampling weights.  The optimum is the
    scale-weighted mean of the centers.
    """
    if num_components < 1:
        raise ValueError("num_components must be at least 1")
    if not 0 < mu <= L:
        raise ValueError("need 0 < mu <= L")
    if dim < 2 and mu != L:
        raise ValueError("need dim >= 2 to span distinct mu and L")
    rng = seeded_rng(seed)
    curvature = np.geomspace(mu, L, dim) if dim > 1 else np.full(1, L)
    scales = np.ones(num_components)
    if heterogeneity > 0.0:
        scales = 1.0 + heterogeneity * rng.random(num_components)
        scales /= scales.mean()
    centers = rng.normal(size=(num_components, dim))

    def component_value(i, y):
        diff = y - centers[i]
        return 0.5 * scales[i] * float(diff @ (curvature * diff))

    def component_gradient(i, y):
        return scales[i] * curvature * (y - centers[i])

    def batch_value(y):
        diff = y[None, :] - centers
        return 0.5 * float(np.mean(scales * np.einsum("ij,j,ij->i", diff, curvature, diff)))

    def batch_gradient(y):
        mean_diff = np.mean(scales[:, None] * (y[None, :] - centers), axis=0)
        return curvature * mean_diff

    oracle = FiniteSum(
        dim,
        component_value,
        component_gradient,
        lipschitz=scales * float(np.max(curvature)),
        mu=mu,
        batch_value=batch_value,
        batch_gradient=batch_gradient,
    )
    y_star = (scales @ centers) / scales.sum()
    f_star = batch_value(y_star)
    radius = 2.0 * (1.0 + float(np.linalg.norm(y_star)) + float(np.max(np.linalg.norm(centers, axis=1))))
    return FiniteSumQuadratic(
        oracle=oracle,
        region=Ball(np.zeros(dim), radius),
        y_star=y_star,
        f_star=f_star,
    )
