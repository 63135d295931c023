"""Finite metric measure spaces, couplings, and distortion cost tensors."""

from __future__ import annotations

import dataclasses
import json
import warnings

import numpy as np

TRIANGLE_TOL = 1e-9
WEIGHT_TOL = 1e-9
DIAMETER_TOL = 1e-9

_KNOWN_FIELDS = {"labels", "dist", "weights", "name"}


class ValidationError(ValueError):
    """An input space or coupling violates a structural invariant."""


@dataclasses.dataclass(frozen=True)
class MetricMeasureSpace:
    """A finite metric space together with a probability weight vector.

    ``dist`` must be symmetric with zero diagonal and satisfy the triangle
    inequality; ``weights`` must be nonnegative and sum to one.  Instances
    are immutable and safe to share across threads.
    """

    labels: tuple
    dist: np.ndarray
    weights: np.ndarray
    name: str = ""
    scale: float = 1.0  # factor distances were divided by, if normalized

    def __post_init__(self):
        dist = np.ascontiguousarray(np.asarray(self.dist, dtype=float))
        weights = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        validate_space(self)
        self.dist.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.size else 0.0

    @property
    def zero_weight_indices(self) -> list:
        return [i for i, w in enumerate(self.weights) if w == 0.0]

    def is_normalized(self, tol: float = DIAMETER_TOL) -> bool:
        return self.diameter <= 1.0 + tol


def validate_space(space: MetricMeasureSpace,
                   triangle_tol: float = TRIANGLE_TOL,
                   weight_tol: float = 1e-8) -> None:
    """Raise :class:`ValidationError` on the first violated invariant."""
    d, w = space.dist, space.weights
    n = len(space.labels)
    if d.shape != (n, n):
        raise ValidationError(f"dist has shape {d.shape}, expected ({n}, {n})")
    if w.shape != (n,):
        raise ValidationError(f"weights has shape {w.shape}, expected ({n},)")
    if n == 0:
        raise ValidationError("space must contain at least one point")
    neg = np.argwhere(d < 0)
    if neg.size:
        i, j = neg[0]
        raise ValidationError(f"negative distance at ({i}, {j}): {d[i, j]}")
    asym = np.argwhere(np.abs(d - d.T) > 0)
    if asym.size:
        i, j = asym[0]
        raise ValidationError(
            f"asymmetry at ({i}, {j}): {d[i, j]} != {d[j, i]}")
    bad_diag = np.argwhere(np.diag(d) != 0)
    if bad_diag.size:
        i = int(bad_diag[0][0])
        raise ValidationError(f"nonzero diagonal at ({i}, {i}): {d[i, i]}")
    # triangle inequality: d[i,k] <= d[i,j] + d[j,k] for all i, j, k
    slack = d[:, None, :] - (d[:, :, None] + d[None, :, :])
    viol = np.argwhere(slack > triangle_tol)
    if viol.size:
        i, j, k = viol[0]
        raise ValidationError(
            f"triangle inequality violated for (i={i}, j={j}, k={k}): "
            f"d[{i},{k}]={d[i, k]} > d[{i},{j}] + d[{j},{k}]="
            f"{d[i, j] + d[j, k]}")
    if (w < 0).any():
        i = int(np.argwhere(w < 0)[0][0])
        raise ValidationError(f"negative weight at index {i}: {w[i]}")
    total = float(w.sum())
    if abs(total - 1.0) > weight_tol:
        raise ValidationError(f"weights sum to {total}, expected 1")


def load_space(source) -> MetricMeasureSpace:
    """Build a validated space from a dict, a JSON string, or a file path.

    Unknown fields trigger a warning but are otherwise ignored.  Points with
    zero weight are retained; see :attr:`MetricMeasureSpace.zero_weight_indices`.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        text = str(source)
        if text.lstrip().startswith("{"):
            doc = json.loads(text)
        else:
            with open(text) as fh:
                doc = json.load(fh)
    unknown = set(doc) - _KNOWN_FIELDS
    if unknown:
        warnings.warn(f"ignoring unknown fields: {sorted(unknown)}",
                      stacklevel=2)
    for field in ("labels", "dist", "weights"):
        if field not in doc:
            raise ValidationError(f"missing required field '{field}'")
    return MetricMeasureSpace(labels=doc["labels"],
                              dist=np.asarray(doc["dist"], dtype=float),
                              weights=np.asarray(doc["weights"], dtype=float),
                              name=str(doc.get("name", "")))


def space_to_dict(space: MetricMeasureSpace) -> dict:
    return {
        "labels": list(space.labels),
        "dist": space.dist.tolist(),
        "weights": space.weights.tolist(),
        "name": space.name,
    }


def normalize_diameter(space: MetricMeasureSpace) -> MetricMeasureSpace:
    """Rescale distances so the diameter is one; singletons pass through."""
    diam = space.diameter
    if diam <= 0:
        return space
    return MetricMeasureSpace(labels=space.labels,
                              dist=space.dist / diam,
                              weights=space.weights,
                              name=space.name,
                              scale=space.scale * diam)


def merge_coincident_points(space: MetricMeasureSpace,
                            tol: float = 0.0) -> MetricMeasureSpace:
    """Merge points at distance <= tol, summing weights.

    The distortion objective is invariant under this merge, which keeps
    empirical-measure instances small when samples repeat.
    """
    n = space.size
    group = -np.ones(n, dtype=int)
    reps = []
    for i in range(n):
        if group[i] >= 0:
            continue
        group[i] = len(reps)
        for j in range(i + 1, n):
            if group[j] < 0 and space.dist[i, j] <= tol:
                group[j] = len(reps)
        reps.append(i)
    if len(reps) == n:
        return space
    reps = np.asarray(reps)
    weights = np.zeros(len(reps))
    np.add.at(weights, group, space.weights)
    return MetricMeasureSpace(
        labels=[space.labels[i] for i in reps],
        dist=space.dist[np.ix_(reps, reps)],
        weights=weights,
        name=space.name,
        scale=space.scale)


@dataclasses.dataclass(frozen=True)
class CostTensor:
    """Pairwise distortion costs c[i, j, k, l] = |dX(i,k)^q - dY(j,l)^q|^p."""

    m: int
    n: int
    entries: np.ndarray  # shape (m, n, m, n)
    p: float
    q: float

    def __post_init__(self):
        entries = np.ascontiguousarray(np.asarray(self.entries, dtype=float))
        if entries.shape != (self.m, self.n, self.m, self.n):
            raise ValidationError(
                f"cost tensor shape {entries.shape} does not match "
                f"(m, n, m, n) = {(self.m, self.n, self.m, self.n)}")
        object.__setattr__(self, "entries", entries)
        self.entries.setflags(write=False)

    def swapped(self) -> "CostTensor":
        """Cost tensor with the roles of the two spaces exchanged."""
        return CostTensor(m=self.n, n=self.m,
                          entries=self.entries.transpose(1, 0, 3, 2),
                          p=self.p, q=self.q)


def build_cost_tensor(X: MetricMeasureSpace, Y: MetricMeasureSpace,
                      p: float, q: float) -> CostTensor:
    """Distortion costs for the L^{p,q} objective between two spaces.

    Both spaces must have diameter at most one; p, q >= 1 is required so
    the cost is Lipschitz with constant p*q in the summed metric.
    """
    if p < 1 or q < 1:
        raise ValidationError(f"exponents must satisfy p, q >= 1, got "
                              f"p={p}, q={q}")
    for name, space in (("X", X), ("Y", Y)):
        if not space.is_normalized():
            raise ValidationError(
                f"space {name} has diameter {space.diameter} > 1; "
                "normalize before building costs")
    dxq = X.dist ** q
    dyq = Y.dist ** q
    entries = np.abs(dxq[:, None, :, None] - dyq[None, :, None, :]) ** p
    return CostTensor(m=X.size, n=Y.size, entries=entries, p=p, q=q)


def lipschitz_constant(p: float, q: float) -> float:
    """Default Lipschitz bound for the cost on diameter-one spaces."""
    return p * q


@dataclasses.dataclass(frozen=True)
class Coupling:
    """A transportation plan with prescribed marginals."""

    pi: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        pi = np.ascontiguousarray(np.asarray(self.pi, dtype=float))
        mu = np.asarray(self.mu, dtype=float)
        nu = np.asarray(self.nu, dtype=float)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        if (pi < -1e-12).any():
            raise ValidationError("coupling has a negative entry")
        row_err = np.abs(pi.sum(axis=1) - mu).max()
        col_err = np.abs(pi.sum(axis=0) - nu).max()
        if max(row_err, col_err) > 1e-9:
            raise ValidationError(
                f"marginal mismatch: rows {row_err:.3e}, cols {col_err:.3e}")
        self.pi.setflags(write=False)


def product_coupling(mu, nu) -> Coupling:
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return Coupling(pi=np.outer(mu, nu), mu=mu, nu=nu)
