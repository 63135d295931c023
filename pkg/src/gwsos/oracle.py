"""Reference evaluation of the distortion infimum on tiny instances.

The coupling polytope with marginals (mu, nu) is affinely parametrized by
its upper-left (m-1) x (n-1) block, so the quadratic objective can be
minimized by dense grid search over that block followed by local
refinement.  For 2 x 2 instances the problem is a univariate quadratic on
an interval and is solved in closed form.  Intended for small m, n only;
the grid is thinned automatically when the free dimension is large.
"""

from __future__ import annotations

import dataclasses
import itertools
import warnings

import numpy as np
from scipy import optimize

from .spaces import CostTensor, MetricMeasureSpace, build_cost_tensor

GRID_POINTS = 21
_GRID_BUDGET = 5 * 10 ** 6
_TIE_TOL = 1e-12


def evaluate_objective(cost: CostTensor, pi: np.ndarray) -> float:
    """Quadratic distortion sum_{ijkl} c[i,j,k,l] pi_ij pi_kl."""
    flat = np.asarray(pi, dtype=float).ravel()
    C = cost.entries.reshape(len(flat), len(flat))
    return float(flat @ C @ flat)


@dataclasses.dataclass(frozen=True)
class OracleResult:
    value: float
    coupling: np.ndarray
    method: str
    evaluations: int


def _affine_parametrization(mu, nu):
    """pi(t) = base + sum_k t_k basis_k over the free upper-left block."""
    m, n = len(mu), len(nu)
    dim = (m - 1) * (n - 1)
    base = np.zeros((m, n))
    base[:-1, -1] = mu[:-1]
    base[-1, :] = nu - base[:-1, :].sum(axis=0)
    basis = np.zeros((dim, m, n))
    for k, (i, j) in enumerate(itertools.product(range(m - 1), range(n - 1))):
        basis[k, i, j] = 1.0
        basis[k, i, -1] = -1.0
        basis[k, -1, j] = -1.0
        basis[k, -1, -1] = 1.0
    return base, basis


def _closed_form_1d(C, base, direction):
    """Exact minimum of a univariate quadratic over the feasible segment."""
    b0, d = base.ravel(), direction.ravel()
    a = d @ C @ d
    b = 2.0 * (b0 @ C @ d)
    # feasible t range from entrywise nonnegativity of base + t*direction
    lo, hi = -np.inf, np.inf
    for bv, dv in zip(b0, d):
        if dv > 0:
            lo = max(lo, -bv / dv)
        elif dv < 0:
            hi = min(hi, -bv / dv)
        elif bv < -1e-12:
            return None
    candidates = [lo, hi]
    if a > 0:
        t_star = -b / (2 * a)
        if lo < t_star < hi:
            candidates.append(t_star)
    vals = [(b0 + t * d) @ C @ (b0 + t * d) for t in candidates]
    order = np.lexsort((candidates, vals))
    t_best = candidates[order[0]]
    return t_best


def brute_force_gw(X: MetricMeasureSpace, Y: MetricMeasureSpace,
                   p: float = 1.0, q: float = 1.0,
                   grid_points: int = GRID_POINTS,
                   refine: bool = True) -> OracleResult:
    """Minimize the distortion over all couplings by exhaustive search.

    Deterministic: ties within 1e-12 are broken toward the coupling whose
    flattened entries are lexicographically smallest.
    """
    cost = build_cost_tensor(X, Y, p, q)
    mu, nu = X.weights, Y.weights
    m, n = len(mu), len(nu)
    C = cost.entries.reshape(m * n, m * n)
    C = 0.5 * (C + C.T)
    base, basis = _affine_parametrization(mu, nu)
    dim = len(basis)

    if dim == 0:
        return OracleResult(value=evaluate_objective(cost, base),
                            coupling=base, method="unique", evaluations=1)
    if dim == 1:
        t = _closed_form_1d(C, base, basis[0])
        pi = base + t * basis[0]
        return OracleResult(value=float(pi.ravel() @ C @ pi.ravel()),
                            coupling=np.maximum(pi, 0.0),
                            method="closed_form", evaluations=3)

    pts = grid_points
    while pts > 2 and pts ** dim > _GRID_BUDGET:
        pts -= 2
    if pts != grid_points:
        warnings.warn(f"grid thinned to {pts} points per axis in "
                      f"dimension {dim}", stacklevel=2)
    axes = [np.linspace(0.0, min(mu[i], nu[j]), pts)
            for i, j in itertools.product(range(m - 1), range(n - 1))]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    T = mesh.reshape(-1, dim)
    Bmat = basis.reshape(dim, m * n)
    P = base.ravel()[None, :] + T @ Bmat
    feasible = (P >= -1e-12).all(axis=1)
    T, P = T[feasible], P[feasible]
    vals = np.einsum("np,pq,nq->n", P, C, P, optimize=True)
    order = np.argsort(vals, kind="stable")
    evaluations = len(vals)

    def objective(t):
        v = base.ravel() + Bmat.T @ t
        return float(v @ C @ v)

    def gradient(t):
        v = base.ravel() + Bmat.T @ t
        return 2.0 * (Bmat @ (C @ v))

    best_val, best_pi = np.inf, None
    starts = T[order[:10]]
    if refine:
        cons = [{"type": "ineq",
                 "fun": lambda t: base.ravel() + Bmat.T @ t,
                 "jac": lambda t: Bmat.T}]
        for t0 in starts:
            res = optimize.minimize(objective, t0, jac=gradient,
                                    constraints=cons, method="SLSQP",
                                    options={"maxiter": 200, "ftol": 1e-14})
            evaluations += res.nit
            pi_flat = np.maximum(base.ravel() + Bmat.T @ res.x, 0.0)
            val = float(pi_flat @ C @ pi_flat)
            better = val < best_val - _TIE_TOL
            tie = (abs(val - best_val) <= _TIE_TOL and best_pi is not None
                   and tuple(pi_flat) < tuple(best_pi))
            if better or tie:
                best_val, best_pi = val, pi_flat
    if best_pi is None:
        best_pi = P[order[0]]
        best_val = float(vals[order[0]])
    else:
        # grid winner may beat a refinement that stalled
        if vals[order[0]] < best_val - _TIE_TOL:
            best_val, best_pi = float(vals[order[0]]), P[order[0]]
    return OracleResult(value=best_val,
                        coupling=best_pi.reshape(m, n),
                        method="grid+slsqp" if refine else "grid",
                        evaluations=evaluations)
