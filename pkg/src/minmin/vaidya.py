"""Vaidya's cutting-plane method with volumetric-barrier Newton recentering.

The localizer is a polytope P = {x : A x >= b}.  With slacks s_i = a_i.x - b_i,
the method tracks the volumetric barrier V(x) = 0.5*logdet H(x), where
H(x) = sum_i a_i a_i^T / s_i^2, and the leverage scores
sigma_i(x) = (a_i^T H(x)^{-1} a_i) / s_i^2 (they always sum to the dimension).
Each iteration either drops the row with the smallest leverage score (when it
falls below gamma) or queries the oracle at the current volumetric center and
adds the returned cut, placed so the center keeps a fixed relative slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

from .core import Box, OracleLedger

__all__ = [
    "BarrierState",
    "DegeneratePolytopeError",
    "InfeasiblePointError",
    "NewtonStagnationError",
    "Polytope",
    "PolytopeStructureError",
    "VaidyaConfig",
    "VaidyaIteration",
    "VaidyaResult",
    "barrier_quantities",
    "newton_recenter",
    "place_cut",
    "vaidya_minimize",
    "volumetric_value",
    "write_iterations_csv",
]


class InfeasiblePointError(ValueError):
    """Barrier quantities were requested at a point with a nonpositive slack."""


class DegeneratePolytopeError(RuntimeError):
    """The barrier Hessian H(x) is numerically singular."""


class PolytopeStructureError(RuntimeError):
    """A row operation would leave fewer than d+1 constraints."""


class NewtonStagnationError(RuntimeError):
    """No feasible decreasing Newton step found; carries the current point."""

    def __init__(self, x: np.ndarray):
        super().__init__("volumetric Newton step stagnated after 60 halvings")
        self.x = np.asarray(x, dtype=float)


class Polytope:
    """Mutable constraint system ``{x : A x >= b}`` with at least d+1 rows."""

    def __init__(self, A, b):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2:
            raise ValueError("A must be a 2-d array")
        if b.ndim != 1 or b.size != A.shape[0]:
            raise ValueError("b must be 1-d with one entry per row of A")
        if A.shape[0] < A.shape[1] + 1:
            raise PolytopeStructureError(
                f"need at least d+1={A.shape[1] + 1} rows, got {A.shape[0]}"
            )
        self._A = A.copy()
        self._b = b.copy()

    @classmethod
    def from_box(cls, box: Box) -> "Polytope":
        """Initial localizer: the 2d facet rows of an axis-aligned box."""
        d = box.dim
        eye = np.eye(d)
        A = np.vstack([eye, -eye])
        b = np.concatenate([box.lower, -box.upper])
        return cls(A, b)

    @property
    def A(self) -> np.ndarray:
        return self._A

    @property
    def b(self) -> np.ndarray:
        return self._b

    @property
    def num_rows(self) -> int:
        return self._A.shape[0]

    @property
    def dim(self) -> int:
        return self._A.shape[1]

    def slacks(self, x) -> np.ndarray:
        return self._A @ np.asarray(x, dtype=float) - self._b

    def add_row(self, a, beta: float) -> None:
        a = np.asarray(a, dtype=float)
        if a.shape != (self.dim,):
            raise ValueError(f"row must have shape ({self.dim},)")
        self._A = np.vstack([self._A, a])
        self._b = np.append(self._b, float(beta))

    def drop_row(self, index: int) -> None:
        if self.num_rows - 1 < self.dim + 1:
            raise PolytopeStructureError(
                f"dropping row {index} would leave {self.num_rows - 1} < d+1 rows"
            )
        keep = np.arange(self.num_rows) != index
        self._A = self._A[keep]
        self._b = self._b[keep]


@dataclass
class BarrierState:
    """Volumetric-barrier quantities at an interior point.

    ``chol`` is the lower Cholesky factor of H; ``value`` is 0.5*logdet H.
    """

    x: np.ndarray
    slacks: np.ndarray
    H: np.ndarray
    chol: np.ndarray
    sigma: np.ndarray
    grad: np.ndarray
    Q: np.ndarray
    value: float

    @property
    def min_sigma(self) -> float:
        return float(np.min(self.sigma))

    @property
    def sigma_sum(self) -> float:
        return float(np.sum(self.sigma))

    def hinv_quad(self, c) -> float:
        """Quadratic form c^T H^{-1} c via the cached Cholesky factor."""
        w = solve_triangular(self.chol, np.asarray(c, dtype=float), lower=True)
        return float(w @ w)


@dataclass(frozen=True)
class VaidyaConfig:
    gamma: float = 0.006
    newton_tolerance: float = 1e-8
    max_newton_steps: int = 80
    max_iterations: int = 500

    def __post_init__(self):
        if self.gamma < 0.006:
            raise ValueError("gamma must be at least 0.006")
        if self.newton_tolerance <= 0:
            raise ValueError("newton_tolerance must be positive")
        if self.max_newton_steps < 1 or self.max_iterations < 1:
            raise ValueError("iteration limits must be positive")


def barrier_quantities(poly: Polytope, x, ledger: OracleLedger | None = None) -> BarrierState:
    """Slacks, H, leverage scores, volumetric gradient and Q at interior x.

    Performs exactly one d-by-d factorization (charged to the ledger); the
    leverage scores come from per-row triangular solves against that factor.
    """
    x = np.asarray(x, dtype=float)
    s = poly.slacks(x)
    if np.any(s <= 0):
        raise InfeasiblePointError("point is not strictly interior to the polytope")
    W = poly.A / s[:, None]  # rows a_i / s_i
    H = W.T @ W
    try:
        chol = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise DegeneratePolytopeError("barrier Hessian is singular") from exc
    if ledger is not None:
        ledger.add_inversion()
    V = solve_triangular(chol, W.T, lower=True)  # columns L^{-1} a_i / s_i
    sigma = np.einsum("ij,ij->j", V, V)
    grad = -(W.T @ sigma)
    Q = (W * sigma[:, None]).T @ W
    value = float(np.sum(np.log(np.diag(chol))))
    return BarrierState(x=x.copy(), slacks=s, H=H, chol=chol, sigma=sigma, grad=grad, Q=Q, value=value)


def volumetric_value(poly: Polytope, x) -> float:
    """0.5*logdet H(x); +inf outside the interior (handy for line searches)."""
    s = poly.slacks(x)
    if np.any(s <= 0):
        return math.inf
    W = poly.A / s[:, None]
    H = W.T @ W
    try:
        chol = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return math.inf
    return float(np.sum(np.log(np.diag(chol))))


def place_cut(hinv_quad: float, x, c, gamma: float) -> float:
    """Offset beta for a new cut c.x >= beta through the current center's slack.

    beta solves c^T H^{-1} c / (x.c - beta)^2 = sqrt(gamma)/5, taking the root
    that keeps x strictly feasible.  Scaling c scales the slack linearly.
    """
    if hinv_quad <= 0:
        raise ValueError("c^T H^{-1} c must be positive (zero subgradient means optimality)")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    return float(x @ c) - math.sqrt(5.0 * hinv_quad / math.sqrt(gamma))


# Below this Newton decrement the barrier decrease per step sits under the
# float64 resolution of logdet, so a failed line search means "centered".
_STAGNATION_DECREMENT = 1e-5


def _recenter(
    poly: Polytope,
    x_start,
    config: VaidyaConfig,
    ledger: OracleLedger | None,
) -> tuple[np.ndarray, BarrierState, int]:
    """Damped Newton descent on the volumetric barrier; returns final state."""
    x = np.asarray(x_start, dtype=float).copy()
    state = barrier_quantities(poly, x, ledger)
    solves = 1
    for _ in range(config.max_newton_steps):
        try:
            direction = np.linalg.solve(state.Q, state.grad)
        except np.linalg.LinAlgError as exc:
            raise DegeneratePolytopeError("barrier metric Q is singular") from exc
        squared = max(float(state.grad @ direction), 0.0)
        decrement = math.sqrt(squared)
        if decrement <= config.newton_tolerance:
            break
        t = 1.0
        candidate = None
        for _ in range(60):
            trial = x - t * direction
            if volumetric_value(poly, trial) <= state.value - 0.25 * t * squared:
                candidate = trial
                break
            t *= 0.5
        if candidate is None:
            if decrement <= _STAGNATION_DECREMENT:
                break
            raise NewtonStagnationError(x)
        x = candidate
        previous_value = state.value
        state = barrier_quantities(poly, x, ledger)
        solves += 1
        # Per-step progress at the rounding floor: further steps only churn.
        if previous_value - state.value <= 1e-13 * (1.0 + abs(state.value)):
            break
    return x, state, solves


def newton_recenter(poly: Polytope, x_start, config: VaidyaConfig, ledger: OracleLedger | None = None) -> np.ndarray:
    """Move an interior ``x_start`` to the volumetric center of ``poly``."""
    x, _, _ = _recenter(poly, x_start, config, ledger)
    return x


@dataclass(frozen=True)
class VaidyaIteration:
    """One outer step: either a row drop or an added cut at the center."""

    k: int
    m_rows: int
    min_sigma: float
    sigma_sum: float
    action: str  # 'add' | 'drop' | 'stop'
    best_value: float
    x: np.ndarray
    min_slack: float
    barrier_solves: int
    oracle_value: float | None = None
    feasible_query: bool | None = None


@dataclass
class VaidyaResult:
    x: np.ndarray
    best_value: float
    iterations: list[VaidyaIteration] = field(default_factory=list)
    oracle_calls: int = 0
    stop_reason: str = "max_iterations"


def write_iterations_csv(iterations, target) -> None:
    """Per-iteration dump: ``k,m_rows,min_sigma,action,f_best`` (LF, UTF-8)."""
    lines = ["k,m_rows,min_sigma,action,f_best"]
    for it in iterations:
        lines.append(f"{it.k},{it.m_rows},{it.min_sigma!r},{it.action},{it.best_value!r}")
    text = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8", newline="")


def vaidya_minimize(
    oracle: Callable[[np.ndarray], tuple[float, np.ndarray]],
    dim: int,
    region,
    config: VaidyaConfig | None = None,
    ledger: OracleLedger | None = None,
    stop_condition: Callable[[], bool] | None = None,
) -> VaidyaResult:
    """Minimize a convex function over ``region`` using subgradient cuts.

    ``oracle(x)`` must return ``(value, g)`` with ``g`` a (delta-)subgradient at
    a feasible ``x``; the cut direction used internally is ``-g`` so that the
    sublevel set is kept.  When the center leaves ``region``, a separating
    hyperplane for the region is added instead of an oracle cut, so the oracle
    is only ever queried at feasible points.  The best feasible query point by
    reported value is returned.
    """
    config = config or VaidyaConfig()
    if region.dim != dim:
        raise ValueError(f"region dimension {region.dim} != dim {dim}")
    box = region.bounding_box()
    poly = Polytope.from_box(box)
    x = box.center
    best_x: np.ndarray | None = None
    best_value = math.inf
    oracle_calls = 0
    iterations: list[VaidyaIteration] = []
    stop_reason = "max_iterations"

    for k in range(config.max_iterations):
        if stop_condition is not None and stop_condition():
            stop_reason = "stop_condition"
            break
        x, state, solves = _recenter(poly, x, config, ledger)
        min_index = int(np.argmin(state.sigma))  # lowest index wins ties
        record = dict(
            k=k,
            m_rows=poly.num_rows,
            min_sigma=float(state.sigma[min_index]),
            sigma_sum=state.sigma_sum,
            x=x.copy(),
            min_slack=float(np.min(state.slacks)),
            barrier_solves=solves,
        )
        if state.sigma[min_index] < config.gamma:
            poly.drop_row(min_index)
            iterations.append(VaidyaIteration(action="drop", best_value=best_value, **record))
            continue
        if region.contains(x, tol=1e-12):
            value, g = oracle(x)
            oracle_calls += 1
            g = np.asarray(g, dtype=float)
            value = float(value)
            if value < best_value:
                best_value = value
                best_x = x.copy()
            if float(np.linalg.norm(g)) == 0.0:
                iterations.append(
                    VaidyaIteration(
                        action="stop", best_value=best_value, oracle_value=value,
                        feasible_query=True, **record,
                    )
                )
                stop_reason = "zero_subgradient"
                break
            c = -g
            oracle_value: float | None = value
            feasible = True
        else:
            projected = region.project(x)
            offset = projected - x
            c = offset / float(np.linalg.norm(offset))
            oracle_value = None
            feasible = False
        beta = place_cut(state.hinv_quad(c), x, c, config.gamma)
        poly.add_row(c, beta)
        iterations.append(
            VaidyaIteration(
                action="add", best_value=best_value, oracle_value=oracle_value,
                feasible_query=feasible, **record,
            )
        )

    if best_x is None:
        best_x = x.copy()
    return VaidyaResult(
        x=best_x,
        best_value=best_value,
        iterations=iterations,
        oracle_calls=oracle_calls,
        stop_reason=stop_reason,
    )
