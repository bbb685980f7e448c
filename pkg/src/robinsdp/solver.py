"""Log-barrier path-following solver for the coefficient recovery programs.

The reconstruction programs minimize the component sum of the coefficient
vector over the box [a, b]^n subject to the matrix constraint

    measurements(x)  <=_Loewner  target,

where target is the measured matrix for exact data, or the noisy matrix
plus delta times the identity for data with spectral-norm noise level
delta. The constraint function is matrix-convex and the objective linear,
so the program is convex; it is solved by following the central path of

    phi_mu(x) = sum_j x_j - mu * [ log det(target - measurements(x))
                                   + sum_j log(x_j - a)
                                   + sum_j log(b - x_j) ]

with damped Newton centering and mu reduced geometrically until
mu * (m + 2 n) falls below the objective tolerance. Monotonicity of the
measurement map makes x = b * ones the most feasible box point, so it
serves as the canonical feasibility probe and (shifted inward) as the
start of the path.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .criterion import BoxBounds, CriterionData
from .fem import DiscreteForwardMap
from .symmat import SymMatrix, as_sym_matrix, lambda_max
from .validation import as_coefficient_vector

__all__ = [
    "SolverOptions",
    "SdpProblem",
    "StageRecord",
    "ReconstructionResult",
    "InfeasibleProblemError",
    "ConvergenceError",
    "solve",
    "solve_noisy",
    "brute_force_minimize",
]

DEFAULT_FEAS_TOL = 1e-9
_ARMIJO = 1e-4
_MIN_STEP = 1e-14


class InfeasibleProblemError(RuntimeError):
    """Even the most feasible box point violates the matrix constraint."""

    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


class ConvergenceError(RuntimeError):
    """Newton centering failed at the final barrier stage; carries the best
    iterate found as ``result``."""

    def __init__(self, message: str, result: "ReconstructionResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class SolverOptions:
    """Tunable tolerances of the barrier solver.

    ``opt_tol`` is the absolute objective tolerance; None resolves to
    1e-7 * n * b. ``start_shift`` is the relative inward shift of the
    upper-corner start; exposed so that independent starting points can be
    compared.
    """

    opt_tol: float | None = None
    feas_tol: float = DEFAULT_FEAS_TOL
    max_newton: int = 50
    mu_factor: float = 0.2
    mu_start: float = 1.0
    # Centering stops at decrement max(newton_tol, 0.1 * sqrt(mu)): the
    # mu-scaled term is a fixed decrement in the self-concordant scaling of
    # the stage barrier (path following tolerates 0.25), the absolute floor
    # keeps early stages tight.
    newton_tol: float = 1e-6
    start_shift: float = 1e-3

    def __post_init__(self) -> None:
        if self.opt_tol is not None and self.opt_tol <= 0:
            raise ValueError("opt_tol must be positive")
        if self.feas_tol < 0:
            raise ValueError("feas_tol must be nonnegative")
        if self.max_newton < 1:
            raise ValueError("max_newton must be at least 1")
        if not 0.0 < self.mu_factor < 1.0:
            raise ValueError("mu_factor must lie in (0, 1)")
        if self.mu_start <= 0:
            raise ValueError("mu_start must be positive")
        if not 0.0 < self.start_shift < 1.0:
            raise ValueError("start_shift must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """One reconstruction instance: forward map, box bounds, target matrix.

    ``slack_added`` records the delta already folded into the target for
    noisy data (0 for exact data); informational only.
    """

    forward: DiscreteForwardMap
    bounds: BoxBounds
    target: SymMatrix
    slack_added: float = 0.0

    def __post_init__(self) -> None:
        if self.target.dim != self.forward.num_currents:
            raise ValueError(
                f"target dim {self.target.dim} does not match "
                f"{self.forward.num_currents} currents"
            )
        if self.forward.n_arcs != self.bounds.n:
            raise ValueError(
                f"forward map has {self.forward.n_arcs} arcs but bounds expect n={self.bounds.n}"
            )
        if self.slack_added < 0:
            raise ValueError("slack_added must be nonnegative")


@dataclass(frozen=True)
class StageRecord:
    """State after centering one barrier stage."""

    stage: int
    mu: float
    objective: float
    margin: float
    newton_steps: int


@dataclass(frozen=True)
class ReconstructionResult:
    minimizer: np.ndarray
    objective: float
    constraint_margin: float
    iterations: int
    certified_error_radius: float | None
    trace: tuple[StageRecord, ...]


class _Point:
    """Forward state at one coefficient vector: solution block W, the
    residual matrix S = target - measurements(x) eigendecomposed, and the
    coordinate partial matrices (built lazily)."""

    __slots__ = ("x", "w_block", "meas", "eigs", "vecs", "_partials", "_fmap")

    def __init__(self, fmap: DiscreteForwardMap, target: np.ndarray, x: np.ndarray):
        self.x = x
        self._fmap = fmap
        self.w_block = fmap.solution(x)
        self.meas = fmap.load_map.T @ self.w_block
        self.meas = 0.5 * (self.meas + self.meas.T)
        s = target - self.meas
        self.eigs, self.vecs = np.linalg.eigh(s)
        self._partials = None

    @property
    def margin(self) -> float:
        """Smallest eigenvalue of target - measurements(x); positive iff
        strictly feasible."""
        return float(self.eigs[0])

    def partials(self) -> list[np.ndarray]:
        if self._partials is None:
            w = self.w_block
            self._partials = [
                -(w.T @ (mass @ w)) for mass in self._fmap.interface_mass
            ]
        return self._partials


def solve(problem: SdpProblem, options: SolverOptions | None = None) -> ReconstructionResult:
    """Minimize the coefficient sum subject to the box and the matrix
    constraint measurements(x) <= target.

    Returns a strictly feasible minimizer whose objective is within the
    resolved ``opt_tol`` of the optimum. Raises
    :class:`InfeasibleProblemError` when even x = b * ones violates the
    constraint beyond ``feas_tol``, and :class:`ConvergenceError` when the
    final centering stage fails.
    """
    opts = options or SolverOptions()
    fmap, bounds = problem.forward, problem.bounds
    a, b, n = bounds.a, bounds.b, bounds.n
    m = problem.target.dim
    target = problem.target.entries
    opt_tol = opts.opt_tol if opts.opt_tol is not None else 1e-7 * n * b

    def result_at(point: _Point, iterations: int, trace: list[StageRecord]) -> ReconstructionResult:
        return ReconstructionResult(
            minimizer=point.x.copy(),
            objective=float(point.x.sum()),
            constraint_margin=point.margin,
            iterations=iterations,
            certified_error_radius=None,
            trace=tuple(trace),
        )

    corner = _Point(fmap, target, np.full(n, b))
    if -corner.margin > opts.feas_tol:
        raise InfeasibleProblemError(
            "infeasible: the most feasible box point violates the matrix "
            f"constraint by {-corner.margin:.3e} (feas_tol {opts.feas_tol:.1e})",
            margin=corner.margin,
        )

    point = None
    if b > a and corner.margin > 0.0:
        point = _strictly_interior_start(fmap, target, bounds, opts)
    if point is None:
        # Degenerate box, corner feasible only within tolerance, or no
        # strictly interior point near it: the corner is the answer.
        record = StageRecord(0, 0.0, float(corner.x.sum()), corner.margin, 0)
        return result_at(corner, 0, [record])
    mu = opts.mu_start
    trace: list[StageRecord] = []
    total_steps = 0
    stage = 0
    while True:
        point, steps, centered = _center(fmap, target, bounds, point, mu, opts)
        total_steps += steps
        trace.append(StageRecord(stage, mu, float(point.x.sum()), point.margin, steps))
        # m + 2n is the barrier parameter of the constraint set (log det
        # block plus box), bounding the suboptimality at the stage center.
        if mu * (m + 2 * n) < opt_tol:
            break
        mu *= opts.mu_factor
        stage += 1

    if not centered:
        raise ConvergenceError(
            f"Newton centering did not converge at the final stage (mu={mu:.3e})",
            result=result_at(point, total_steps, trace),
        )
    return result_at(point, total_steps, trace)


def solve_noisy(
    fmap: DiscreteForwardMap,
    bounds: BoxBounds,
    y_delta,
    delta: float,
    criterion: CriterionData,
    options: SolverOptions | None = None,
) -> ReconstructionResult:
    """Solve the noisy program with target y_delta + delta * I and attach
    the certified error radius 2 * delta * (n - 1) / lam.

    Requires an evaluated criterion with lam > 0; with delta = 0 the
    program coincides with the exact-data one.
    """
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta!r}")
    if criterion.lam is None or not criterion.lam > 0.0:
        raise ValueError("criterion must be evaluated with lam > 0 to certify the result")
    y_delta = as_sym_matrix(y_delta)
    target = y_delta + float(delta) * SymMatrix.identity(y_delta.dim)
    problem = SdpProblem(forward=fmap, bounds=bounds, target=target, slack_added=float(delta))
    result = solve(problem, options)
    radius = 2.0 * float(delta) * (bounds.n - 1) / criterion.lam
    return replace(result, certified_error_radius=radius)


# Grid measurement caches for the brute-force oracle, keyed per forward map.
_GRID_CACHE: "weakref.WeakKeyDictionary[DiscreteForwardMap, dict]" = weakref.WeakKeyDictionary()


def brute_force_minimize(
    fmap: DiscreteForwardMap,
    bounds: BoxBounds,
    target,
    grid_points: int,
    feas_tol: float = DEFAULT_FEAS_TOL,
) -> np.ndarray | None:
    """Exhaustive minimizer over a uniform grid on [a, b]^n; test oracle.

    Returns the grid point with the smallest component sum among those with
    lambda_max(measurements(x) - target) <= feas_tol, or None when no grid
    point is feasible. Ties break to the lexicographically first point.
    Restricted to n <= 3; grid measurements are cached per forward map.
    """
    if bounds.n > 3:
        raise ValueError("brute force search is limited to n <= 3")
    if not isinstance(grid_points, (int, np.integer)) or grid_points < 2:
        raise ValueError(f"grid_points must be an integer >= 2, got {grid_points!r}")
    target = as_sym_matrix(target)
    if target.dim != fmap.num_currents:
        raise ValueError("target dimension does not match the forward map")

    key = (bounds.a, bounds.b, bounds.n, int(grid_points), fmap.num_currents)
    cache = _GRID_CACHE.setdefault(fmap, {})
    if key not in cache:
        axis = np.linspace(bounds.a, bounds.b, int(grid_points))
        grid = [np.array(p) for p in product(axis, repeat=bounds.n)]
        cache[key] = [(p, fmap.measurements(p).entries) for p in grid]

    best_point = None
    best_sum = np.inf
    for point, meas in cache[key]:
        if lambda_max(SymMatrix(meas - target.entries)) > feas_tol:
            continue
        total = float(point.sum())
        if total < best_sum - 1e-15:
            best_sum = total
            best_point = point
    return None if best_point is None else best_point.copy()


def _strictly_interior_start(
    fmap: DiscreteForwardMap,
    target: np.ndarray,
    bounds: BoxBounds,
    opts: SolverOptions,
) -> _Point | None:
    """Shift the feasible upper corner into the open box, shrinking the
    shift until the matrix constraint stays strictly satisfied; None when
    the strict interior is numerically empty next to the corner."""
    shift = opts.start_shift
    while shift > 1e-13:
        x0 = np.full(bounds.n, bounds.b - shift * (bounds.b - bounds.a))
        point = _Point(fmap, target, x0)
        if point.margin > 0.0:
            return point
        shift *= 0.1
    return None


def _barrier_value(point: _Point, bounds: BoxBounds, mu: float) -> float:
    box_lo = point.x - bounds.a
    box_hi = bounds.b - point.x
    if point.eigs[0] <= 0.0 or np.any(box_lo <= 0.0) or np.any(box_hi <= 0.0):
        return np.inf
    # Eigenvalues are clipped only inside the log; steps with nonpositive
    # eigenvalues were already rejected above.
    logs = np.log(np.clip(point.eigs, 1e-300, None)).sum()
    return float(point.x.sum() - mu * (logs + np.log(box_lo).sum() + np.log(box_hi).sum()))


def _gradient(point: _Point, bounds: BoxBounds, mu: float) -> np.ndarray:
    s_inv = (point.vecs / point.eigs) @ point.vecs.T
    traces = np.array([np.sum(s_inv * p) for p in point.partials()])
    return 1.0 + mu * traces - mu / (point.x - bounds.a) + mu / (bounds.b - point.x)


def _fd_steps(point: _Point, bounds: BoxBounds) -> np.ndarray:
    """Finite-difference steps for the Hessian: small against the box and
    against the distance to the matrix-constraint boundary."""
    base = 1e-6 * (bounds.b - bounds.a)
    box = 0.25 * np.minimum(point.x - bounds.a, bounds.b - point.x)
    steps = np.minimum(base, box)
    margin = point.margin
    for j, partial in enumerate(point.partials()):
        scale = float(np.abs(partial).max())
        if scale > 0.0:
            steps[j] = min(steps[j], 0.25 * margin / scale)
    return np.maximum(steps, 1e-13)


def _hessian(
    fmap: DiscreteForwardMap,
    target: np.ndarray,
    point: _Point,
    bounds: BoxBounds,
    mu: float,
) -> np.ndarray:
    n = bounds.n
    steps = _fd_steps(point, bounds)
    hess = np.empty((n, n))
    for j in range(n):
        h = steps[j]
        for _ in range(6):
            xp = point.x.copy()
            xp[j] += h
            xm = point.x.copy()
            xm[j] -= h
            plus = _Point(fmap, target, xp)
            minus = _Point(fmap, target, xm)
            if plus.margin > 0.0 and minus.margin > 0.0:
                break
            h *= 0.25
        hess[j] = (_gradient(plus, bounds, mu) - _gradient(minus, bounds, mu)) / (2.0 * h)
    return 0.5 * (hess + hess.T)


def _newton_direction(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    ridge = 0.0
    scale = float(np.abs(hess).max()) or 1.0
    for _ in range(16):
        try:
            np.linalg.cholesky(hess + ridge * np.eye(hess.shape[0]))
        except np.linalg.LinAlgError:
            ridge = max(ridge * 100.0, 1e-14 * scale)
            continue
        return np.linalg.solve(hess + ridge * np.eye(hess.shape[0]), -grad)
    # Hopeless curvature; fall back to scaled steepest descent.
    return -grad / scale


def _stage_tolerance(mu: float, opts: SolverOptions) -> float:
    return max(opts.newton_tol, 0.1 * np.sqrt(mu))


def _center(
    fmap: DiscreteForwardMap,
    target: np.ndarray,
    bounds: BoxBounds,
    point: _Point,
    mu: float,
    opts: SolverOptions,
) -> tuple[_Point, int, bool]:
    """Damped Newton minimization of phi_mu from ``point``. Returns the new
    point, the Newton steps taken, and whether the decrement tolerance was
    reached."""
    tol = _stage_tolerance(mu, opts)
    steps = 0
    slow_steps = 0
    while steps < opts.max_newton:
        grad = _gradient(point, bounds, mu)
        hess = _hessian(fmap, target, point, bounds, mu)
        direction = _newton_direction(hess, grad)
        slope = float(grad @ direction)
        if slope >= 0.0:
            direction = -grad
            slope = float(grad @ direction)
        decrement = np.sqrt(max(-slope, 0.0))
        if decrement <= tol:
            return point, steps, True

        phi = _barrier_value(point, bounds, mu)
        alpha = 1.0
        moved = None
        while alpha >= _MIN_STEP:
            x_try = point.x + alpha * direction
            if np.all(x_try > bounds.a) and np.all(x_try < bounds.b):
                trial = _Point(fmap, target, x_try)
                if trial.margin > 0.0 and _barrier_value(
                    trial, bounds, mu
                ) <= phi + _ARMIJO * alpha * slope:
                    moved = trial
                    break
            alpha *= 0.5
        stagnated = moved is not None and np.all(
            np.abs(moved.x - point.x) <= 1e-14 * np.maximum(1.0, np.abs(point.x))
        )
        if moved is not None:
            drop = phi - _barrier_value(moved, bounds, mu)
            slow_steps = slow_steps + 1 if drop <= 1e-10 * max(1.0, abs(phi)) else 0
        if moved is None or stagnated or slow_steps >= 3:
            # At the resolution limit of the barrier value; accept the point
            # if the decrement is within a safety factor of the tolerance.
            point = point if moved is None else moved
            return point, steps, decrement <= 100.0 * tol
        point = moved
        steps += 1

    grad = _gradient(point, bounds, mu)
    hess = _hessian(fmap, target, point, bounds, mu)
    direction = _newton_direction(hess, grad)
    decrement = np.sqrt(max(-float(grad @ direction), 0.0))
    return point, steps, decrement <= tol
