"""Solvability criterion: probe points, directions, and the measurement sweep.

Unique reconstructability of a coefficient vector in the box [a, b]^n from
the measurement matrix is certified by finitely many directional-derivative
checks. For every component j and ladder index k, a probe point is placed
at a/2 in all off-j components and walks a uniform ladder in component j;
the probe direction pushes the off-j components up hard and component j
slightly down:

    z_{j,k} = (a/2) * e_j' + (a + k * a / (4 (n-1))) * e_j,  k = 2..k_max,
    d_j     = ((2 b - a) / a) * (n - 1) * e_j' - (1/2) * e_j,

where e_j' is the all-ones vector with the j-th entry zeroed. If every
matrix  D'(z_{j,k}) d_j  has a positive eigenvalue, the smallest such
largest-eigenvalue, called ``lam`` here, certifies: unique solvability,
minimality of the true coefficients for the convex program, and the noisy
error radius 2 * delta * (n-1) / lam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fem import DiscreteForwardMap, Geometry, assemble
from .symmat import SymMatrix, lambda_max
from .validation import as_coefficient_vector

__all__ = [
    "BoxBounds",
    "CriterionData",
    "MeasurementSweep",
    "probe_step_count",
    "closed_form_step_count",
    "probe_points",
    "evaluate_criterion",
    "find_sufficient_m",
    "converse_monotonicity_check",
]

# Smallest lam treated as a numerically meaningful certificate; below this
# the noisy error radius 2*delta*(n-1)/lam is useless in practice.
LAMBDA_FLOOR = 1e-8


@dataclass(frozen=True)
class BoxBounds:
    """A-priori box [a, b]^n for the unknown coefficients, 0 < a <= b, n >= 2."""

    a: float
    b: float
    n: int

    def __post_init__(self) -> None:
        if not (0.0 < self.a <= self.b) or not math.isfinite(self.b):
            raise ValueError(f"bounds must satisfy 0 < a <= b, got a={self.a}, b={self.b}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n", int(self.n))

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.a - tol) and np.all(x <= self.b + tol))


@dataclass(frozen=True, eq=False)
class CriterionData:
    """Probe points, directions, and (once evaluated) their eigenvalues.

    Keys of ``points`` and ``eigenvalues`` are (j, k) with component index
    j in 1..n and ladder index k in 2..k_max; ``directions[j - 1]`` is the
    probe direction for component j. ``lam`` is the minimum over all stored
    eigenvalues; the criterion is fulfilled iff lam > 0.
    """

    k_max: int
    points: dict[tuple[int, int], np.ndarray]
    directions: tuple[np.ndarray, ...]
    eigenvalues: dict[tuple[int, int], float] | None = None
    lam: float | None = None

    def fulfilled(self, floor: float = 0.0) -> bool:
        if self.lam is None:
            raise ValueError("criterion has not been evaluated yet")
        return self.lam > floor


@dataclass(frozen=True, eq=False)
class MeasurementSweep:
    """Outcome of the incremental search for a sufficient current count.

    ``history[i]`` is the criterion value lam obtained with m = i + 1
    currents; it is non-decreasing in m. When ``satisfied`` is False, ``m``
    is the largest count tried and ``data`` carries the best lam found,
    never a silent success.
    """

    satisfied: bool
    m: int
    data: CriterionData
    lambda_floor: float
    history: tuple[float, ...]


def probe_step_count(bounds: BoxBounds) -> int:
    """Largest ladder index k_max, the smallest value >= 2 for which the
    probe ladder reaches past the upper bound:

        a + k_max * a / (4 (n-1)) >= b + a / (4 (n-1)),

    i.e. k_max = max(2, ceil(4 (n-1) (b-a) / a) + 1). See
    :func:`closed_form_step_count` for the alternative closed form and why
    it is not used.
    """
    steps = math.ceil(4.0 * (bounds.n - 1) * (bounds.b - bounds.a) / bounds.a) + 1
    return max(2, steps)


def closed_form_step_count(bounds: BoxBounds) -> int:
    """Alternative closed-form ladder count ceil(4 (n-1) b / a) - 4 n - 3.

    This expression drops below 2 for small n and b/a (for example n=2,
    b/a=2 gives -3), which would leave the probe set empty, so
    :func:`probe_step_count` derives the count from the covering
    inequality instead. Both values are reported side by side in criterion
    reports for transparency.
    """
    return math.ceil(4.0 * (bounds.n - 1) * bounds.b / bounds.a) - 4 * bounds.n - 3


def probe_points(bounds: BoxBounds) -> CriterionData:
    """Build all probe points and directions; eigenvalues left unset."""
    a, b, n = bounds.a, bounds.b, bounds.n
    k_max = probe_step_count(bounds)
    step = a / (4.0 * (n - 1))

    points: dict[tuple[int, int], np.ndarray] = {}
    directions = []
    for j in range(1, n + 1):
        direction = np.full(n, (2.0 * b - a) / a * (n - 1))
        direction[j - 1] = -0.5
        direction.setflags(write=False)
        directions.append(direction)
        for k in range(2, k_max + 1):
            z = np.full(n, a / 2.0)
            z[j - 1] = a + k * step
            z.setflags(write=False)
            points[(j, k)] = z
    return CriterionData(k_max=k_max, points=points, directions=tuple(directions))


def evaluate_criterion(fmap: DiscreteForwardMap, bounds: BoxBounds) -> CriterionData:
    """Evaluate the largest eigenvalue of every probe derivative matrix.

    The probe evaluations are independent of each other; lam is their
    minimum, so the result does not depend on evaluation order.
    """
    if fmap.n_arcs != bounds.n:
        raise ValueError(
            f"forward map has {fmap.n_arcs} arcs but bounds expect n={bounds.n}"
        )
    data = probe_points(bounds)
    eigenvalues = {
        (j, k): lambda_max(fmap.directional_derivative(z, data.directions[j - 1]))
        for (j, k), z in data.points.items()
    }
    lam = min(eigenvalues.values())
    return CriterionData(
        k_max=data.k_max,
        points=data.points,
        directions=data.directions,
        eigenvalues=eigenvalues,
        lam=lam,
    )


def find_sufficient_m(
    geometry: Geometry,
    bounds: BoxBounds,
    mesh_size: float,
    m_max: int,
    lambda_floor: float = LAMBDA_FLOOR,
) -> MeasurementSweep:
    """Smallest current count m <= m_max whose criterion value exceeds
    ``lambda_floor``, by a monotone sweep m = 1, 2, 3, ...

    Adding a current appends one row and column to every measurement
    matrix, so each probe derivative at m currents is the leading m-by-m
    block of the matrix at m_max currents; the sweep therefore assembles
    once at m_max and restricts, which is exactly equivalent to assembling
    at each m separately.
    """
    if not isinstance(m_max, (int, np.integer)) or m_max < 1:
        raise ValueError(f"m_max must be an integer >= 1, got {m_max!r}")
    if geometry.n_arcs != bounds.n:
        raise ValueError(
            f"geometry has {geometry.n_arcs} arcs but bounds expect n={bounds.n}"
        )

    fmap = assemble(geometry, mesh_size, int(m_max))
    skeleton = probe_points(bounds)
    full: dict[tuple[int, int], SymMatrix] = {
        key: fmap.directional_derivative(z, skeleton.directions[key[0] - 1])
        for key, z in skeleton.points.items()
    }

    history: list[float] = []
    for m in range(1, int(m_max) + 1):
        eigenvalues = {key: lambda_max(mat.leading_block(m)) for key, mat in full.items()}
        lam = min(eigenvalues.values())
        history.append(lam)
        if lam > lambda_floor:
            data = CriterionData(
                k_max=skeleton.k_max,
                points=skeleton.points,
                directions=skeleton.directions,
                eigenvalues=eigenvalues,
                lam=lam,
            )
            return MeasurementSweep(True, m, data, lambda_floor, tuple(history))

    eigenvalues = {key: lambda_max(mat) for key, mat in full.items()}
    data = CriterionData(
        k_max=skeleton.k_max,
        points=skeleton.points,
        directions=skeleton.directions,
        eigenvalues=eigenvalues,
        lam=min(eigenvalues.values()),
    )
    return MeasurementSweep(False, int(m_max), data, lambda_floor, tuple(history))


def converse_monotonicity_check(
    fmap: DiscreteForwardMap,
    bounds: BoxBounds,
    x,
    y,
    lam: float,
) -> bool:
    """Check one instance of the converse-monotonicity implication.

    With a verified criterion value lam > 0, whenever

        lambda_max(D(y) - D(x)) < lam * ||y - x||_inf / (n - 1)

    the component sums must satisfy sum(y) > sum(x). Returns True when the
    implication holds for this pair, which includes the vacuous case of the
    hypothesis failing; ||y - x||_inf = 0 is vacuous because the strict
    inequality cannot hold at 0.
    """
    if not lam > 0.0:
        raise ValueError(f"lam must be positive, got {lam!r}")
    x = as_coefficient_vector(x, bounds.n, name="x")
    y = as_coefficient_vector(y, bounds.n, name="y")
    for name, vec in (("x", x), ("y", y)):
        if not bounds.contains(vec):
            raise ValueError(f"{name} must lie in [a, b]^n")

    gap = float(np.max(np.abs(y - x)))
    if gap == 0.0:
        return True
    diff = fmap.measurements(y) - fmap.measurements(x)
    hypothesis = lambda_max(diff) < lam * gap / (bounds.n - 1)
    if not hypothesis:
        return True
    return float(np.sum(y - x)) > 0.0
