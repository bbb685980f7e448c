"""Scikit-learn style estimator facade over the reconstruction pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .criterion import LAMBDA_FLOOR, BoxBounds, evaluate_criterion
from .fem import assemble, build_disk_geometry
from .solver import SdpProblem, SolverOptions, solve, solve_noisy
from .symmat import SymMatrix
from .validation import symmetric_measurement

__all__ = ["RobinReconstructor", "CriterionNotMetError"]


class CriterionNotMetError(RuntimeError):
    """The solvability criterion failed for the configured setup; carries
    the best criterion value as ``lam``."""

    def __init__(self, message: str, lam: float):
        super().__init__(message)
        self.lam = lam


class RobinReconstructor(BaseEstimator):
    """Recover a piecewise-constant Robin transmission coefficient from one
    symmetric matrix of boundary measurements.

    The estimator owns the geometry and discretization (unit disk with a
    concentric circular interface split into ``n_arcs`` equal arcs) and the
    a-priori coefficient box [lower, upper]^n_arcs. ``fit`` takes the
    measured matrix, optionally verifies the solvability criterion for the
    given number of currents, and solves the convex reconstruction program,
    inflated by ``noise_level`` times the identity for noisy data.

    Parameters
    ----------
    n_arcs : int, default=2
        Number of interface arcs (= number of unknown coefficients).
    lower, upper : float, defaults 1.0 and 2.0
        A-priori bounds, 0 < lower <= upper.
    interface_radius : float, default=0.5
        Radius of the interface circle inside the unit disk.
    segments_per_arc : int, default=8
        Interface resolution of the geometry.
    mesh_size : float, default=0.1
        Target element size of the structured triangulation.
    noise_level : float, default=0.0
        Spectral-norm bound on the measurement noise (the delta of the
        noisy program).
    check_criterion : bool, default=True
        Verify the solvability criterion before reconstructing; when it
        fails, ``fit`` raises :class:`CriterionNotMetError`. With False the
        solve runs uncertified and ``error_radius_`` stays None.
    lambda_floor : float, default=1e-8
        Positivity threshold for the criterion value.
    opt_tol, feas_tol, max_newton, mu_factor
        Solver options, see :class:`robinsdp.solver.SolverOptions`.

    Attributes
    ----------
    coefficients_ : ndarray of shape (n_arcs,)
        Reconstructed coefficient vector.
    objective_ : float
        Component sum of the minimizer.
    constraint_margin_ : float
        Feasibility margin -lambda_max(measurements(x) - target), >= 0 up
        to the solver tolerance.
    n_iter_ : int
        Total Newton iterations.
    criterion_lambda_ : float or None
        Criterion value of the configured setup (None when unchecked).
    error_radius_ : float or None
        Certified bound 2 * noise_level * (n_arcs - 1) / criterion_lambda_
        on the sup-norm reconstruction error, when certified.
    forward_map_ : DiscreteForwardMap
        Assembled operators, reusable for forward simulations.

    Examples
    --------
    >>> est = RobinReconstructor(n_arcs=2, mesh_size=0.2)
    >>> fmap = est.simulate_map(num_currents=8)
    >>> y = fmap.measurements([1.25, 1.75]).entries
    >>> est.fit(y).coefficients_.round(3)
    array([1.25, 1.75])
    """

    def __init__(
        self,
        n_arcs: int = 2,
        lower: float = 1.0,
        upper: float = 2.0,
        interface_radius: float = 0.5,
        segments_per_arc: int = 8,
        mesh_size: float = 0.1,
        noise_level: float = 0.0,
        check_criterion: bool = True,
        lambda_floor: float = LAMBDA_FLOOR,
        opt_tol: float | None = None,
        feas_tol: float = 1e-9,
        max_newton: int = 50,
        mu_factor: float = 0.2,
    ):
        self.n_arcs = n_arcs
        self.lower = lower
        self.upper = upper
        self.interface_radius = interface_radius
        self.segments_per_arc = segments_per_arc
        self.mesh_size = mesh_size
        self.noise_level = noise_level
        self.check_criterion = check_criterion
        self.lambda_floor = lambda_floor
        self.opt_tol = opt_tol
        self.feas_tol = feas_tol
        self.max_newton = max_newton
        self.mu_factor = mu_factor

    def _bounds(self) -> BoxBounds:
        return BoxBounds(self.lower, self.upper, self.n_arcs)

    def _solver_options(self) -> SolverOptions:
        return SolverOptions(
            opt_tol=self.opt_tol,
            feas_tol=self.feas_tol,
            max_newton=self.max_newton,
            mu_factor=self.mu_factor,
        )

    def simulate_map(self, num_currents: int):
        """Assemble the forward map of this configuration, e.g. to
        synthesize measurement data for known coefficients."""
        geometry = build_disk_geometry(
            self.n_arcs, self.interface_radius, self.segments_per_arc
        )
        return assemble(geometry, self.mesh_size, num_currents)

    def fit(self, X, y=None):
        """Reconstruct coefficients from the measured matrix X (m-by-m,
        symmetric; m is the number of boundary currents)."""
        if self.noise_level < 0:
            raise ValueError("noise_level must be nonnegative")
        measured = symmetric_measurement(X)
        bounds = self._bounds()
        fmap = self.simulate_map(num_currents=measured.shape[0])

        criterion = None
        if self.check_criterion:
            criterion = evaluate_criterion(fmap, bounds)
            if not criterion.fulfilled(self.lambda_floor):
                raise CriterionNotMetError(
                    f"solvability criterion not met (lam={criterion.lam:.3e} <= "
                    f"floor {self.lambda_floor:.1e}); increase the number of "
                    "currents or pass check_criterion=False",
                    lam=criterion.lam,
                )

        opts = self._solver_options()
        if criterion is not None:
            result = solve_noisy(
                fmap, bounds, measured, self.noise_level, criterion, opts
            )
        else:
            target = SymMatrix(measured) + self.noise_level * SymMatrix.identity(
                measured.shape[0]
            )
            problem = SdpProblem(
                forward=fmap, bounds=bounds, target=target, slack_added=self.noise_level
            )
            result = solve(problem, opts)

        self.forward_map_ = fmap
        self.criterion_lambda_ = None if criterion is None else criterion.lam
        self.coefficients_ = result.minimizer
        self.objective_ = result.objective
        self.constraint_margin_ = result.constraint_margin
        self.n_iter_ = result.iterations
        self.error_radius_ = result.certified_error_radius
        self.n_currents_ = measured.shape[0]
        return self
