"""Sampled structural checks of the discrete measurement map.

These suites back the ``properties`` CLI subcommand: Loewner monotonicity
and convexity of the measurement map, first-order accuracy of the assembled
directional derivative, and the converse-monotonicity implication enabled
by a verified criterion. Each suite draws its samples from the supplied
generator, so runs are reproducible from the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .criterion import BoxBounds, converse_monotonicity_check
from .fem import DiscreteForwardMap
from .symmat import loewner_leq, spectral_norm

__all__ = ["PropertyOutcome", "run_property_suites", "LOEWNER_SLACK"]

LOEWNER_SLACK = 1e-10
DERIVATIVE_STEPS = (1e-2, 1e-3, 1e-4)
DERIVATIVE_ORDER_RANGE = (0.8, 1.2)


@dataclass(frozen=True)
class PropertyOutcome:
    name: str
    passed: int
    total: int
    first_failure: dict | None

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def _sample_box(rng: np.random.Generator, bounds: BoxBounds) -> np.ndarray:
    return bounds.a + (bounds.b - bounds.a) * rng.random(bounds.n)


def _sample_ordered_pair(
    rng: np.random.Generator, bounds: BoxBounds
) -> tuple[np.ndarray, np.ndarray]:
    lo = _sample_box(rng, bounds)
    hi = lo + (bounds.b - lo) * rng.random(bounds.n)
    return lo, hi


def monotonicity_suite(
    fmap: DiscreteForwardMap, bounds: BoxBounds, samples: int, rng: np.random.Generator
) -> PropertyOutcome:
    """Entrywise larger coefficients give Loewner-smaller measurements."""
    passed = 0
    first_failure = None
    for i in range(samples):
        lo, hi = _sample_ordered_pair(rng, bounds)
        if loewner_leq(fmap.measurements(hi), fmap.measurements(lo), LOEWNER_SLACK):
            passed += 1
        elif first_failure is None:
            first_failure = {"sample": i, "lower": lo.tolist(), "upper": hi.tolist()}
    return PropertyOutcome("monotonicity", passed, samples, first_failure)


def convexity_suite(
    fmap: DiscreteForwardMap, bounds: BoxBounds, samples: int, rng: np.random.Generator
) -> PropertyOutcome:
    """Gradient inequality: D'(x0)(x - x0) <= D(x) - D(x0), plus the
    segment-combination form at a random interior parameter."""
    passed = 0
    first_failure = None
    for i in range(samples):
        x0 = _sample_box(rng, bounds)
        x1 = _sample_box(rng, bounds)
        t = rng.uniform(0.1, 0.9)
        f0 = fmap.measurements(x0)
        f1 = fmap.measurements(x1)
        gradient_ok = loewner_leq(
            fmap.directional_derivative(x0, x1 - x0), f1 - f0, LOEWNER_SLACK
        )
        blend_ok = loewner_leq(
            fmap.measurements((1.0 - t) * x0 + t * x1),
            (1.0 - t) * f0 + t * f1,
            LOEWNER_SLACK,
        )
        if gradient_ok and blend_ok:
            passed += 1
        elif first_failure is None:
            first_failure = {
                "sample": i,
                "x0": x0.tolist(),
                "x1": x1.tolist(),
                "t": float(t),
                "gradient_ok": gradient_ok,
                "blend_ok": blend_ok,
            }
    return PropertyOutcome("convexity", passed, samples, first_failure)


def derivative_suite(
    fmap: DiscreteForwardMap, bounds: BoxBounds, samples: int, rng: np.random.Generator
) -> PropertyOutcome:
    """Forward-difference quotients of the measurement map approach the
    assembled directional derivative at first order in the step."""
    passed = 0
    first_failure = None
    steps = np.array(DERIVATIVE_STEPS)
    for i in range(samples):
        x = _sample_box(rng, bounds)
        direction = rng.standard_normal(bounds.n)
        direction /= max(1.0, np.abs(direction).max())
        exact = fmap.directional_derivative(x, direction)
        f0 = fmap.measurements(x)
        errors = []
        for h in steps:
            quotient = (1.0 / h) * (fmap.measurements(x + h * direction) - f0)
            errors.append(spectral_norm(quotient - exact))
        order = float(np.polyfit(np.log(steps), np.log(errors), 1)[0])
        if DERIVATIVE_ORDER_RANGE[0] <= order <= DERIVATIVE_ORDER_RANGE[1]:
            passed += 1
        elif first_failure is None:
            first_failure = {
                "sample": i,
                "x": x.tolist(),
                "direction": direction.tolist(),
                "order": order,
                "errors": [float(e) for e in errors],
            }
    return PropertyOutcome("derivative_order", passed, samples, first_failure)


def converse_monotonicity_suite(
    fmap: DiscreteForwardMap,
    bounds: BoxBounds,
    lam: float,
    samples: int,
    rng: np.random.Generator,
) -> PropertyOutcome:
    """Converse-monotonicity implication on random coefficient pairs."""
    passed = 0
    first_failure = None
    for i in range(samples):
        x = _sample_box(rng, bounds)
        y = _sample_box(rng, bounds)
        if converse_monotonicity_check(fmap, bounds, x, y, lam):
            passed += 1
        elif first_failure is None:
            first_failure = {"sample": i, "x": x.tolist(), "y": y.tolist()}
    return PropertyOutcome("converse_monotonicity", passed, samples, first_failure)


def run_property_suites(
    fmap: DiscreteForwardMap,
    bounds: BoxBounds,
    lam: float,
    samples: int,
    seed: int,
) -> list[PropertyOutcome]:
    """Run all four suites with a fresh generator per suite so that each
    suite's samples depend only on the seed."""
    outcomes = [
        monotonicity_suite(fmap, bounds, samples, np.random.default_rng(seed)),
        convexity_suite(fmap, bounds, samples, np.random.default_rng(seed + 1)),
        derivative_suite(fmap, bounds, samples, np.random.default_rng(seed + 2)),
        converse_monotonicity_suite(
            fmap, bounds, lam, samples, np.random.default_rng(seed + 3)
        ),
    ]
    return outcomes
