"""Shared fixtures.

The reference solves used by the acceptance suite are expensive, so they
are computed once per session; unit tests that need only small structures
build their own locally.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from riesz_condenser import (
    DiscreteMeasure,
    PlateSpec,
    ProblemSpec,
    RieszKernel,
    Sphere,
    balayage,
    build_condenser,
    capacity,
    kkt_check,
    sample_sphere,
    solve_constrained,
    solve_unconstrained,
)

ORIGIN = (0.0, 0.0, 0.0)


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def kernel23():
    return RieszKernel(2.0, 3)


@pytest.fixture(scope="session")
def unit_sphere_400():
    return build_condenser([PlateSpec(Sphere(ORIGIN, 1.0), 1, 400)], 42)


@pytest.fixture(scope="session")
def unit_sphere_solve_400(unit_sphere_400, kernel23):
    return solve_unconstrained(
        unit_sphere_400, ProblemSpec(targets=(1.0,)), kernel23
    )


@pytest.fixture(scope="session")
def concentric_condenser():
    """Unit positive sphere inside a radius-2 negative sphere, 2000 nodes each."""
    return build_condenser(
        [
            PlateSpec(Sphere(ORIGIN, 1.0), 1, 2000),
            PlateSpec(Sphere(ORIGIN, 2.0), -1, 2000),
        ],
        42,
    )


@pytest.fixture(scope="session")
def concentric_problem():
    return ProblemSpec(targets=(1.0, 1.0))


@pytest.fixture(scope="session")
def concentric_solve(concentric_condenser, concentric_problem, kernel23):
    report, seconds = timed(
        solve_unconstrained, concentric_condenser, concentric_problem, kernel23
    )
    return {"report": report, "seconds": seconds}


@pytest.fixture(scope="session")
def concentric_capped_problem(concentric_condenser):
    caps = tuple(
        np.full(len(p), 2.0 / len(p)) for p in concentric_condenser.plates
    )
    return ProblemSpec(targets=(1.0, 1.0), caps=caps)


@pytest.fixture(scope="session")
def concentric_capped_solve(concentric_condenser, concentric_capped_problem, kernel23):
    report, seconds = timed(
        solve_constrained,
        concentric_condenser,
        concentric_capped_problem,
        kernel23,
    )
    return {"report": report, "seconds": seconds}


@pytest.fixture(scope="session")
def capacity_runs(kernel23):
    """Equilibrium solves on spheres of radius 1, 2 and 4 at 4000 nodes."""
    out = {}
    for i, radius in enumerate((1.0, 2.0, 4.0)):
        points = sample_sphere(ORIGIN, radius, 4000, 42 + i)
        result, seconds = timed(capacity, kernel23, points)
        out[radius] = {"result": result, "seconds": seconds, "points": points}
    return out


@pytest.fixture(scope="session")
def tangent_family_solution():
    """Four balls meeting at two points, discretized on boundary spheres.

    The positive unit ball at the origin touches the three negative balls
    centered at (2, 0, 0), (3, 0, 0) with radius 2, and (-2, 0, 0). Each
    plate is capped by 1.5 times its own equilibrium weights.
    """
    kernel = RieszKernel(1.5, 3)
    layout = [
        ((0.0, 0.0, 0.0), 1.0, 1),
        ((2.0, 0.0, 0.0), 1.0, -1),
        ((3.0, 0.0, 0.0), 2.0, -1),
        ((-2.0, 0.0, 0.0), 1.0, -1),
    ]
    cond = build_condenser(
        [PlateSpec(Sphere(c, r), s, 500) for c, r, s in layout], 42
    )
    caps = tuple(
        1.5 * capacity(kernel, p.points).report.minimizer.weights[0]
        for p in cond.plates
    )
    problem = ProblemSpec(targets=(1.0,) * 4, caps=caps)
    report = solve_constrained(cond, problem, kernel)
    check = kkt_check(cond, problem, report.minimizer, kernel)
    return {
        "kernel": kernel,
        "cond": cond,
        "problem": problem,
        "report": report,
        "kkt": check,
    }


@pytest.fixture(scope="session")
def swept_unit_charge(kernel23):
    """Unit charge at (0, 0, 2) swept onto the unit sphere at 2000 nodes."""
    target = sample_sphere(ORIGIN, 1.0, 2000, 42)
    source = DiscreteMeasure(np.array([[0.0, 0.0, 2.0]]), np.array([1.0]))
    result, seconds = timed(balayage, kernel23, source, target)
    return {"source": source, "target": target, "result": result, "seconds": seconds}
