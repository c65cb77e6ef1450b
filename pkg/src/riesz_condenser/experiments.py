"""Named reproduction experiments with closed-form references.

Each experiment builds a concrete geometry, runs a solve, and returns an
ExperimentResult whose metrics compare against known values where they
exist. Results are plain data so the command line tool can serialize them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PlateSpec, RevolutionSurface, Sphere, build_condenser
from .kernels import DiagonalPolicy, RieszKernel
from .measures import ProblemSpec
from .solver import SolveOptions, capacity, solve_constrained, solve_unconstrained
from .verify import continuity_check, duality_check, kkt_check


@dataclass(eq=False)
class ExperimentResult:
    """Outcome of one named experiment."""

    name: str
    params: dict
    metrics: dict
    rows: list[dict] = field(default_factory=list)
    ok: bool = True
    notes: str = ""

    def to_jsonable(self) -> dict:
        def conv(v):
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, np.bool_):
                return bool(v)
            if isinstance(v, np.ndarray):
                return [conv(x) for x in v.tolist()]
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            return v

        return {
            "name": self.name,
            "params": conv(self.params),
            "metrics": conv(self.metrics),
            "rows": conv(self.rows),
            "ok": bool(self.ok),
            "notes": self.notes,
        }


def sphere_capacity_reference(alpha: float, dim: int, radius: float) -> float | None:
    """Known closed-form sphere capacity, or None outside the known range."""
    if alpha == 2.0:
        return radius ** (dim - 2)
    if dim == 3 and 1.0 < alpha < 3.0:
        return (alpha - 1.0) * 2.0 ** (2.0 - alpha) * radius ** (3.0 - alpha)
    return None


def two_spheres(
    nodes: int = 400,
    alpha: float = 2.0,
    dim: int = 3,
    r_inner: float = 1.0,
    r_outer: float = 2.0,
    seed: int = 42,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> ExperimentResult:
    """Concentric sphere condenser with inner plate positive.

    For the harmonic kernel the minimum energy is
    r_inner**(2 - dim) - r_outer**(2 - dim), the inner equilibrium level is
    that same number and the outer level vanishes.
    """
    if not (0.0 < r_inner < r_outer):
        raise ValueError("need 0 < r_inner < r_outer")
    kernel = RieszKernel(alpha, dim)
    origin = (0.0,) * dim
    cond = build_condenser(
        [
            PlateSpec(Sphere(origin, r_inner), 1, nodes),
            PlateSpec(Sphere(origin, r_outer), -1, nodes),
        ],
        seed,
    )
    rep = solve_unconstrained(
        cond, ProblemSpec(targets=(1.0, 1.0)), kernel, policy, options
    )
    metrics = {
        "energy": rep.energy,
        "levels": list(rep.multipliers),
        "kkt_max_violation": rep.kkt_max_violation,
        "iterations": rep.iterations,
        "converged": rep.converged,
    }
    ok = rep.converged
    if alpha == 2.0:
        expected = r_inner ** (2 - dim) - r_outer ** (2 - dim)
        rel = abs(rep.energy - expected) / abs(expected)
        metrics["expected_energy"] = expected
        metrics["rel_error"] = rel
        ok = ok and rel <= 0.02
    return ExperimentResult(
        name="two_spheres",
        params={
            "nodes": nodes,
            "alpha": alpha,
            "dim": dim,
            "r_inner": r_inner,
            "r_outer": r_outer,
            "seed": seed,
        },
        metrics=metrics,
        ok=bool(ok),
    )


def short_circuit(
    k_values: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8),
    q: float = 1.0,
    nodes: int = 2000,
    seed: int = 42,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> ExperimentResult:
    """Nearly touching concentric sphere pairs with vanishing energies.

    Pair k sits at (k, 0, 0) with outer radius k**-2 and inner radius
    1 / (k^2 + k^-q); the harmonic energy is exactly k**-q, so the family
    blows up in capacity at rate k**q as the gap closes. The continuum
    equilibrium is uniform on both spheres; the caps pin the discrete
    measure to it, because once the node spacing exceeds the gap (which
    happens beyond small k at any workable budget) a free minimization
    dives into the spurious negative well between the nearly touching
    lattices. Each row records whether the spacing resolves the gap;
    unresolved rows depend on how the two rotated lattices happen to
    interleave and are not seed-stable.
    """
    kernel = RieszKernel(2.0, 3)
    rows = []
    for k in k_values:
        r_out = float(k) ** -2.0
        r_in = 1.0 / (k * k + float(k) ** -q)
        center = (float(k), 0.0, 0.0)
        cond = build_condenser(
            [
                PlateSpec(Sphere(center, r_in), 1, nodes),
                PlateSpec(Sphere(center, r_out), -1, nodes),
            ],
            seed,
        )
        gap = r_out - r_in
        max_spacing = max(float(p.spacings.max()) for p in cond.plates)
        problem = ProblemSpec(
            targets=(1.0, 1.0),
            caps=(np.full(nodes, 1.0 / nodes), np.full(nodes, 1.0 / nodes)),
        )
        rep = solve_constrained(cond, problem, kernel, policy, options)
        expected = float(k) ** -q
        rows.append(
            {
                "k": k,
                "energy": rep.energy,
                "expected": expected,
                "rel_error": abs(rep.energy - expected) / expected,
                "gap": gap,
                "resolved": bool(max_spacing < gap),
                "converged": rep.converged,
            }
        )
    energies = [r["energy"] for r in rows]
    decreasing = all(b < a for a, b in zip(energies, energies[1:]))
    worst = max(r["rel_error"] for r in rows)
    ok = decreasing and worst <= 0.10 and all(r["converged"] for r in rows)
    unresolved = [r["k"] for r in rows if not r["resolved"]]
    notes = (
        "pairs k in {} exceed the resolvable gap at this node budget; their "
        "errors are not seed-stable".format(unresolved)
        if unresolved
        else ""
    )
    return ExperimentResult(
        name="short_circuit",
        params={"k_values": list(k_values), "q": q, "nodes": nodes, "seed": seed},
        metrics={"max_rel_error": worst, "energies_decreasing": decreasing},
        rows=rows,
        ok=bool(ok),
        notes=notes,
    )


def touching_balls(
    nodes: int = 500,
    alpha: float = 1.5,
    cap_scale: float = 1.5,
    seed: int = 42,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> ExperimentResult:
    """Four balls with tangencies between the positive plate and the rest.

    The positive unit ball at the origin is touched at (1, 0, 0) by a unit
    ball centered at (2, 0, 0) and by a radius-2 ball centered at (3, 0, 0),
    and at (-1, 0, 0) by a unit ball centered at (-2, 0, 0); the three
    touching balls carry the negative sign. Plates are discretized on their
    boundary spheres, which pass through the tangency points. Because the
    plates meet, the unconstrained energy is unbounded below; each plate is
    capped by cap_scale times its own equilibrium weights, which restores a
    finite minimum with clean variational slack.
    """
    kernel = RieszKernel(alpha, 3)
    layout = [
        ((0.0, 0.0, 0.0), 1.0, 1),
        ((2.0, 0.0, 0.0), 1.0, -1),
        ((3.0, 0.0, 0.0), 2.0, -1),
        ((-2.0, 0.0, 0.0), 1.0, -1),
    ]
    cond = build_condenser(
        [PlateSpec(Sphere(c, r), s, nodes) for c, r, s in layout],
        seed,
    )
    caps = []
    for plate in cond.plates:
        equilibrium = capacity(kernel, plate.points, policy, options)
        caps.append(cap_scale * equilibrium.report.minimizer.weights[0])
    problem = ProblemSpec(targets=(1.0,) * 4, caps=tuple(caps))
    rep = solve_constrained(cond, problem, kernel, policy, options)
    report = kkt_check(cond, problem, rep.minimizer, kernel, policy)
    return ExperimentResult(
        name="touching_balls",
        params={
            "nodes": nodes,
            "alpha": alpha,
            "cap_scale": cap_scale,
            "seed": seed,
        },
        metrics={
            "energy": rep.energy,
            "kkt_max_violation": report.max_violation,
            "kkt_scale": report.scale,
            "kkt_passed": report.passed,
            "min_cross_sign_distance": rep.min_cross_sign_distance,
            "iterations": rep.iterations,
            "converged": rep.converged,
        },
        ok=bool(rep.converged and report.passed),
    )


def cusp_surfaces(
    r_exponents: tuple[float, ...] = (1.5, 2.0, 3.0),
    nodes: int = 600,
    x1_max: float = 5.0,
    alpha: float = 2.0,
    seed: int = 42,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> ExperimentResult:
    """Capacities of revolution surfaces with increasingly sharp decay.

    The profile exp(-x1**r) thins the surface as r grows, so capacities
    must decrease along the sweep while staying positive.
    """
    kernel = RieszKernel(alpha, 3)
    rows = []
    for i, r in enumerate(r_exponents):
        surface = RevolutionSurface(r, 1.0, x1_max)
        cond = build_condenser([PlateSpec(surface, 1, nodes)], seed + i)
        rep = solve_unconstrained(
            cond, ProblemSpec(targets=(1.0,)), kernel, policy, options
        )
        rows.append(
            {
                "r_exponent": r,
                "energy": rep.energy,
                "capacity": 1.0 / rep.energy if rep.energy > 0 else np.inf,
                "converged": rep.converged,
            }
        )
    caps_seq = [r["capacity"] for r in rows]
    decreasing = all(b < a for a, b in zip(caps_seq, caps_seq[1:]))
    ok = decreasing and all(r["converged"] and r["energy"] > 0 for r in rows)
    return ExperimentResult(
        name="cusp_surfaces",
        params={
            "r_exponents": list(r_exponents),
            "nodes": nodes,
            "x1_max": x1_max,
            "alpha": alpha,
            "seed": seed,
        },
        metrics={"capacities": caps_seq, "decreasing": decreasing},
        rows=rows,
        ok=bool(ok),
    )


def duality(
    nodes: int = 400,
    alpha: float = 2.0,
    cap_scale: float = 2.0,
    seed: int = 42,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> ExperimentResult:
    """Cap complement duality on a unit sphere with uniform caps."""
    kernel = RieszKernel(alpha, 3)
    points = build_condenser(
        [PlateSpec(Sphere((0.0, 0.0, 0.0), 1.0), 1, nodes)], seed
    ).plates[0].points
    sigma = np.full(nodes, cap_scale / nodes)
    report = duality_check(points, sigma, kernel, policy, options)
    return ExperimentResult(
        name="duality",
        params={
            "nodes": nodes,
            "alpha": alpha,
            "cap_scale": cap_scale,
            "seed": seed,
        },
        metrics={
            "q": report.q,
            "theta_mass_error": report.theta_mass_error,
            "eta_spread": report.eta_spread,
            "energy_rel_gap": report.energy_rel_gap,
            "kkt_passed": report.kkt.passed,
        },
        ok=bool(report.passed),
    )


def continuity(
    nodes: int = 400,
    alpha: float = 2.0,
    cap_scale: float = 1.05,
    levels: int = 5,
    seed: int = 42,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> ExperimentResult:
    """Minimum energy stability along a tightening cap chain on a sphere.

    The default cap sits just above the uniform weight, so the tightest
    levels of the chain actually pin the heaviest nodes and the minimum
    strictly grows toward the limit.
    """
    kernel = RieszKernel(alpha, 3)
    cond = build_condenser(
        [PlateSpec(Sphere((0.0, 0.0, 0.0), 1.0), 1, nodes)], seed
    )
    problem = ProblemSpec(
        targets=(1.0,), caps=(np.full(nodes, cap_scale / nodes),)
    )
    report = continuity_check(
        cond, problem, kernel, policy, options, levels=levels, mode="caps"
    )
    return ExperimentResult(
        name="continuity",
        params={
            "nodes": nodes,
            "alpha": alpha,
            "cap_scale": cap_scale,
            "levels": levels,
            "seed": seed,
        },
        metrics={
            "values": list(report.values),
            "limit_value": report.limit_value,
            "monotone": report.monotone,
            "final_gap": report.final_gap,
        },
        ok=bool(report.passed),
    )


def capacity_sweep(
    radii: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0),
    nodes: int = 800,
    alpha: float = 2.0,
    dim: int = 3,
    seed: int = 42,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> ExperimentResult:
    """Sphere capacities against the closed-form radius power law."""
    kernel = RieszKernel(alpha, dim)
    rows = []
    for i, r in enumerate(radii):
        pts = build_condenser(
            [PlateSpec(Sphere((0.0,) * dim, float(r)), 1, nodes)], seed + i
        ).plates[0].points
        res = capacity(kernel, pts, policy, options)
        row = {"radius": r, "capacity": res.value, "energy": res.energy}
        expected = sphere_capacity_reference(alpha, dim, float(r))
        if expected is not None:
            row["expected"] = expected
            row["rel_error"] = abs(res.value - expected) / expected
        rows.append(row)
    errs = [r["rel_error"] for r in rows if "rel_error" in r]
    ok = not errs or max(errs) <= 0.02
    return ExperimentResult(
        name="capacity_sweep",
        params={
            "radii": list(radii),
            "nodes": nodes,
            "alpha": alpha,
            "dim": dim,
            "seed": seed,
        },
        metrics={"max_rel_error": max(errs) if errs else None},
        rows=rows,
        ok=bool(ok),
    )


EXPERIMENTS = {
    "two_spheres": two_spheres,
    "zu": two_spheres,
    "short_circuit": short_circuit,
    "touching_balls": touching_balls,
    "cusp_surfaces": cusp_surfaces,
    "duality": duality,
    "continuity": continuity,
    "capacity_sweep": capacity_sweep,
}


def run_experiment(name: str, **overrides) -> ExperimentResult:
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise ValueError(
            f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}"
        ) from None
    return fn(**overrides)
