"""Solution quality checks: variational conditions, uniqueness, duality,
and stability of the minimum under constraint refinement.

A candidate minimizer is accepted when its weighted potential sits on the
plate's equilibrium level wherever mass can move in either direction,
stays above level wherever mass could still be added, below it wherever
mass could be removed, and no random feasible competitor offers a
first-order decrease. All thresholds are relative to the potential scale
on the support.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .geometry import Condenser, Plate
from .kernels import DiagonalPolicy, RieszKernel, kernel_matrix
from .measures import (
    DiscreteMeasure,
    DiscreteVectorMeasure,
    GridField,
    ProblemSpec,
    gauss_energy,
    semimetric,
    vector_energy,
    weighted_potentials,
)
from .solver import (
    SolveOptions,
    plate_kkt_violation,
    plate_multiplier,
    project_capped_simplex,
    solve_constrained,
    solve_unconstrained,
)


@dataclass(eq=False)
class KKTReport:
    """Outcome of the variational check of one candidate vector measure."""

    passed: bool
    max_violation: float
    scale: float
    tol: float
    levels: tuple[float, ...]
    mass_errors: tuple[float, ...]
    probe_min_gain: float
    probe_count: int


@dataclass(eq=False)
class UniquenessReport:
    passed: bool
    distance: float
    scale: float


@dataclass(eq=False)
class DualityReport:
    """Agreement between a cap-constrained solve and its induced
    unconstrained field problem."""

    passed: bool
    q: float
    theta: DiscreteMeasure
    theta_mass_error: float
    eta_spread: float
    energy_rel_gap: float
    kkt: KKTReport


@dataclass(eq=False)
class ContinuityReport:
    """Behavior of the minimum along a shrinking chain of problems."""

    passed: bool
    values: tuple[float, ...]
    limit_value: float
    monotone: bool
    final_gap: float
    distances: tuple[float, ...] | None


def kkt_check(
    cond: Condenser,
    problem: ProblemSpec,
    mu: DiscreteVectorMeasure,
    kernel: RieszKernel,
    policy: DiagonalPolicy | None = None,
    tol: float = 1e-2,
    probes: int = 100,
    seed: int = 0,
) -> KKTReport:
    """Check the first-order optimality of a feasible vector measure.

    ``probes`` random feasible competitors are drawn per plate mix from
    Dirichlet weights and projected onto the constraint set; each must
    fail to offer a first-order energy decrease beyond -tol * scale.
    """
    if policy is None:
        policy = DiagonalPolicy.nearest_neighbor()
    mu.validate_for(cond)
    targets, caps, gauges = problem.materialize(cond)
    w_pots = weighted_potentials(cond, mu, problem, kernel, policy)
    levels, mass_errors = [], []
    viol = 0.0
    scale = 1.0
    for i, plate in enumerate(cond.plates):
        w = mu.weights[i]
        mass_errors.append(abs(float(gauges[i] @ w) - targets[i]))
        c = plate_multiplier(w_pots[i], w, caps[i], gauges[i], targets[i])
        levels.append(c)
        viol = max(
            viol, plate_kkt_violation(w_pots[i], w, caps[i], gauges[i], targets[i], c)
        )
        eps = 1e-12 * targets[i] / len(plate)
        on = w > eps
        if on.any():
            finite = np.isfinite(w_pots[i][on])
            if finite.any():
                scale = max(scale, float(np.max(np.abs(w_pots[i][on][finite]))))
    rng = np.random.default_rng(seed)
    min_gain = np.inf
    for _ in range(probes):
        gain = 0.0
        for i, plate in enumerate(cond.plates):
            d = rng.dirichlet(np.ones(len(plate))) / gauges[i]
            d *= targets[i] / float(gauges[i] @ d)
            nu = project_capped_simplex(d, caps[i], gauges[i], targets[i])
            with np.errstate(invalid="ignore"):
                step = w_pots[i] * (nu - mu.weights[i])
            gain += 2.0 * float(np.where(nu != mu.weights[i], step, 0.0).sum())
        min_gain = min(min_gain, gain)
    if probes == 0:
        min_gain = 0.0
    mass_ok = all(
        err <= 1e-9 * targets[i] for i, err in enumerate(mass_errors)
    )
    passed = bool(
        mass_ok and viol <= tol * scale and min_gain >= -tol * scale
    )
    return KKTReport(
        passed=passed,
        max_violation=viol,
        scale=scale,
        tol=tol,
        levels=tuple(levels),
        mass_errors=tuple(mass_errors),
        probe_min_gain=float(min_gain),
        probe_count=probes,
    )


def uniqueness_check(
    cond: Condenser,
    mu: DiscreteVectorMeasure,
    nu: DiscreteVectorMeasure,
    kernel: RieszKernel,
    policy: DiagonalPolicy | None = None,
    tol: float = 1e-3,
) -> UniquenessReport:
    """Decide whether two candidate minimizers agree in energy distance."""
    if policy is None:
        policy = DiagonalPolicy.nearest_neighbor()
    dist = semimetric(cond, mu, nu, kernel, policy)
    e1 = vector_energy(cond, mu, kernel, policy)
    e2 = vector_energy(cond, nu, kernel, policy)
    scale = max(1.0, np.sqrt(abs(e1)), np.sqrt(abs(e2)))
    return UniquenessReport(passed=bool(dist <= tol * scale), distance=dist, scale=scale)


def duality_check(
    points: NDArray,
    sigma: NDArray,
    kernel: RieszKernel,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
    tol: float = 1e-3,
) -> DualityReport:
    """Map a cap-constrained equilibrium to a field problem and verify it.

    With caps sigma of total mass exceeding one and q = 1 / (mass - 1),
    the complement theta = q * (sigma - lambda) of the constrained
    minimizer lambda is checked as a minimizer of the energy under the
    field -q * (potential of sigma), and its energy is compared against an
    independent direct solve. Exactness requires every node charged by
    lambda; the report records how far the identity holds.
    """
    if kernel.alpha > 2.0:
        raise ValueError("the cap complement duality needs alpha <= 2")
    plate = Plate(np.asarray(points, dtype=float), 1)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (len(plate),):
        raise ValueError("sigma must give one cap per node")
    if (sigma <= 0).any() or not np.isfinite(sigma).all():
        raise ValueError("sigma must be positive and finite")
    total = float(sigma.sum())
    if total <= 1.0 + 1e-9:
        raise ValueError(f"sigma must carry mass above 1, got {total:.6g}")
    if policy is None:
        policy = DiagonalPolicy.nearest_neighbor()
    cond = Condenser([plate])
    rep = solve_constrained(
        cond, ProblemSpec(targets=(1.0,), caps=(sigma,)), kernel, policy, options
    )
    lam = rep.minimizer.weights[0]
    q = 1.0 / (total - 1.0)
    mat = kernel_matrix(kernel, plate.points, policy=policy, spacings=plate.spacings)
    f_theta = -q * (mat @ sigma)
    theta = np.maximum(q * (sigma - lam), 0.0)
    theta_mass = float(theta.sum())
    dual_problem = ProblemSpec(targets=(theta_mass,), field=GridField((f_theta,)))
    theta_vm = DiscreteVectorMeasure((theta,))
    kkt = kkt_check(cond, dual_problem, theta_vm, kernel, policy, tol=tol)
    direct = solve_unconstrained(cond, dual_problem, kernel, policy, options)
    g_theta = gauss_energy(cond, theta_vm, dual_problem, kernel, policy)
    gap = abs(g_theta - direct.energy) / max(1.0, abs(direct.energy))
    w_theta = mat @ theta + f_theta
    on = theta > 1e-12 * theta_mass / len(plate)
    spread = float(w_theta[on].max() - w_theta[on].min()) if on.any() else 0.0
    return DualityReport(
        passed=bool(kkt.passed and gap <= tol),
        q=q,
        theta=DiscreteMeasure(plate.points, theta),
        theta_mass_error=abs(theta_mass - 1.0),
        eta_spread=spread,
        energy_rel_gap=gap,
        kkt=kkt,
    )


def continuity_check(
    cond: Condenser,
    problem: ProblemSpec,
    kernel: RieszKernel,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
    levels: int = 5,
    mode: str = "caps",
    extra_nodes: list[NDArray] | None = None,
    tol: float = 0.05,
) -> ContinuityReport:
    """Solve along a chain of shrinking feasible sets and compare limits.

    In ``caps`` mode level L scales the caps by 1 + 2**-L, tightening
    toward the given problem; the feasible sets shrink over a fixed
    matrix, so the minima must grow along the chain up to rounding slack
    and land within ``tol`` of the limit value. In ``nodes`` mode each
    plate starts with extra nodes that are removed in halves until only
    the given condenser remains; here only the final gap is enforced,
    because the diagonal policy reacts to node spacing and crowded
    refinements can push intermediate minima above the limit.
    """
    if levels < 1:
        raise ValueError("levels must be at least 1")
    if policy is None:
        policy = DiagonalPolicy.nearest_neighbor()
    values: list[float] = []
    minimizers = []
    if mode == "caps":
        if problem.caps is None:
            raise ValueError("caps mode needs a problem with caps")
        for ell in range(1, levels + 1):
            factor = 1.0 + 2.0 ** (-ell)
            caps_ell = tuple(
                None if c is None else np.asarray(c, dtype=float) * factor
                for c in problem.caps
            )
            prob_ell = ProblemSpec(
                targets=problem.targets,
                caps=caps_ell,
                gauges=problem.gauges,
                field=problem.field,
            )
            rep = solve_constrained(cond, prob_ell, kernel, policy, options)
            values.append(rep.energy)
            minimizers.append(rep.minimizer)
        limit_rep = solve_constrained(cond, problem, kernel, policy, options)
        distances = tuple(
            semimetric(cond, a, b, kernel, policy)
            for a, b in zip(minimizers, minimizers[1:])
        )
    elif mode == "nodes":
        if extra_nodes is None or len(extra_nodes) != len(cond):
            raise ValueError("nodes mode needs one extra node block per plate")
        if problem.caps is not None or problem.gauges is not None:
            raise ValueError("nodes mode supports only capless unit-gauge problems")
        for ell in range(1, levels + 1):
            plates = []
            for plate, extra in zip(cond.plates, extra_nodes):
                extra = np.asarray(extra, dtype=float)
                n_keep = round(len(extra) * 2.0 ** (-ell))
                pts = (
                    np.vstack([plate.points, extra[:n_keep]])
                    if n_keep
                    else plate.points
                )
                plates.append(Plate(pts, plate.sign))
            rep = solve_constrained(
                Condenser(plates), problem, kernel, policy, options
            )
            values.append(rep.energy)
        limit_rep = solve_constrained(cond, problem, kernel, policy, options)
        distances = None
    else:
        raise ValueError("mode must be 'caps' or 'nodes'")
    limit = limit_rep.energy
    seq = values + [limit]
    slack = 1e-9 * max(1.0, max(abs(v) for v in seq))
    monotone = all(b >= a - slack for a, b in zip(seq, seq[1:]))
    final_gap = abs(limit - values[-1]) / max(1.0, abs(limit))
    need_monotone = monotone if mode == "caps" else True
    return ContinuityReport(
        passed=bool(need_monotone and final_gap <= tol),
        values=tuple(values),
        limit_value=limit,
        monotone=monotone,
        final_gap=final_gap,
        distances=distances,
    )
