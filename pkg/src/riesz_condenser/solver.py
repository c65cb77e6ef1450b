"""Projected gradient solvers for discrete condenser energy problems.

The constrained problem minimizes the signed quadratic energy plus a field
term over vector measures with fixed per-plate gauge masses, nonnegative
weights, and optional per-node caps. The feasible set is a product of
capped simplices, so the workhorse is an accelerated projected gradient
method with a monotone safeguard; every accepted iterate has an objective
no larger than the previous one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.spatial.distance import cdist

from .geometry import Condenser, Plate
from .kernels import DiagonalPolicy, KernelDomainError, RieszKernel, kernel_matrix
from .measures import (
    DiscreteMeasure,
    DiscreteVectorMeasure,
    ProblemSpec,
    SignedDiscreteMeasure,
    condenser_matrix,
    field_values,
    potential,
)

#: Opposite-sign node pairs closer than this are watched for mass pile-up.
SHORT_CIRCUIT_DISTANCE = 1e-9


class InfeasibleProblemError(ValueError):
    """The caps cannot carry the requested gauge mass."""

    def __init__(self, message: str, deficit: float | None = None) -> None:
        super().__init__(message)
        self.deficit = deficit


class ShortCircuitError(RuntimeError):
    """Mass is concentrating on a near-touching opposite-sign node pair.

    When two plates of opposite sign nearly touch, the signed energy is
    unbounded below along measures that pile charge onto the touching
    nodes, and the iteration chases that direction instead of an
    equilibrium. The geometry needs a genuine gap at the working
    resolution.
    """

    def __init__(self, message: str, distance: float | None = None) -> None:
        super().__init__(message)
        self.distance = distance


class DegenerateProblemError(ValueError):
    """The problem admits no meaningful equilibrium at this discretization."""


@dataclass(frozen=True)
class SolveOptions:
    """Iteration controls shared by all solvers.

    Convergence is declared when the projected gradient residual falls
    under grad_tol relative to the gradient scale. Rounding inside the
    mass projection puts a floor near 1e-8 on reachable residuals, so
    tolerances below that tend to exhaust max_iters instead.
    """

    max_iters: int = 2000
    grad_tol: float = 1e-7
    step_rule: str = "armijo"
    restart_count: int = 1
    seed: int = 0
    record_iterates: bool = False

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.grad_tol > 0):
            raise ValueError("grad_tol must be positive")
        if self.step_rule not in ("armijo", "lipschitz"):
            raise ValueError("step_rule must be 'armijo' or 'lipschitz'")
        if self.restart_count < 1:
            raise ValueError("restart_count must be at least 1")


@dataclass(eq=False)
class SolveReport:
    """Outcome of a constrained or unconstrained solve."""

    minimizer: DiscreteVectorMeasure
    energy: float
    multipliers: tuple[float, ...]
    kkt_max_violation: float
    iterations: int
    converged: bool
    min_cross_sign_distance: float
    trace: NDArray
    message: str = ""
    iterates: list[NDArray] | None = None


@dataclass(eq=False)
class CapacityResult:
    value: float
    energy: float
    report: SolveReport


@dataclass(eq=False)
class BalayageResult:
    """A measure swept onto a target node set.

    ``support_residual`` is the largest mismatch between the swept and
    source potentials on charged target nodes; ``complement_slack`` is the
    most negative excess on uncharged ones (nonnegative up to tolerance at
    an exact solution).
    """

    swept: DiscreteMeasure
    objective: float
    support_residual: float
    complement_slack: float
    iterations: int
    converged: bool


def project_capped_simplex(
    x: NDArray,
    caps: NDArray | None = None,
    gauge: NDArray | None = None,
    target: float = 1.0,
) -> NDArray:
    """Euclidean projection onto {y : 0 <= y <= caps, gauge . y = target}.

    Solved by monotone bisection on the shift multiplier; the result's
    gauge mass matches the target to one part in 1e12 except in the exact
    boundary case where the caps barely carry the target, which returns
    the caps themselves.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    caps = np.full(n, np.inf) if caps is None else np.asarray(caps, dtype=float)
    gauge = np.ones(n) if gauge is None else np.asarray(gauge, dtype=float)
    if caps.shape != x.shape or gauge.shape != x.shape:
        raise ValueError("x, caps and gauge must share one shape")
    if not np.isfinite(x).all():
        raise ValueError("x must be finite")
    if not (np.isfinite(target) and target > 0):
        raise ValueError(f"target mass must be positive and finite, got {target}")
    if not np.isfinite(gauge).all() or (gauge <= 0).any():
        raise ValueError("gauge must be positive and finite")
    if np.isnan(caps).any() or (caps < 0).any():
        raise ValueError("caps must be nonnegative")
    total = float(gauge @ np.where(np.isfinite(caps), caps, np.inf)) if n else 0.0
    if total < target * (1.0 - 1e-12):
        raise InfeasibleProblemError(
            f"caps carry gauge mass {total:.6g} < target {target:.6g}",
            deficit=target - total,
        )
    if total <= target * (1.0 + 1e-12):
        return caps.copy()

    def mass(t: float) -> float:
        return float(gauge @ np.clip(x - t * gauge, 0.0, caps))

    hi = float(np.max(x / gauge))
    finite = np.isfinite(caps)
    if finite.all():
        lo = float(np.min((x - caps) / gauge))
    else:
        lo = hi - 1.0
        while mass(lo) < target:
            lo = hi - 2.0 * (hi - lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        m = mass(mid)
        if m >= target:
            lo = mid
        else:
            hi = mid
        if abs(m - target) <= 1e-13 * target:
            break
        if hi - lo <= 1e-16 * max(1.0, abs(lo), abs(hi)):
            break
    t = 0.5 * (lo + hi)
    y = np.clip(x - t * gauge, 0.0, caps)
    # One exact Newton correction on the free set tightens the mass match.
    free = (y > 0.0) & (y < caps)
    slope = float(gauge[free] @ gauge[free])
    if slope > 0.0:
        y2 = np.clip(x - (t + (float(gauge @ y) - target) / slope) * gauge, 0.0, caps)
        if abs(float(gauge @ y2) - target) <= abs(float(gauge @ y) - target):
            y = y2
    return y


def _weighted_median(values: NDArray, weights: NDArray) -> float:
    order = np.argsort(values)
    v = values[order]
    cw = np.cumsum(weights[order])
    return float(v[np.searchsorted(cw, 0.5 * cw[-1])])


def plate_multiplier(
    w_pot: NDArray, weights: NDArray, caps: NDArray, gauge: NDArray, target: float
) -> float:
    """Equilibrium level of one plate from its weighted potential.

    Uses the gauge-weighted median of potential over gauge on interior
    nodes; with no interior nodes, the midpoint of the band bracketed by
    cap-active values from below and zero-active values from above.
    """
    eps = 1e-12 * target / len(weights)
    ratio = w_pot / gauge
    interior = (weights > eps) & (weights < caps - eps)
    if interior.any():
        return _weighted_median(ratio[interior], gauge[interior])
    at_cap = weights >= caps - eps
    at_zero = weights <= eps
    lo = float(ratio[at_cap].max()) if at_cap.any() else -np.inf
    hi = float(np.min(ratio[at_zero])) if at_zero.any() else np.inf
    if np.isfinite(lo) and np.isfinite(hi):
        return 0.5 * (lo + hi)
    if np.isfinite(lo):
        return lo
    if np.isfinite(hi):
        return hi
    return 0.0


def plate_kkt_violation(
    w_pot: NDArray,
    weights: NDArray,
    caps: NDArray,
    gauge: NDArray,
    target: float,
    level: float,
) -> float:
    """Largest inequality defect of the variational conditions on one plate.

    Below caps the weighted potential may not fall under level * gauge;
    on the support it may not exceed it.
    """
    eps = 1e-12 * target / len(weights)
    slack = w_pot - level * gauge
    below_cap = weights < caps - eps
    on_support = weights > eps
    v1 = float(np.max(-slack[below_cap], initial=0.0))
    with np.errstate(invalid="ignore"):
        v2 = float(np.max(slack[on_support], initial=0.0))
    return max(v1, v2, 0.0)


def _objective_pieces(mat: NDArray, lin: NDArray, w: NDArray) -> tuple[float, NDArray]:
    mv = mat @ w
    return float(w @ mv + 2.0 * (lin @ w)), 2.0 * (mv + lin)


def _descend(
    mat: NDArray,
    lin: NDArray,
    slices: list[slice],
    caps: list[NDArray],
    gauges: list[NDArray],
    targets: NDArray,
    w0: NDArray,
    options: SolveOptions,
    watch: list[tuple[int, int, int, int, float]] | None = None,
):
    """Monotone accelerated projected gradient descent on one start point."""
    lip = 2.0 * float(np.abs(mat).sum(axis=1).max()) or 1.0
    base = 1.0 / lip

    def project(v: NDArray) -> NDArray:
        out = np.empty_like(v)
        for sl, c, g, a in zip(slices, caps, gauges, targets):
            out[sl] = project_capped_simplex(v[sl], c, g, a)
        return out

    def check_watch(w: NDArray) -> None:
        if not watch:
            return
        for p, q, i, j, dist in watch:
            if (
                w[p] * gauge_flat[p] >= 0.45 * targets[i]
                and w[q] * gauge_flat[q] >= 0.45 * targets[j]
            ):
                raise ShortCircuitError(
                    f"about half of the mass of plates {i} and {j} sits on an "
                    f"opposite-sign node pair {dist:.3e} apart; the energy is "
                    "unbounded below at this geometry, refine the gap or the "
                    "node budget",
                    distance=dist,
                )

    gauge_flat = np.concatenate(gauges)
    x = project(np.asarray(w0, dtype=float))
    fx, gx = _objective_pieces(mat, lin, x)
    x_prev, f_prev = x, fx
    y, ty = x, 1.0
    step = base if options.step_rule == "lipschitz" else 2.5 * base
    trace = [fx]
    iterates = [x.copy()] if options.record_iterates else None
    converged = False
    iters_done = 0
    for k in range(1, options.max_iters + 1):
        iters_done = k
        if np.array_equal(y, x):
            fy, gy = fx, gx
        else:
            fy, gy = _objective_pieces(mat, lin, y)
        s = step
        for _ in range(80):
            z = project(y - s * gy)
            dz = z - y
            fz, gz = _objective_pieces(mat, lin, z)
            slack = 1e-12 * (abs(fy) + abs(fz))
            if fz <= fy + float(gy @ dz) + float(dz @ dz) / (2.0 * s) + slack:
                break
            s *= 0.5
        if options.step_rule == "armijo":
            step = min(s * 1.2, 50.0 * base)
        # Monotone safeguard: keep the better of the accelerated point and
        # the previous iterate, restarting momentum when acceleration fails.
        x_prev = x
        if fz <= fx:
            x, fx, gx = z, fz, gz
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * ty * ty))
            y = x + (ty / t_next) * (z - x) + ((ty - 1.0) / t_next) * (x - x_prev)
            ty = t_next
        else:
            # Acceleration overshot; fall back to a plain base step, which
            # can only lower the objective, and restart the momentum.
            ty = 1.0
            z2 = project(x - base * gx)
            f2, g2 = _objective_pieces(mat, lin, z2)
            if f2 <= fx:
                x, fx, gx = z2, f2, g2
            y = x
            if options.step_rule == "armijo":
                step = 2.5 * base
        trace.append(fx)
        if iterates is not None:
            iterates.append(x.copy())
        check_watch(x)
        residual = float(np.max(np.abs(x - project(x - base * gx)))) / base
        if residual <= options.grad_tol * max(1.0, float(np.max(np.abs(gx)))):
            converged = True
            break
    return x, fx, gx, np.asarray(trace), iters_done, converged, iterates


def _find_watch_pairs(cond: Condenser) -> list[tuple[int, int, int, int, float]]:
    if cond.min_cross_sign_distance >= SHORT_CIRCUIT_DISTANCE:
        return []
    slices = cond.node_slices()
    pairs = []
    for i, pi in enumerate(cond.plates):
        for j in range(i + 1, len(cond)):
            pj = cond.plates[j]
            if pi.sign == pj.sign:
                continue
            dist = cdist(pi.points, pj.points)
            for p, q in np.argwhere(dist < SHORT_CIRCUIT_DISTANCE):
                pairs.append(
                    (slices[i].start + p, slices[j].start + q, i, j, float(dist[p, q]))
                )
    return pairs


def _solve(
    cond: Condenser,
    problem: ProblemSpec,
    kernel: RieszKernel,
    policy: DiagonalPolicy,
    options: SolveOptions,
) -> SolveReport:
    targets, caps, gauges = problem.materialize(cond)
    fvals = field_values(cond, problem.field, kernel, policy)
    slices = cond.node_slices()
    n = cond.total_nodes
    lin_raw = np.zeros(n) if fvals is None else np.concatenate(fvals)
    # Nodes with an infinite field can never carry mass; cap them to zero
    # and drop the infinity from the arithmetic.
    blocked = np.isinf(lin_raw)
    caps = [c.copy() for c in caps]
    for i, sl in enumerate(slices):
        caps[i][blocked[sl]] = 0.0
        room = float(gauges[i] @ caps[i])
        if room < targets[i] * (1.0 - 1e-12):
            extra = " (the field excludes some nodes)" if blocked[sl].any() else ""
            raise InfeasibleProblemError(
                f"plate {i}: caps carry gauge mass {room:.6g} < target "
                f"{targets[i]:.6g}{extra}",
                deficit=targets[i] - room,
            )
    lin = np.where(blocked, 0.0, lin_raw)
    mat = condenser_matrix(cond, kernel, policy)
    watch = _find_watch_pairs(cond)

    w0 = np.concatenate(
        [np.full(len(p), a / float(g.sum())) for p, a, g in zip(cond.plates, targets, gauges)]
    )
    best = None
    total_iters = 0
    for r in range(options.restart_count):
        if r == 0:
            start = w0
        else:
            rng = np.random.default_rng(options.seed + r)
            parts = []
            for sl, a, g in zip(slices, targets, gauges):
                d = rng.dirichlet(np.ones(sl.stop - sl.start)) / g
                d *= a / float(g @ d)
                parts.append(0.5 * w0[sl] + 0.5 * d)
            start = np.concatenate(parts)
        x, fx, gx, trace, iters, conv, iterates = _descend(
            mat, lin, slices, caps, gauges, targets, start, options, watch
        )
        total_iters += iters
        if best is None or fx < best[1]:
            best = (x, fx, gx, trace, conv, iterates)
    x, fx, gx, trace, conv, iterates = best

    w_pot = mat @ x + lin_raw
    levels, viol = [], 0.0
    for i, sl in enumerate(slices):
        c = plate_multiplier(w_pot[sl], x[sl], caps[i], gauges[i], targets[i])
        levels.append(c)
        viol = max(
            viol,
            plate_kkt_violation(w_pot[sl], x[sl], caps[i], gauges[i], targets[i], c),
        )
    minimizer = DiscreteVectorMeasure(tuple(x[sl].copy() for sl in slices))
    message = "" if conv else (
        f"stopped at max_iters={options.max_iters} before reaching "
        f"grad_tol={options.grad_tol:g}"
    )
    return SolveReport(
        minimizer=minimizer,
        energy=fx,
        multipliers=tuple(levels),
        kkt_max_violation=viol,
        iterations=total_iters,
        converged=conv,
        min_cross_sign_distance=cond.min_cross_sign_distance,
        trace=trace,
        message=message,
        iterates=iterates,
    )


def solve_constrained(
    cond: Condenser,
    problem: ProblemSpec,
    kernel: RieszKernel,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> SolveReport:
    """Minimize the condenser energy under caps and gauge mass constraints."""
    if policy is None:
        policy = DiagonalPolicy.nearest_neighbor()
    return _solve(cond, problem, kernel, policy, options or SolveOptions())


def solve_unconstrained(
    cond: Condenser,
    problem: ProblemSpec,
    kernel: RieszKernel,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> SolveReport:
    """Minimize the condenser energy under gauge mass constraints alone."""
    if problem.caps is not None:
        raise ValueError("unconstrained solves take a problem without caps")
    if policy is None:
        policy = DiagonalPolicy.nearest_neighbor()
    return _solve(cond, problem, kernel, policy, options or SolveOptions())


def capacity(
    kernel: RieszKernel,
    points: NDArray,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> CapacityResult:
    """Discrete capacity of a node set: reciprocal of its equilibrium energy."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or len(points) < 2:
        raise DegenerateProblemError("capacity needs at least two distinct nodes")
    cond = Condenser([Plate(points, 1)])
    report = solve_unconstrained(
        cond, ProblemSpec(targets=(1.0,)), kernel, policy, options
    )
    if not (report.energy > 0.0):
        raise DegenerateProblemError(
            f"equilibrium energy {report.energy:.3e} is not positive; the zero "
            "diagonal admits mass spikes, use the nearest_neighbor policy"
        )
    return CapacityResult(value=1.0 / report.energy, energy=report.energy, report=report)


def balayage(
    kernel: RieszKernel,
    source: SignedDiscreteMeasure,
    target_points: NDArray,
    policy: DiagonalPolicy | None = None,
    options: SolveOptions | None = None,
) -> BalayageResult:
    """Sweep a source measure onto a target node set.

    Minimizes the energy of the difference between the swept and source
    measures over nonnegative weights on the target nodes. Requires a
    positive definite diagonal policy; the zero policy makes this
    objective unbounded below and is rejected.
    """
    if policy is None:
        policy = DiagonalPolicy.nearest_neighbor()
    if policy.mode == "zero":
        raise ValueError(
            "balayage needs the nearest_neighbor diagonal policy; with a zero "
            "diagonal the sweep objective is unbounded below"
        )
    options = options or SolveOptions()
    tgt = Plate(np.asarray(target_points, dtype=float), 1)
    if len(tgt) < 2:
        raise DegenerateProblemError("balayage needs at least two target nodes")
    mat = kernel_matrix(kernel, tgt.points, policy=policy, spacings=tgt.spacings)
    p = potential(kernel, source, tgt.points)
    if not np.isfinite(p).all():
        raise KernelDomainError(
            "the source charges a target node; remove that mass before sweeping"
        )
    lip = 2.0 * float(np.abs(mat).sum(axis=1).max()) or 1.0
    base = 1.0 / lip
    v = np.zeros(len(tgt))
    fv, gv = _objective_pieces(mat, -p, v)
    y, ty = v, 1.0
    step = base if options.step_rule == "lipschitz" else 2.5 * base
    converged = False
    iters_done = 0
    for k in range(1, options.max_iters + 1):
        iters_done = k
        if np.array_equal(y, v):
            fy, gy = fv, gv
        else:
            fy, gy = _objective_pieces(mat, -p, y)
        s = step
        for _ in range(80):
            z = np.maximum(y - s * gy, 0.0)
            dz = z - y
            fz, gz = _objective_pieces(mat, -p, z)
            slack = 1e-12 * (abs(fy) + abs(fz))
            if fz <= fy + float(gy @ dz) + float(dz @ dz) / (2.0 * s) + slack:
                break
            s *= 0.5
        if options.step_rule == "armijo":
            step = min(s * 1.2, 50.0 * base)
        v_prev = v
        if fz <= fv:
            v, fv, gv = z, fz, gz
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * ty * ty))
            y = v + (ty / t_next) * (z - v) + ((ty - 1.0) / t_next) * (v - v_prev)
            ty = t_next
        else:
            ty = 1.0
            z2 = np.maximum(v - base * gv, 0.0)
            f2, g2 = _objective_pieces(mat, -p, z2)
            if f2 <= fv:
                v, fv, gv = z2, f2, g2
            y = v
            if options.step_rule == "armijo":
                step = 2.5 * base
        residual = float(np.max(np.abs(v - np.maximum(v - base * gv, 0.0)))) / base
        if residual <= options.grad_tol * max(1.0, float(np.max(np.abs(gv)))):
            converged = True
            break
    eps = 1e-12 * max(1.0, float(np.abs(source.weights).sum())) / len(tgt)
    fit = mat @ v - p
    on = v > eps
    support_residual = float(np.max(np.abs(fit[on]), initial=0.0))
    complement_slack = float(np.min(fit[~on], initial=0.0))
    return BalayageResult(
        swept=DiscreteMeasure(tgt.points, v),
        objective=fv,
        support_residual=support_residual,
        complement_slack=complement_slack,
        iterations=iters_done,
        converged=converged,
    )
