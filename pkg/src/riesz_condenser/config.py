"""Strict YAML run configuration.

A run file names the kernel, the diagonal policy, the plates with their
constraint data, and solver options. Unknown keys anywhere are rejected so
typos fail loudly instead of silently falling back to defaults.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .geometry import PlateSpec, PointCloudFile, RevolutionSurface, Sphere
from .kernels import DiagonalPolicy, RieszKernel
from .solver import SolveOptions

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(eq=False)
class RunConfig:
    kernel: RieszKernel
    policy: DiagonalPolicy
    plate_specs: tuple[PlateSpec, ...]
    targets: tuple[float, ...]
    caps: tuple[float | None, ...]
    gauges: tuple[float | None, ...]
    mode: str
    options: SolveOptions
    seed: int


def _require_mapping(node, where: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(node).__name__}")
    return node


def _no_unknown(node: dict, allowed: set[str], where: str) -> None:
    extra = set(node) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _number(node: dict, key: str, where: str, default=None, required=False):
    if key not in node:
        if required:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    v = node[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    return v


def _integer(node: dict, key: str, where: str, default=None, required=False):
    v = _number(node, key, where, default, required)
    if v is None:
        return None
    if int(v) != v:
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    return int(v)


def _parse_shape(node, where: str):
    node = _require_mapping(node, where)
    kind = node.get("type")
    if kind == "sphere":
        _no_unknown(node, {"type", "center", "radius"}, where)
        center = node.get("center")
        if not isinstance(center, list) or len(center) < 3:
            raise ConfigError(f"{where}.center: expected a list of 3 or more numbers")
        try:
            center = tuple(float(c) for c in center)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}.center: expected numbers") from None
        radius = _number(node, "radius", where, required=True)
        try:
            return Sphere(center, float(radius))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if kind == "revolution":
        _no_unknown(node, {"type", "r_exponent", "x1_min", "x1_max"}, where)
        try:
            return RevolutionSurface(
                float(_number(node, "r_exponent", where, required=True)),
                float(_number(node, "x1_min", where, default=1.0)),
                float(_number(node, "x1_max", where, required=True)),
            )
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if kind == "points":
        _no_unknown(node, {"type", "path"}, where)
        path = node.get("path")
        if not isinstance(path, str) or not path:
            raise ConfigError(f"{where}.path: expected a file path")
        return PointCloudFile(path)
    raise ConfigError(
        f"{where}.type: expected 'sphere', 'revolution' or 'points', got {kind!r}"
    )


def _parse_plate(node, where: str):
    node = _require_mapping(node, where)
    _no_unknown(
        node, {"shape", "sign", "nodes", "seed", "target", "cap", "gauge"}, where
    )
    if "shape" not in node:
        raise ConfigError(f"{where}: missing required key 'shape'")
    shape = _parse_shape(node["shape"], f"{where}.shape")
    sign = _integer(node, "sign", where, required=True)
    nodes = _integer(node, "nodes", where)
    seed = _integer(node, "seed", where)
    target = float(_number(node, "target", where, default=1.0))
    cap = node.get("cap")
    if cap is not None:
        cap = float(_number(node, "cap", where))
        if not (cap > 0):
            raise ConfigError(f"{where}.cap: must be positive")
    gauge = node.get("gauge")
    if gauge is not None:
        gauge = float(_number(node, "gauge", where))
        if not (gauge > 0):
            raise ConfigError(f"{where}.gauge: must be positive")
    if not (target > 0):
        raise ConfigError(f"{where}.target: must be positive")
    try:
        spec = PlateSpec(shape, sign, nodes, seed)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    return spec, target, cap, gauge


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a YAML run file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from None
    return parse_config(raw, str(path))


def parse_config(raw, where: str = "config") -> RunConfig:
    raw = _require_mapping(raw, where)
    _no_unknown(
        raw,
        {"schema_version", "kernel", "diagonal", "plates", "solve", "seed"},
        where,
    )
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{where}.schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )
    kern = _require_mapping(raw.get("kernel"), f"{where}.kernel")
    _no_unknown(kern, {"alpha", "dim"}, f"{where}.kernel")
    try:
        kernel = RieszKernel(
            float(_number(kern, "alpha", f"{where}.kernel", required=True)),
            _integer(kern, "dim", f"{where}.kernel", default=3),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}.kernel: {exc}") from None
    policy = DiagonalPolicy.nearest_neighbor()
    if "diagonal" in raw:
        diag = _require_mapping(raw["diagonal"], f"{where}.diagonal")
        _no_unknown(diag, {"mode", "nn_scale"}, f"{where}.diagonal")
        mode = diag.get("mode")
        scale = diag.get("nn_scale")
        if scale is not None:
            scale = float(_number(diag, "nn_scale", f"{where}.diagonal"))
        try:
            policy = DiagonalPolicy(mode, scale)
        except ValueError as exc:
            raise ConfigError(f"{where}.diagonal: {exc}") from None
    plates_node = raw.get("plates")
    if not isinstance(plates_node, list) or not plates_node:
        raise ConfigError(f"{where}.plates: expected a non-empty list")
    specs, targets, caps, gauges = [], [], [], []
    for i, pnode in enumerate(plates_node):
        spec, target, cap, gauge = _parse_plate(pnode, f"{where}.plates[{i}]")
        specs.append(spec)
        targets.append(target)
        caps.append(cap)
        gauges.append(gauge)
    any_caps = any(c is not None for c in caps)
    mode = "constrained" if any_caps else "unconstrained"
    opts = {}
    if "solve" in raw:
        snode = _require_mapping(raw["solve"], f"{where}.solve")
        _no_unknown(
            snode,
            {"mode", "max_iters", "grad_tol", "step_rule", "restarts", "seed"},
            f"{where}.solve",
        )
        if "mode" in snode:
            mode = snode["mode"]
            if mode not in ("constrained", "unconstrained"):
                raise ConfigError(
                    f"{where}.solve.mode: expected 'constrained' or "
                    f"'unconstrained', got {mode!r}"
                )
        if "max_iters" in snode:
            opts["max_iters"] = _integer(snode, "max_iters", f"{where}.solve")
        if "grad_tol" in snode:
            opts["grad_tol"] = float(_number(snode, "grad_tol", f"{where}.solve"))
        if "step_rule" in snode:
            rule = snode["step_rule"]
            if rule not in ("armijo", "lipschitz"):
                raise ConfigError(
                    f"{where}.solve.step_rule: expected 'armijo' or 'lipschitz'"
                )
            opts["step_rule"] = rule
        if "restarts" in snode:
            opts["restart_count"] = _integer(snode, "restarts", f"{where}.solve")
        if "seed" in snode:
            opts["seed"] = _integer(snode, "seed", f"{where}.solve")
    if mode == "unconstrained" and any_caps:
        raise ConfigError(
            f"{where}: unconstrained mode cannot be combined with plate caps"
        )
    try:
        options = SolveOptions(**opts)
    except ValueError as exc:
        raise ConfigError(f"{where}.solve: {exc}") from None
    seed = _integer(raw, "seed", where, default=42)
    return RunConfig(
        kernel=kernel,
        policy=policy,
        plate_specs=tuple(specs),
        targets=tuple(targets),
        caps=tuple(caps),
        gauges=tuple(gauges),
        mode=mode,
        options=options,
        seed=seed,
    )


def problem_from_config(cfg: RunConfig, plate_sizes: list[int]):
    """Materialize the per-plate constraint data for sampled plates."""
    from .measures import ProblemSpec

    caps = None
    if any(c is not None for c in cfg.caps):
        caps = tuple(
            None if c is None else np.full(n, c)
            for c, n in zip(cfg.caps, plate_sizes)
        )
    gauges = None
    if any(g is not None for g in cfg.gauges):
        gauges = tuple(
            None if g is None else np.full(n, g)
            for g, n in zip(cfg.gauges, plate_sizes)
        )
    return ProblemSpec(targets=cfg.targets, caps=caps, gauges=gauges)
