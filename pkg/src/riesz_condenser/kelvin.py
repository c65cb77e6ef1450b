"""Inversion of points and measures in a sphere.

Inversion in the sphere of radius r about a center c maps x to
c + r^2 (x - c) / |x - c|^2. The measure transform rescales each weight by
(r / |x - c|) ** (dim - alpha), which makes the kernel energy of the
transformed measure equal to the original energy and ties the potentials
together through the distance factor |x - c| ** (alpha - dim).
"""
from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .kernels import RieszKernel
from .measures import DiscreteMeasure, SignedDiscreteMeasure

#: Points closer to the center than this cannot be inverted stably.
CENTER_TOL = 1e-12


def invert_points(points: NDArray, center, radius: float = 1.0) -> NDArray:
    """Spherical inversion of an (N, dim) array of points."""
    points = np.asarray(points, dtype=float)
    center = np.asarray(center, dtype=float)
    if points.ndim != 2 or points.shape[1] != center.shape[0]:
        raise ValueError("points must be (N, dim) matching the center")
    if not (radius > 0.0):
        raise ValueError("radius must be positive")
    diff = points - center
    norm2 = np.einsum("ij,ij->i", diff, diff)
    if (norm2 < CENTER_TOL**2).any():
        raise ValueError(
            f"a point lies within {CENTER_TOL:g} of the inversion center"
        )
    return center + (radius * radius / norm2)[:, None] * diff


def invert_point(x, center, radius: float = 1.0) -> NDArray:
    return invert_points(np.asarray(x, dtype=float)[None, :], center, radius)[0]


def kelvin_transform(
    kernel: RieszKernel,
    measure: SignedDiscreteMeasure,
    center,
    radius: float = 1.0,
) -> SignedDiscreteMeasure:
    """Image of a discrete measure under inversion, with Kelvin weights.

    The transform is an energy isometry: the returned measure has exactly
    the same off-diagonal kernel energy as the input. Applying it twice
    with the same sphere returns the original measure.
    """
    center = np.asarray(center, dtype=float)
    if center.shape != (kernel.dim,):
        raise ValueError(f"center must be a point in R^{kernel.dim}")
    new_points = invert_points(measure.points, center, radius)
    dist = np.linalg.norm(measure.points - center, axis=1)
    new_weights = measure.weights * (radius / dist) ** (kernel.dim - kernel.alpha)
    cls = DiscreteMeasure if isinstance(measure, DiscreteMeasure) else SignedDiscreteMeasure
    return cls(new_points, new_weights)
