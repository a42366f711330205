"""Shared numeric utilities for the test suite (independent of package internals)."""

import math

import numpy as np

from cuspkit.hmodel import MoebiusMap


def hyperbolic_point_distance(p, q):
    """Distance between interior points (z, t) of the upper half-space."""
    z1, t1 = p
    z2, t2 = q
    arg = 1.0 + (abs(z1 - z2) ** 2 + (t1 - t2) ** 2) / (2.0 * t1 * t2)
    return math.acosh(arg)


def random_moebius(rng, scale=1.0):
    while True:
        ent = rng.normal(size=8) * scale
        a = complex(ent[0], ent[1])
        b = complex(ent[2], ent[3])
        c = complex(ent[4], ent[5])
        d = complex(ent[6], ent[7])
        if abs(a * d - b * c) > 1e-3:
            return MoebiusMap(a, b, c, d)


def sphere_points(center, diameter, angles):
    """Points on the Euclidean sphere of a finite-center horoball."""
    r = diameter / 2.0
    pts = []
    for theta, phi in angles:
        z = center + r * math.sin(theta) * complex(math.cos(phi), math.sin(phi))
        t = r + r * math.cos(theta)
        pts.append((z, t))
    return pts


def fit_sphere(points):
    """Least-squares sphere through 3D points (z, t); returns (center3, radius).

    Linearized: |X|^2 = 2 <X, C> + (R^2 - |C|^2).
    """
    rows = []
    rhs = []
    for z, t in points:
        x, y = z.real, z.imag
        rows.append([2 * x, 2 * y, 2 * t, 1.0])
        rhs.append(x * x + y * y + t * t)
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    cx, cy, cz, k = sol
    radius = math.sqrt(k + cx * cx + cy * cy + cz * cz)
    return (cx, cy, cz), radius
