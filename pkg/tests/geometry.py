"""Distances from phase-plane points to the theoretical curves."""
import numpy as np


def distance_to_curve(points, fn, rho_max, n=20001):
    """Euclidean distance from each ``(rho, rho')`` point to ``rho' = fn(rho)`` on ``[0, rho_max]``."""
    r = np.linspace(0.0, rho_max, n)
    curve = np.column_stack([r, fn(r)])
    out = np.empty(len(points))
    for i, p in enumerate(points):
        out[i] = np.sqrt(np.min(np.sum((curve - p) ** 2, axis=1)))
    return out


def union_distance(points, front, back, rho_max):
    return np.minimum(distance_to_curve(points, front, rho_max),
                      distance_to_curve(points, back, rho_max))
