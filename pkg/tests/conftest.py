"""Shared geometric oracles for the test suite."""

import numpy as np
from scipy.spatial import cKDTree


def knn_areal_density(plane_coords: np.ndarray, k: int = 16) -> np.ndarray:
    """Empirical points-per-square-meter via the k-th nearest neighbor.

    plane_coords are 2-D in-surface coordinates; the estimate is
    k / (pi * R_k^2) with R_k the distance to the k-th neighbor.
    """
    tree = cKDTree(plane_coords)
    dist, _ = tree.query(plane_coords, k=k + 1)  # first hit is the point itself
    rk = dist[:, -1]
    return k / (np.pi * rk**2)
