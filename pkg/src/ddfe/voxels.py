"""Cubic voxel partitioning of point clouds.

Cells are floor(coord / voxel_size); voxel ordinals follow first occurrence
in the cloud, so the partition is deterministic and order-dependent only in
its numbering, not its structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_VOXEL_SIZE = 0.20  # meters


@dataclass
class VoxelGrid:
    voxel_size: float
    cells: np.ndarray           # (M, 3) integer cell indices
    centers: np.ndarray         # (M, 3) cell centers (or member centroids)
    point_to_voxel: np.ndarray  # (N,) voxel ordinal of each point
    membership: list = field(repr=False)  # per-voxel arrays of point indices

    @property
    def num_voxels(self) -> int:
        return self.cells.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.point_to_voxel, minlength=self.num_voxels)


def voxelize(
    cloud: np.ndarray,
    voxel_size: float = DEFAULT_VOXEL_SIZE,
    center_mode: str = "cell",
) -> VoxelGrid:
    """Partition an (N, 3) cloud into cubic voxels.

    center_mode selects the voxel representative: "cell" (geometric cell
    center, default -- invariant to intra-voxel noise) or "centroid" (mean
    of member points).
    """
    if voxel_size <= 0:
        raise ValueError(f"voxel_size must be positive, got {voxel_size}")
    if center_mode not in ("cell", "centroid"):
        raise ValueError(f"unknown center_mode {center_mode!r}")
    cloud = np.asarray(cloud, dtype=np.float64)
    if cloud.ndim != 2 or cloud.shape[1] != 3:
        raise ValueError(f"expected (N, 3) cloud, got shape {cloud.shape}")
    finite = np.isfinite(cloud).all(axis=1)
    if not finite.all():
        raise ValueError(
            f"non-finite coordinates at point index {np.flatnonzero(~finite)[0]}"
        )

    cells_per_point = np.floor(cloud / voxel_size).astype(np.int64)
    unique_cells, first_index, inverse = np.unique(
        cells_per_point, axis=0, return_index=True, return_inverse=True
    )
    # np.unique sorts lexicographically; renumber to first-occurrence order.
    order = np.argsort(first_index, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    point_to_voxel = rank[inverse.ravel()]
    cells = unique_cells[order]

    if center_mode == "cell":
        centers = (cells + 0.5) * voxel_size
    else:
        sums = np.zeros((cells.shape[0], 3))
        np.add.at(sums, point_to_voxel, cloud)
        counts = np.bincount(point_to_voxel, minlength=cells.shape[0])
        centers = sums / counts[:, None]

    sorted_points = np.argsort(point_to_voxel, kind="stable")
    boundaries = np.searchsorted(point_to_voxel[sorted_points], np.arange(1, cells.shape[0]))
    membership = np.split(sorted_points, boundaries)
    return VoxelGrid(float(voxel_size), cells, centers, point_to_voxel, membership)


def voxel_offsets(grid: VoxelGrid, cloud: np.ndarray) -> np.ndarray:
    """Per-point offset from its voxel's center; max-norm <= voxel_size/2."""
    cloud = np.asarray(cloud, dtype=np.float64)
    if cloud.shape[0] != grid.point_to_voxel.shape[0]:
        raise ValueError(
            f"grid was built from {grid.point_to_voxel.shape[0]} points, "
            f"got cloud with {cloud.shape[0]}"
        )
    return cloud - grid.centers[grid.point_to_voxel]


def majority_label(grid: VoxelGrid, point_labels: np.ndarray) -> np.ndarray:
    """Most frequent member label per voxel; ties break to the smallest id."""
    labels = np.asarray(point_labels)
    if labels.shape[0] != grid.point_to_voxel.shape[0]:
        raise ValueError(
            f"expected {grid.point_to_voxel.shape[0]} labels, got {labels.shape[0]}"
        )
    if labels.size == 0:
        return np.zeros(0, dtype=np.int64)
    if np.any(labels < 0):
        raise ValueError("labels must be non-negative class ids")
    num_classes = int(labels.max()) + 1
    votes = np.zeros((grid.num_voxels, num_classes), dtype=np.int64)
    np.add.at(votes, (grid.point_to_voxel, labels), 1)
    return votes.argmax(axis=1)  # argmax picks the smallest id on ties
