"""Near-uniform orientation sets from subdivided icosahedra."""
from typing import Dict, Tuple

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from src.helper.errors import ParameterError, ResourceLimitError, StructureError
from src.helper.loggers import sphere_logger
from src.models.containers import OrientationSet

MAX_ORDER = 6
PAIRING_TOLERANCE = 1e-10


def quadrature_weights_uniform(n_orientations: int) -> np.ndarray:
    if n_orientations < 1:
        raise ParameterError(f"need at least one orientation, got {n_orientations}")
    return np.full(n_orientations, 4.0 * np.pi / n_orientations)


def _icosahedron() -> Tuple[np.ndarray, np.ndarray]:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            vertices += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    vertices = np.array(vertices)
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    return vertices, ConvexHull(vertices).simplices


def _subdivide(vertices: np.ndarray, faces: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """1 -> 4 midpoint split of every triangle, new vertices pushed to the sphere."""
    points = list(vertices)
    midpoints: Dict[Tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        if key not in midpoints:
            m = points[a] + points[b]
            points.append(m / np.linalg.norm(m))
            midpoints[key] = len(points) - 1
        return midpoints[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(points), np.array(new_faces)


def _adjacency(n_vertices: int, faces: np.ndarray) -> Tuple[np.ndarray, ...]:
    neighbours = [set() for _ in range(n_vertices)]
    for tri in faces:
        for p in range(3):
            a, b = int(tri[p]), int(tri[(p + 1) % 3])
            neighbours[a].add(b)
            neighbours[b].add(a)
    return tuple(np.array(sorted(s), dtype=np.int64) for s in neighbours)


def icosphere(order: int) -> OrientationSet:
    """Icosahedron subdivided `order` times; 10 * 4**order + 2 directions sorted by (z, y, x)."""
    if order < 0:
        raise ParameterError(f"tessellation order must be non-negative, got {order}")
    if order > MAX_ORDER:
        raise ResourceLimitError(f"tessellation order {order} exceeds the limit of {MAX_ORDER}")

    vertices, faces = _icosahedron()
    for _ in range(order):
        vertices, faces = _subdivide(vertices, faces)

    # reproducible ordering; rounding keeps ties from depending on last-bit noise
    rounded = np.round(vertices, 12)
    order_idx = np.lexsort((rounded[:, 0], rounded[:, 1], rounded[:, 2]))
    rank = np.empty_like(order_idx)
    rank[order_idx] = np.arange(order_idx.size)
    vertices = vertices[order_idx]
    faces = rank[faces]

    n_vertices = vertices.shape[0]
    result = OrientationSet(
        directions=vertices,
        weights=quadrature_weights_uniform(n_vertices),
        adjacency=_adjacency(n_vertices, faces),
        faces=faces,
        antipode=antipodal_pairing(OrientationSet.from_directions(vertices)),
    )
    sphere_logger.debug(f"icosphere order={order}: {len(result)} directions, {faces.shape[0]} faces")
    return result


def antipodal_pairing(orientation_set: OrientationSet) -> np.ndarray:
    """Permutation a with directions[a[i]] == -directions[i]."""
    directions = orientation_set.directions
    distance, partner = cKDTree(directions).query(-directions, k=1)
    if np.any(distance > PAIRING_TOLERANCE):
        worst = int(np.argmax(distance))
        raise StructureError(
            f"orientation set is not antipodally symmetric: direction {worst} has no partner "
            f"(closest at distance {distance[worst]:.3g})"
        )
    if np.unique(partner).size != partner.size:
        raise StructureError("antipodal partners are not unique")
    return partner.astype(np.int64)


def write_orientations_csv(orientation_set: OrientationSet, path) -> None:
    table = np.column_stack(
        [np.arange(len(orientation_set)), orientation_set.directions, orientation_set.weights]
    )
    np.savetxt(path, table, delimiter=",", header="index,x,y,z,weight", comments="",
               fmt=["%d", "%.17g", "%.17g", "%.17g", "%.17g"])
