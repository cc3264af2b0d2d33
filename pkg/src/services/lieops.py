"""Left-invariant diffusion on positions and orientations, and the enhancement pipeline.

Scores live on R^3 x S^2, so the rotation about n (A_6) has nothing to act on
and the generator reduces to

    D11 (A_1^2 + A_2^2) + D33 A_3^2 + D44 (A_4^2 + A_5^2)

with A_3^2 the second difference along n_i, A_1^2 + A_2^2 the 7-point Laplacian
minus that, and A_4^2 + A_5^2 a graph Laplacian on the orientation mesh.
All spatial operators are periodic.
"""
import math
from typing import Optional

import numpy as np
from scipy import ndimage, sparse

from src.helper.errors import DimensionError, ParameterError, StructureError
from src.helper.loggers import diffusion_logger
from src.models.containers import OrientationScore, OrientationSet, Volume, WaveletStack
from src.models.params import DiffusionParams, ReconstructionMode, SoftThresholdMode
from src.services import oscore

POWER_ITERATIONS = 20
_SPATIAL_AXES = (1, 2, 3)


def _shifted(u: np.ndarray, offset: np.ndarray) -> np.ndarray:
    """u(x + offset) with trilinear interpolation and periodic wrap."""
    sample = lambda part: ndimage.shift(part, -offset, order=1, mode="grid-wrap", prefilter=False)
    if np.iscomplexobj(u):
        return sample(u.real) + 1j * sample(u.imag)
    return sample(u)


def _check_spatial(U: OrientationScore) -> None:
    if min(U.grid) < 3:
        raise DimensionError(f"spatial derivatives need at least 3 voxels per axis, got {U.grid}")


def along_second_derivative(U: OrientationScore, orientation_set: OrientationSet) -> OrientationScore:
    """(n_i . grad)^2 per orientation: u(x + n) - 2 u(x) + u(x - n), h = 1 voxel."""
    _check_spatial(U)
    out = np.empty_like(U.data)
    for i, n in enumerate(orientation_set.directions):
        u = U.data[i]
        out[i] = _shifted(u, n) - 2 * u + _shifted(u, -n)
    return U.with_data(out)


def _seven_point_laplacian(data: np.ndarray) -> np.ndarray:
    out = -6 * data
    for axis in _SPATIAL_AXES:
        out = out + np.roll(data, 1, axis=axis) + np.roll(data, -1, axis=axis)
    return out


def lateral_laplacian(U: OrientationScore, orientation_set: OrientationSet) -> OrientationScore:
    along = along_second_derivative(U, orientation_set)
    return U.with_data(_seven_point_laplacian(U.data) - along.data)


def mesh_laplacian(orientation_set: OrientationSet) -> sparse.csr_matrix:
    """Graph Laplacian on the orientation mesh, (L u)_i = (1 / w_i) sum_j K_ij (u_j - u_i).

    K_ij = 8 / (deg_i + deg_j) * sqrt(w_i w_j) / d_ij^2 is symmetric, d_ij the geodesic
    edge length; on a regular hexagonal patch this approximates the Laplace-Beltrami operator.
    """
    if orientation_set.adjacency is None:
        raise StructureError("angular diffusion needs an orientation set with mesh adjacency")
    directions = orientation_set.directions
    weights = orientation_set.weights
    degree = np.array([len(a) for a in orientation_set.adjacency])
    rows, cols = [], []
    for i, neighbours in enumerate(orientation_set.adjacency):
        rows.extend([i] * len(neighbours))
        cols.extend(neighbours.tolist())
    rows, cols = np.array(rows), np.array(cols)
    geodesic = np.arccos(np.clip(np.sum(directions[rows] * directions[cols], axis=1), -1.0, 1.0))
    coupling = 8.0 / (degree[rows] + degree[cols]) * np.sqrt(weights[rows] * weights[cols]) / geodesic ** 2
    K = sparse.csr_matrix((coupling, (rows, cols)), shape=(len(orientation_set),) * 2)
    graph = K - sparse.diags(np.asarray(K.sum(axis=1)).ravel())
    return sparse.diags(1.0 / weights) @ graph


def angular_laplacian(U: OrientationScore, orientation_set: OrientationSet,
                      laplacian: Optional[sparse.spmatrix] = None) -> OrientationScore:
    laplacian = mesh_laplacian(orientation_set) if laplacian is None else laplacian
    flat = U.data.reshape(U.data.shape[0], -1)
    return U.with_data(np.asarray(laplacian @ flat).reshape(U.data.shape))


def _largest_eigenvalue(laplacian: sparse.spmatrix) -> float:
    n = laplacian.shape[0]
    v = np.cos(np.arange(n) * 2.0 + 0.5)  # deterministic start with mixed sign pattern
    estimate = 0.0
    for _ in range(POWER_ITERATIONS):
        w = -(laplacian @ v)
        estimate = float(np.linalg.norm(w) / np.linalg.norm(v))
        v = w / np.linalg.norm(w)
    return estimate


def spatial_stiffness(params: DiffusionParams) -> float:
    """Bound on the spectral radius of D11 lateral + D33 along.

    The 7-point symbol lies in [-12, 0] and the trilinear along-difference symbol in [-4, 0].
    """
    return 12 * params.D11 + 4 * max(params.D33 - params.D11, 0.0)


def stable_time_step(orientation_set: OrientationSet, params: DiffusionParams,
                     laplacian: Optional[sparse.spmatrix] = None) -> float:
    """min(1 / (2 (2 D11 + D33 + D44 lambda_max)), 2 / stiffness) for the explicit scheme (h = 1)."""
    lam = 0.0
    if params.D44 > 0:
        laplacian = mesh_laplacian(orientation_set) if laplacian is None else laplacian
        lam = _largest_eigenvalue(laplacian)
    rate = 2 * params.D11 + params.D33 + params.D44 * lam
    if rate == 0:
        return math.inf
    stiffness = spatial_stiffness(params) + params.D44 * lam
    return min(1.0 / (2 * rate), 2.0 / stiffness)


def diffuse(U: OrientationScore, orientation_set: OrientationSet, params: DiffusionParams) -> OrientationScore:
    """Explicit Euler integration of the left-invariant diffusion up to params.t_end.

    The lateral operator is not negative semidefinite for oblique orientations: its
    symbol reaches up to 4 D11 near modes where the trilinear along-difference is
    stiffer than the 7-point Laplacian, so long runs can slowly amplify them.
    """
    if params.t_end == 0 or (params.D11 == 0 and params.D33 == 0 and params.D44 == 0):
        return U.with_data(U.data.copy())
    _check_spatial(U)

    laplacian = mesh_laplacian(orientation_set) if params.D44 > 0 else None
    bound = stable_time_step(orientation_set, params, laplacian)
    dt = params.dt if params.dt is not None else bound
    if dt > bound:
        raise ParameterError(f"time step {dt:.4g} exceeds the stability bound {bound:.4g}")
    steps = max(1, math.ceil(params.t_end / dt - 1e-9))
    dt = params.t_end / steps
    diffusion_logger.info(
        f"diffuse: D11={params.D11}, D33={params.D33}, D44={params.D44}, "
        f"t={params.t_end}, {steps} steps of dt={dt:.4g}"
    )

    current = U.data.copy()
    for step in range(steps):
        state = U.with_data(current)
        rate = np.zeros_like(current)
        if params.D11 > 0 or params.D33 > 0:
            along = along_second_derivative(state, orientation_set).data
            if params.D11 > 0:
                rate += params.D11 * (_seven_point_laplacian(current) - along)
            rate += params.D33 * along
        if laplacian is not None:
            rate += params.D44 * angular_laplacian(state, orientation_set, laplacian).data
        current = current + dt * rate
        diffusion_logger.debug(f"diffuse step {step + 1}/{steps}")
    return U.with_data(current)


def soft_threshold(U: OrientationScore, p: float = 1.5, scale: Optional[float] = None,
                   mode: SoftThresholdMode = SoftThresholdMode.PHASE) -> OrientationScore:
    """|U|^p times the unit phase of U (phase(0) = 0).

    With scale, the rule acts on U / scale and the result is multiplied back, so
    values at the scale are kept. REAL_PART applies the real sign rule to Re U only.
    """
    if p <= 0:
        raise ParameterError(f"soft-threshold exponent must be positive, got {p}")
    scale = 1.0 if scale is None or scale == 0 else float(scale)
    data = U.data / scale
    if mode is SoftThresholdMode.REAL_PART:
        real = np.real(data)
        out = np.sign(real) * np.abs(real) ** p
    else:
        magnitude = np.abs(data)
        phase = np.divide(data, magnitude, out=np.zeros_like(data, dtype=np.complex128), where=magnitude > 0)
        out = magnitude ** p * phase
    return U.with_data((scale * out).astype(np.complex128))


def enhance(
    f: Volume,
    stack: WaveletStack,
    params: DiffusionParams,
    p: Optional[float] = None,
    reconstruction: ReconstructionMode = ReconstructionMode.APPROX,
    eps: Optional[float] = None,
    threshold_mode: SoftThresholdMode = SoftThresholdMode.PHASE,
) -> Volume:
    """forward -> diffuse -> optional soft threshold -> reconstruct."""
    try:
        score = oscore.forward(f, stack)
        score = diffuse(score, stack.orientation_set, params)
        if p is not None:
            score = soft_threshold(score, p, scale=float(np.abs(score.data).max()), mode=threshold_mode)
        if reconstruction is ReconstructionMode.EXACT:
            return oscore.reconstruct_exact(score, stack, eps)
        return oscore.reconstruct_approx(score)
    except Exception as e:
        diffusion_logger.error(f"Error in enhance: {str(e)}")
        raise
