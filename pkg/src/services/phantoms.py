"""Synthetic tube phantoms, Gaussian noise and comparison metrics."""
from typing import Tuple

import numpy as np

from src.helper.errors import DataError, DimensionError, ParameterError
from src.helper.loggers import io_logger
from src.models.containers import Volume
from src.models.params import Metrics, PhantomSpec, Tube

PSNR_CAP_DB = 200.0


def phantom(spec: PhantomSpec, dims) -> Volume:
    """max over tubes of intensity * exp(-d^2 / 2r^2); voxel centers at integer coordinates."""
    dims = tuple(int(n) for n in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise DimensionError(f"phantom needs three positive dimensions, got {dims}")
    coords = np.stack(np.meshgrid(*[np.arange(n, dtype=np.float64) for n in dims], indexing="ij"), axis=-1)
    data = np.full(dims, -np.inf)
    for tube in spec.tubes:
        direction = np.asarray(tube.direction, dtype=np.float64)
        offset = coords - np.asarray(tube.point, dtype=np.float64)
        along = offset @ direction
        d2 = np.sum(offset ** 2, axis=-1) - along ** 2
        data = np.maximum(data, tube.intensity * np.exp(-np.maximum(d2, 0.0) / (2 * tube.radius ** 2)))
    return Volume(data)


def crossing_tubes(dims, radius: float = 2.0, intensity: float = 1.0) -> PhantomSpec:
    """Three tubes through the grid center: along x, along y and along the (1, 0, 1) diagonal."""
    center = tuple((int(n) - 1) / 2.0 for n in dims)
    diagonal = tuple(float(c) for c in np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0))
    directions = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), diagonal]
    return PhantomSpec(tubes=[Tube(point=center, direction=d, radius=radius, intensity=intensity)
                              for d in directions])


def add_noise(v: Volume, sigma: float, seed: int) -> Volume:
    """Adds sigma * N(0, 1) drawn from numpy's PCG64 generator seeded with seed.

    Complex volumes receive independent noise on both parts, each with deviation sigma / sqrt(2).
    """
    if sigma < 0:
        raise ParameterError(f"noise level must be non-negative, got {sigma}")
    if sigma == 0:
        return Volume(v.data.copy(), v.spacing)
    rng = np.random.Generator(np.random.PCG64(seed))
    if v.is_complex:
        noise = (rng.standard_normal(v.dims) + 1j * rng.standard_normal(v.dims)) * (sigma / np.sqrt(2.0))
    else:
        noise = sigma * rng.standard_normal(v.dims)
    io_logger.debug(f"add_noise: sigma={sigma}, seed={seed}")
    return Volume(v.data + noise, v.spacing)


def metrics(a: Volume, b: Volume) -> Metrics:
    """Relative L2 error and PSNR of a against the reference b."""
    if a.dims != b.dims:
        raise DimensionError(f"cannot compare volumes of dims {a.dims} and {b.dims}")
    diff = a.data - b.data
    err = float(np.linalg.norm(diff))
    ref = float(np.linalg.norm(b.data))
    if err == 0:
        return Metrics(rel_l2=0.0, psnr=PSNR_CAP_DB)
    if ref == 0:
        raise DataError("reference volume is all zeros; relative error and PSNR are undefined")
    rel_l2 = err / ref
    rms = float(np.sqrt(np.mean(np.abs(diff) ** 2)))
    peak = float(np.max(np.abs(b.data)))
    psnr = 20 * np.log10(peak / rms)
    return Metrics(rel_l2=rel_l2, psnr=min(float(psnr), PSNR_CAP_DB))


def pad_volume(v: Volume, pad: Tuple[int, int, int]) -> Volume:
    """Zero-pads pad[a] voxels on both sides of axis a."""
    if any(p < 0 for p in pad):
        raise ParameterError(f"padding must be non-negative, got {tuple(pad)}")
    return Volume(np.pad(v.data, [(p, p) for p in pad]), v.spacing)


def crop_volume(v: Volume, pad: Tuple[int, int, int]) -> Volume:
    """Inverse of pad_volume."""
    if any(p < 0 or 2 * p >= n for p, n in zip(pad, v.dims)):
        raise DimensionError(f"cannot crop {tuple(pad)} from both sides of {v.dims}")
    index = tuple(slice(p, n - p) for p, n in zip(pad, v.dims))
    return Volume(v.data[index].copy(), v.spacing)
