"""3D cake-wavelets synthesized on the DFT grid.

Frequencies are in radians per voxel, so the Nyquist radius is pi on every axis.
A filter is g(|w|) * h(n_i . w/|w|): g is the Gaussian times the Taylor
expansion of its reciprocal, h the steered angular part built from a B-spline
window A by Funk transform (even, line detector) and anti-symmetrization
(odd, edge detector).
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Tuple

import numpy as np
import scipy.fft
from scipy.interpolate import BSpline
from scipy.special import gammaincc

from src.config import get_config
from src.helper.errors import DimensionError, ParameterError
from src.helper.loggers import wavelet_logger
from src.helper.workers import fft_workers
from src.models.containers import OrientationSet, WaveletStack, ZonalSpectrum
from src.models.params import AngularPart, DcPolicy, WaveletParams
from src.services import sh

NYQUIST = np.pi
MIN_GRID = 8


def bspline(k: int, x):
    """Centered cardinal B-spline of order k (support |x| <= (k + 1) / 2, unit integral)."""
    knots = np.arange(k + 2) - (k + 1) / 2.0
    basis = BSpline.basis_element(knots, extrapolate=False)
    value = np.nan_to_num(basis(np.asarray(x, dtype=np.float64)), nan=0.0)
    return float(value) if value.ndim == 0 else value


def nyquist_radius(grid) -> float:
    """Smallest per-axis Nyquist frequency; pi rad/voxel for every axis length."""
    return NYQUIST


def radial_profile(rho, params: WaveletParams):
    """g(rho) = exp(-rho^2/t) sum_{q<=N} (rho^2/t)^q / q!, inflection at gamma * rho_N."""
    rho_n = nyquist_radius(params.grid)
    t = 2 * (params.gamma * rho_n) ** 2 / (1 + 2 * params.N)
    # regularized upper incomplete gamma Q(N+1, u) is exactly the truncated series
    value = gammaincc(params.N + 1, np.asarray(rho, dtype=np.float64) ** 2 / t)
    return float(value) if np.ndim(value) == 0 else value


def orientation_distribution(params: WaveletParams) -> ZonalSpectrum:
    return sh.fit_zonal(lambda theta: bspline(params.k, theta / params.s_theta), params.L)


def angular_spectra(params: WaveletParams) -> Tuple[ZonalSpectrum, ZonalSpectrum]:
    """(h_Re, h_Im): Funk transform and anti-symmetrization of the fitted window."""
    window = orientation_distribution(params)
    return sh.funk(window), sh.antisymmetrize(window)


def _angular_part(params: WaveletParams) -> Tuple[ZonalSpectrum, float]:
    window = orientation_distribution(params)
    h_re, h_im = sh.funk(window), sh.antisymmetrize(window)
    # one scale for every stack variant: orientation integral of h_Re equals 1
    scale = 1.0 / (np.sqrt(4 * np.pi) * h_re.coeffs[0])
    part = {
        AngularPart.CAKE: h_re + h_im,
        AngularPart.REAL: h_re,
        AngularPart.IMAG: h_im,
        AngularPart.PLAIN: window,
    }[params.angular]
    return part, float(scale)


def frequency_grid(grid) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Angular frequencies per axis in unshifted DFT order, as an open mesh."""
    axes = [2 * np.pi * scipy.fft.fftfreq(n) for n in grid]
    return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))


def nyquist_mask(grid) -> np.ndarray:
    """True on bins of even-length axes that sit on the unpaired Nyquist plane."""
    mask = np.zeros(tuple(grid), dtype=bool)
    for axis, n in enumerate(grid):
        if n % 2 == 0:
            index = [slice(None)] * 3
            index[axis] = n // 2
            mask[tuple(index)] = True
    return mask


def synthesis_workers(grid, L: int) -> int:
    """Filter-synthesis threads that fit the memory limit.

    Each thread holds an (L + 1) x grid Legendre table plus the cosines and the filter.
    """
    per_thread = (L + 3) * int(np.prod(grid)) * 8
    budget = int(get_config().memory_limit_gb * 1024 ** 3)
    return max(1, min(fft_workers(), budget // per_thread))


def build_wavelet_stack(orientation_set: OrientationSet, params: WaveletParams) -> WaveletStack:
    grid = tuple(params.grid)
    if len(grid) != 3 or min(grid) < MIN_GRID:
        raise DimensionError(f"wavelet grid must be 3D with at least {MIN_GRID} voxels per axis, got {grid}")

    h, scale = _angular_part(params)
    wx, wy, wz = frequency_grid(grid)
    rho = np.sqrt(wx ** 2 + wy ** 2 + wz ** 2)
    radial = radial_profile(rho, params)
    safe_rho = np.where(rho > 0, rho, 1.0)
    unit = np.stack(np.broadcast_arrays(wx / safe_rho, wy / safe_rho, wz / safe_rho), axis=-1)

    if params.dc_policy is DcPolicy.SPLIT_REAL_MEAN:
        # spherical mean of h; the odd part has none
        dc_value = radial_profile(0.0, params) * scale * h.coeffs[0] / np.sqrt(4 * np.pi)
    else:
        dc_value = 0.0

    unpaired = nyquist_mask(grid)
    filters = np.empty((len(orientation_set),) + grid)

    def synthesize(i: int) -> None:
        filt = radial * scale * sh.steer_zonal(h, orientation_set.directions[i], unit)
        filt[0, 0, 0] = dc_value
        filt[unpaired] = 0.0
        filters[i] = filt

    with ThreadPoolExecutor(max_workers=synthesis_workers(grid, params.L)) as pool:
        list(pool.map(synthesize, range(len(orientation_set))))

    m_psi = np.tensordot(orientation_set.weights, filters ** 2, axes=(0, 0))
    band = (rho > 0) & (rho <= 0.8 * nyquist_radius(grid))
    wavelet_logger.info(
        f"built {len(orientation_set)} cake-wavelets on {grid}: "
        f"M_psi in band [{m_psi[band].min():.4g}, {m_psi[band].max():.4g}]"
    )
    return WaveletStack(filters=filters, orientation_set=orientation_set, m_psi=m_psi,
                        params=params, angular_scale=scale)


def _check_index(stack: WaveletStack, i: int) -> None:
    if not 0 <= i < len(stack):
        raise ParameterError(f"orientation index {i} out of range for {len(stack)} filters")


def spatial_kernel(stack: WaveletStack, i: int) -> np.ndarray:
    """Centered, unitary inverse DFT of filter i."""
    _check_index(stack, i)
    kernel = scipy.fft.ifftn(stack.filters[i], norm="ortho", workers=fft_workers())
    return scipy.fft.fftshift(kernel)


def export_patch(stack: WaveletStack, i: int, size: int) -> Tuple[np.ndarray, float]:
    """Kernel i cropped to size^3 around the center under a raised-cosine window.

    Returns the patch and the relative change of M_psi that using the cropped
    kernels instead of the full-grid filters would cause (for inspection only).
    """
    _check_index(stack, i)
    grid = stack.grid
    if size < 1 or any(size > n for n in grid):
        raise DimensionError(f"patch size {size} does not fit grid {grid}")
    start = [n // 2 - size // 2 for n in grid]
    crop = tuple(slice(s, s + size) for s in start)
    ramp = 0.5 * (1 + np.cos(np.pi * np.linspace(-1, 1, size + 2)[1:-1]))
    window = ramp[:, None, None] * ramp[None, :, None] * ramp[None, None, :]

    def windowed_filter(j):
        full = np.zeros(grid, dtype=np.complex128)
        full[crop] = spatial_kernel(stack, j)[crop] * window
        return scipy.fft.fftn(scipy.fft.ifftshift(full), norm="ortho", workers=fft_workers())

    m_patch = np.zeros(grid)
    for j, w in enumerate(stack.orientation_set.weights):
        m_patch += w * np.abs(windowed_filter(j)) ** 2
    deviation = float(np.linalg.norm(m_patch - stack.m_psi) / np.linalg.norm(stack.m_psi))
    wavelet_logger.info(f"patch export: size={size}, relative M_psi deviation {deviation:.3g}")
    return spatial_kernel(stack, i)[crop] * window, deviation
