"""Orientation-score transform and its inverses.

Discrete pipeline, everything in unshifted DFT layout with scipy's default
("backward") normalization:

    forward:        U_i = IDFT( conj(Psi_i) * DFT(f) )
    M_psi:          sum_i w_i |Psi_i|^2
    exact inverse:  DFT(f) = sum_i w_i Psi_i * DFT(U_i) / max(M_psi, eps)

The continuous (2 pi)^{3/2} constants cancel in this pair and are not carried.
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.fft

from src.config import get_config
from src.helper.errors import DimensionError, ParameterError, ResourceLimitError, StabilityError
from src.helper.loggers import score_logger
from src.helper.workers import fft_workers
from src.models.containers import OrientationScore, Volume, WaveletStack
from src.models.params import Stabilization
from src.services.cakewavelet import frequency_grid, nyquist_mask, nyquist_radius

MAX_ORIENTATIONS = 162
MAX_GRID = 128
_SPATIAL = (1, 2, 3)


def check_envelope(grid, n_orientations: int) -> None:
    """Refuse score sizes outside the supported envelope or the configured memory limit."""
    if n_orientations > MAX_ORIENTATIONS:
        raise ResourceLimitError(f"{n_orientations} orientations exceed the supported {MAX_ORIENTATIONS}")
    if max(grid) > MAX_GRID:
        raise ResourceLimitError(f"grid {tuple(grid)} exceeds the supported {MAX_GRID}^3")
    needed_gb = n_orientations * int(np.prod(grid)) * 16 / 1024 ** 3
    limit_gb = get_config().memory_limit_gb
    if needed_gb > limit_gb:
        raise ResourceLimitError(
            f"score needs {needed_gb:.2f} GB, above the configured limit of {limit_gb:.2f} GB"
        )


def _check_grid(grid, stack: WaveletStack) -> None:
    if tuple(grid) != stack.grid:
        raise DimensionError(f"grid {tuple(grid)} does not match wavelet stack grid {stack.grid}")


def _rho(grid) -> np.ndarray:
    wx, wy, wz = frequency_grid(grid)
    return np.sqrt(wx ** 2 + wy ** 2 + wz ** 2)


def default_epsilon(stack: WaveletStack) -> float:
    return 1e-8 * float(stack.m_psi.max())


def forward(f: Volume, stack: WaveletStack) -> OrientationScore:
    _check_grid(f.dims, stack)
    check_envelope(f.dims, len(stack))
    spectrum = scipy.fft.fftn(f.data, workers=fft_workers())
    data = scipy.fft.ifftn(np.conj(stack.filters) * spectrum[None], axes=_SPATIAL, workers=fft_workers())
    score_logger.debug(f"forward: {len(stack)} orientations on {f.dims}")
    return OrientationScore(data=data, orientation_set=stack.orientation_set, spacing=f.spacing,
                            real_source=not f.is_complex)


def _to_volume(spectrum: np.ndarray, U: OrientationScore) -> Volume:
    data = scipy.fft.ifftn(spectrum, workers=fft_workers())
    if U.real_source:
        data = data.real
    return Volume(data, U.spacing)


def reconstruct_exact(
    U: OrientationScore,
    stack: WaveletStack,
    eps: Optional[float] = None,
    stabilization: Stabilization = Stabilization.CLAMP,
    strict: bool = False,
    fraction: float = 1.0,
) -> Volume:
    """Exact discrete inverse on {M_psi >= eps}.

    clamp divides by max(M_psi, eps); mask drops frequencies with M_psi < eps.
    strict refuses when M_psi falls below eps anywhere in 0 < |w| <= fraction * rho_N.
    """
    _check_grid(U.grid, stack)
    eps = default_epsilon(stack) if eps is None else eps
    if eps <= 0:
        raise ParameterError(f"stabilization epsilon must be positive, got {eps}")
    if strict:
        report = stability_report(stack, fraction=fraction, bins=1)
        if report.global_min < eps:
            raise StabilityError(
                f"M_psi drops to {report.global_min:.3g} below eps={eps:.3g} within "
                f"{fraction:g} of Nyquist; exact reconstruction would be unstable"
            )

    spectra = scipy.fft.fftn(U.data, axes=_SPATIAL, workers=fft_workers())
    weights = U.orientation_set.weights[:, None, None, None]
    numerator = np.sum(weights * stack.filters * spectra, axis=0)
    if stabilization is Stabilization.MASK:
        keep = stack.m_psi >= eps
        spectrum = np.where(keep, numerator / np.where(keep, stack.m_psi, 1.0), 0.0)
    else:
        spectrum = numerator / np.maximum(stack.m_psi, eps)
    return _to_volume(spectrum, U)


def reconstruct_approx(U: OrientationScore) -> Volume:
    """f(x) ~ sum_i w_i U(x, n_i); valid when the filters integrate to one over orientations."""
    data = np.tensordot(U.orientation_set.weights, U.data, axes=(0, 0))
    if U.real_source:
        data = data.real
    return Volume(data, U.spacing)


def m_inner_product(U: OrientationScore, V: OrientationScore, stack: WaveletStack,
                    eps: Optional[float] = None) -> complex:
    """(U, V)_M = sum_i w_i <M^-1/2 U_i^, M^-1/2 V_i^> over {M_psi >= eps}, conjugate-linear in U.

    Normalized so that (W f, W g)_M equals np.vdot(f, g) for f, g supported where M_psi >= eps.
    """
    _check_grid(U.grid, stack)
    _check_grid(V.grid, stack)
    eps = default_epsilon(stack) if eps is None else eps
    keep = stack.m_psi >= eps
    masked = int(keep.size - np.count_nonzero(keep))
    if masked:
        score_logger.debug(f"m_inner_product: {masked} frequencies below eps={eps:.3g} left out")
    u_hat = scipy.fft.fftn(U.data, axes=_SPATIAL, workers=fft_workers())[:, keep]
    v_hat = scipy.fft.fftn(V.data, axes=_SPATIAL, workers=fft_workers())[:, keep]
    per_orientation = np.sum(np.conj(u_hat) * v_hat / stack.m_psi[keep], axis=1)
    n_voxels = int(np.prod(U.grid))
    return complex(np.dot(U.orientation_set.weights, per_orientation) / n_voxels)


def m_norm(U: OrientationScore, stack: WaveletStack, eps: Optional[float] = None) -> float:
    return float(np.sqrt(max(m_inner_product(U, U, stack, eps).real, 0.0)))


def project(U: OrientationScore, stack: WaveletStack, eps: Optional[float] = None) -> OrientationScore:
    """Orthogonal projection onto the range of the transform: forward(reconstruct_exact(U))."""
    complex_view = OrientationScore(U.data, U.orientation_set, U.spacing, False, U.pad)
    f = reconstruct_exact(complex_view, stack, eps, stabilization=Stabilization.MASK)
    return U.with_data(forward(f, stack).data)


def ball_limit(f: Volume, fraction: float) -> Volume:
    """Zero every DFT coefficient with |w| > fraction * rho_N."""
    if not 0 < fraction <= 1:
        raise ParameterError(f"ball fraction must lie in (0, 1], got {fraction}")
    spectrum = scipy.fft.fftn(f.data, workers=fft_workers())
    spectrum[_rho(f.dims) > fraction * nyquist_radius(f.dims)] = 0.0
    data = scipy.fft.ifftn(spectrum, workers=fft_workers())
    return Volume(data if f.is_complex else data.real, f.spacing)


@dataclass(frozen=True)
class BandRow:
    rho_lo: float
    rho_hi: float
    minimum: float
    mean: float
    maximum: float


@dataclass(frozen=True)
class StabilityReport:
    rows: List[BandRow]
    global_min: float
    global_max: float
    fraction: float


def stability_report(stack: WaveletStack, fraction: float = 1.0, bins: int = 16) -> StabilityReport:
    """M_psi statistics per |w| shell over 0 < |w| <= fraction * rho_N.

    Unpaired Nyquist-plane bins carry no filter response by construction and are left out.
    """
    if not 0 < fraction <= 1:
        raise ParameterError(f"band fraction must lie in (0, 1], got {fraction}")
    if bins < 1:
        raise ParameterError(f"need at least one bin, got {bins}")
    rho = _rho(stack.grid)
    top = fraction * nyquist_radius(stack.grid)
    band = (rho > 0) & (rho <= top) & ~nyquist_mask(stack.grid)
    edges = np.linspace(0.0, top, bins + 1)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        shell = band & (rho > lo) & (rho <= hi)
        if not np.any(shell):
            continue
        values = stack.m_psi[shell]
        rows.append(BandRow(float(lo), float(hi), float(values.min()), float(values.mean()), float(values.max())))
    report = StabilityReport(rows, float(stack.m_psi[band].min()), float(stack.m_psi[band].max()), fraction)
    score_logger.info(
        f"M_psi over 0 < |w| <= {fraction:g} rho_N: min={report.global_min:.4g}, max={report.global_max:.4g}"
    )
    return report


def write_stability_csv(report: StabilityReport, path) -> None:
    table = np.array([[r.rho_lo, r.rho_hi, r.minimum, r.mean, r.maximum] for r in report.rows])
    footer = f"global_min,{report.global_min:.17g}\nglobal_max,{report.global_max:.17g}"
    np.savetxt(path, table, delimiter=",", header="rho_lo,rho_hi,min,mean,max", footer=footer,
               comments="", fmt="%.17g")
