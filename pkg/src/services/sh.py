"""Zonal spherical harmonics.

Convention: Y_l^0(theta) = sqrt((2l + 1) / 4pi) * P_l(cos theta), orthonormal on S^2.
Only m = 0 is needed: the Funk transform and anti-symmetrization keep a function
zonal, and a zonal function is steered to any axis n by evaluating it at n . w.
"""
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from src.helper.errors import DataError, DomainError, ResourceLimitError
from src.helper.loggers import harmonics_logger
from src.models.containers import ZonalSpectrum

MAX_FIT_ORDER = 64
_EDGE = 1e-12


def _zonal_norms(L: int) -> np.ndarray:
    l = np.arange(L + 1)
    return np.sqrt((2 * l + 1) / (4 * np.pi))


def legendre_table(L: int, x) -> np.ndarray:
    """P_0..P_L at x via the three-term recurrence; shape (L + 1,) + x.shape."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) > 1.0 + _EDGE):
        raise DomainError("Legendre argument outside [-1, 1]")
    x = np.clip(x, -1.0, 1.0)
    table = np.empty((L + 1,) + x.shape)
    table[0] = 1.0
    if L >= 1:
        table[1] = x
    for l in range(1, L):
        table[l + 1] = ((2 * l + 1) * x * table[l] - l * table[l - 1]) / (l + 1)
    return table


def legendre(l: int, x):
    if l < 0:
        raise DomainError(f"Legendre degree must be non-negative, got {l}")
    value = legendre_table(l, x)[l]
    return float(value) if value.ndim == 0 else value


def _zonal_sum(spec: ZonalSpectrum, cosines) -> np.ndarray:
    table = legendre_table(spec.L, cosines)
    weights = spec.coeffs * _zonal_norms(spec.L)
    return np.tensordot(weights, table, axes=(0, 0))


def eval_zonal(spec: ZonalSpectrum, theta):
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta < -_EDGE) or np.any(theta > np.pi + _EDGE):
        raise DomainError("polar angle outside [0, pi]")
    value = _zonal_sum(spec, np.cos(theta))
    return float(value) if value.ndim == 0 else value


def _sample(f: Callable, theta: np.ndarray) -> np.ndarray:
    try:
        values = np.asarray(f(theta), dtype=np.float64)
    except (TypeError, ValueError):
        values = None
    if values is None or values.shape != theta.shape:
        values = np.array([float(f(t)) for t in theta])
    return values


def fit_zonal(f: Callable, L: int) -> ZonalSpectrum:
    """Least-squares zonal coefficients of f(theta) by Gauss-Legendre quadrature in cos(theta)."""
    if L < 0:
        raise DomainError(f"order must be non-negative, got {L}")
    if L > MAX_FIT_ORDER:
        raise ResourceLimitError(f"fit order {L} exceeds the limit of {MAX_FIT_ORDER}")

    x, w = leggauss(4 * (L + 1))
    values = _sample(f, np.arccos(x))
    if not np.all(np.isfinite(values)):
        raise DataError("function to fit produced non-finite samples")

    table = legendre_table(L, x)
    coeffs = 2 * np.pi * _zonal_norms(L) * (table @ (w * values))
    harmonics_logger.debug(f"fit_zonal: L={L}, nodes={x.size}, c0={coeffs[0]:.6g}")
    return ZonalSpectrum(coeffs)


def funk(spec: ZonalSpectrum) -> ZonalSpectrum:
    """Funk transform as the coefficient map c_l -> 2 pi P_l(0) c_l."""
    p_at_zero = legendre_table(spec.L, 0.0)
    return ZonalSpectrum(2 * np.pi * p_at_zero * spec.coeffs)


def antisymmetrize(spec: ZonalSpectrum) -> ZonalSpectrum:
    """c_l -> (1 - (-1)^l) c_l: even orders vanish, odd orders double."""
    l = np.arange(spec.L + 1)
    return ZonalSpectrum((1 - (-1.0) ** l) * spec.coeffs)


def steer_zonal(spec: ZonalSpectrum, n, dirs) -> np.ndarray:
    """Zonal function rotated onto axis n, evaluated at unit vectors dirs (shape (..., 3))."""
    n = np.asarray(n, dtype=np.float64)
    if abs(np.linalg.norm(n) - 1.0) > 1e-10:
        raise DomainError(f"steering axis must be a unit vector, got norm {np.linalg.norm(n):.12g}")
    cosines = np.clip(np.asarray(dirs, dtype=np.float64) @ n, -1.0, 1.0)
    return _zonal_sum(spec, cosines)


def great_circle_integral(func: Callable, n, nodes: int = 512) -> float:
    """Trapezoidal integral of func over the great circle perpendicular to n.

    func takes an array of unit vectors of shape (nodes, 3).
    """
    n = np.asarray(n, dtype=np.float64)
    n = n / np.linalg.norm(n)
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    t = 2 * np.pi * np.arange(nodes) / nodes
    circle = np.outer(np.cos(t), u) + np.outer(np.sin(t), v)
    return float(2 * np.pi / nodes * np.sum(func(circle)))


def write_spectrum_csv(spec: ZonalSpectrum, path) -> None:
    table = np.column_stack([np.arange(spec.L + 1), spec.coeffs])
    np.savetxt(path, table, delimiter=",", header="l,c_l", comments="", fmt=["%d", "%.17g"])
