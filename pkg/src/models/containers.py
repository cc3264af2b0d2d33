from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from src.models.params import WaveletParams

Grid = Tuple[int, int, int]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Volume:
    """Scalar field on a voxel grid, indexed [x, y, z]."""
    data: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    @property
    def dims(self) -> Grid:
        return tuple(int(n) for n in self.data.shape)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    def real_part(self) -> "Volume":
        return Volume(np.real(self.data).copy(), self.spacing)


@dataclass(frozen=True)
class OrientationSet:
    """Directions on S^2 with quadrature weights and (optionally) mesh structure."""
    directions: np.ndarray
    weights: np.ndarray
    adjacency: Optional[Tuple[np.ndarray, ...]] = None
    faces: Optional[np.ndarray] = None
    antipode: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "directions", _frozen(np.asarray(self.directions, dtype=np.float64)))
        object.__setattr__(self, "weights", _frozen(np.asarray(self.weights, dtype=np.float64)))
        if self.adjacency is not None:
            object.__setattr__(
                self, "adjacency", tuple(_frozen(np.asarray(a, dtype=np.int64)) for a in self.adjacency)
            )
        if self.faces is not None:
            object.__setattr__(self, "faces", _frozen(np.asarray(self.faces, dtype=np.int64)))
        if self.antipode is not None:
            object.__setattr__(self, "antipode", _frozen(np.asarray(self.antipode, dtype=np.int64)))

    def __len__(self) -> int:
        return self.directions.shape[0]

    @classmethod
    def from_directions(cls, directions, weights=None) -> "OrientationSet":
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        if weights is None:
            weights = np.full(directions.shape[0], 4.0 * np.pi / directions.shape[0])
        return cls(directions=directions, weights=weights)


@dataclass(frozen=True)
class ZonalSpectrum:
    """Coefficients c_{l,0}, l = 0..L, in the orthonormal zonal basis."""
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(np.asarray(self.coeffs, dtype=np.float64).ravel()))

    @property
    def L(self) -> int:
        return self.coeffs.size - 1

    def __add__(self, other: "ZonalSpectrum") -> "ZonalSpectrum":
        size = max(self.coeffs.size, other.coeffs.size)
        return ZonalSpectrum(
            np.pad(self.coeffs, (0, size - self.coeffs.size)) + np.pad(other.coeffs, (0, size - other.coeffs.size))
        )

    def scaled(self, factor: float) -> "ZonalSpectrum":
        return ZonalSpectrum(self.coeffs * factor)


@dataclass(frozen=True)
class WaveletStack:
    """Fourier-domain filters, one per orientation, in unshifted DFT layout.

    Cake-wavelets are real in the Fourier domain, so filters are stored as real arrays.
    """
    filters: np.ndarray
    orientation_set: OrientationSet
    m_psi: np.ndarray
    params: WaveletParams
    angular_scale: float = 1.0

    @property
    def grid(self) -> Grid:
        return tuple(int(n) for n in self.filters.shape[1:])

    def __len__(self) -> int:
        return self.filters.shape[0]


@dataclass(frozen=True)
class OrientationScore:
    """Complex field U(x, n_i); data is indexed [i, x, y, z]."""
    data: np.ndarray
    orientation_set: OrientationSet
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    real_source: bool = False
    pad: Tuple[int, int, int] = field(default=(0, 0, 0))

    @property
    def grid(self) -> Grid:
        return tuple(int(n) for n in self.data.shape[1:])

    def with_data(self, data: np.ndarray) -> "OrientationScore":
        return OrientationScore(data, self.orientation_set, self.spacing, self.real_source, self.pad)
