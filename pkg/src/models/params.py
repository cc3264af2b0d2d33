from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator


class DcPolicy(str, Enum):
    SPLIT_REAL_MEAN = "split-real-mean"
    ZERO = "zero"


class AngularPart(str, Enum):
    CAKE = "cake"      # h_Re + h_Im
    REAL = "real"      # Funk-transformed window only (line detector)
    IMAG = "imag"      # anti-symmetrized window only (edge detector)
    PLAIN = "plain"    # the window itself (plate detector)


class ReconstructionMode(str, Enum):
    EXACT = "exact"
    APPROX = "approx"


class Stabilization(str, Enum):
    CLAMP = "clamp"
    MASK = "mask"


class SoftThresholdMode(str, Enum):
    PHASE = "phase"
    REAL_PART = "real-part"


class WaveletParams(BaseModel):
    """Cake-wavelet construction parameters; defaults are the crossing-tube settings."""
    L: int = Field(16, ge=1, le=64, description="Spherical-harmonic order of the angular fit")
    s_theta: float = Field(0.7, gt=0, description="Angular window scale in radians")
    k: int = Field(2, ge=0, description="B-spline order of the orientation window")
    N: int = Field(20, ge=0, description="Taylor order of the radial profile")
    gamma: float = Field(0.85, gt=0, lt=1, description="Inflection point as a fraction of Nyquist")
    grid: Tuple[int, int, int] = (32, 32, 32)
    dc_policy: DcPolicy = DcPolicy.SPLIT_REAL_MEAN
    angular: AngularPart = AngularPart.CAKE


class DiffusionParams(BaseModel):
    D11: float = Field(0.1, ge=0, description="Lateral spatial diffusivity (voxel^2/time)")
    D33: float = Field(1.0, ge=0, description="Spatial diffusivity along the orientation")
    D44: float = Field(0.02, ge=0, description="Angular diffusivity (rad^2/time)")
    t_end: float = Field(10.0, ge=0)
    dt: Optional[float] = Field(None, gt=0, description="Time step; derived from the stability bound when unset")


class Tube(BaseModel):
    point: Tuple[float, float, float]
    direction: Tuple[float, float, float]
    radius: float = Field(..., gt=0)
    intensity: float = 1.0

    @field_validator("direction")
    def direction_is_unit(cls, v):
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"tube direction must be a unit vector, got norm {norm:.6g}")
        return v


class PhantomSpec(BaseModel):
    tubes: List[Tube] = Field(..., min_length=1)


class Metrics(BaseModel):
    rel_l2: float = Field(..., description="||a - b|| / ||b||")
    psnr: float = Field(..., description="20 log10(peak(b) / rms(a - b)) in dB, capped")
