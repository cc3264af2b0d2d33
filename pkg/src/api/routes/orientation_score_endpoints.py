import os
import shutil
import uuid
from typing import List, Optional

from fastapi import APIRouter, Depends, File, Form, HTTPException, UploadFile
from fastapi.responses import Response
from pydantic import BaseModel, Field, ValidationError

from src.api.dependencies.auth import verify_api_key
from src.helper.errors import Orient3DError
from src.models.params import DiffusionParams, Metrics, ReconstructionMode, WaveletParams
from src.services.pipeline import OrientationScorePipeline

router = APIRouter(tags=["Orientation Scores"], dependencies=[Depends(verify_api_key)])

pipeline_service = OrientationScorePipeline()

UPLOAD_DIR = "/tmp"


class MpsiReportRequest(BaseModel):
    order: int = Field(1, ge=0, le=6, description="Icosahedron subdivision order; 1 gives 42 orientations.")
    params: WaveletParams = Field(default_factory=WaveletParams, description="Cake-wavelet parameters.")
    fraction: float = Field(0.8, gt=0, le=1, description="Upper end of the band as a fraction of Nyquist.")
    bins: int = Field(16, ge=1, le=256, description="Number of |w| shells.")


class BandRow(BaseModel):
    rho_lo: float
    rho_hi: float
    min: float
    mean: float
    max: float


class MpsiReportResponse(BaseModel):
    fraction: float
    global_min: float = Field(..., description="Smallest M_psi over 0 < |w| <= fraction * Nyquist")
    global_max: float
    rows: List[BandRow]


def _save_upload(upload: UploadFile) -> str:
    path = os.path.join(UPLOAD_DIR, f"{uuid.uuid4()}.os3d")
    with open(path, "wb") as buffer:
        shutil.copyfileobj(upload.file, buffer)
    return path


def _remove(*paths: Optional[str]) -> None:
    for path in paths:
        if path and os.path.exists(path):
            os.remove(path)


@router.post(
    "/wavelets/mpsi-report",
    response_model=MpsiReportResponse,
    summary="M_psi Band Profile",
    description="""Build (or reuse) a cake-wavelet stack and report how well every frequency band survives
the transform: min/mean/max of M_psi per |w| shell.

**Example with curl:**
```bash
curl -X POST "http://localhost:1999/wavelets/mpsi-report" \\
     -H "Content-Type: application/json" \\
     -H "X-API-Key: your-secret-api-key-here" \\
     -d '{"order": 1, "params": {"grid": [32, 32, 32]}, "fraction": 0.8}'
```
    """,
)
def mpsi_report(request: MpsiReportRequest):
    try:
        report = pipeline_service.mpsi_report(request.order, request.params, request.fraction, request.bins)
        return MpsiReportResponse(
            fraction=report.fraction,
            global_min=report.global_min,
            global_max=report.global_max,
            rows=[BandRow(rho_lo=r.rho_lo, rho_hi=r.rho_hi, min=r.minimum, mean=r.mean, max=r.maximum)
                  for r in report.rows],
        )
    except Orient3DError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@router.post(
    "/volumes/enhance",
    summary="Enhance Volume",
    description="""Upload a volume file (`orient3d phantom`/`noise` output) and get back the enhanced volume:
orientation score, left-invariant diffusion, optional soft threshold, reconstruction.

**Example with curl:**
```bash
curl -X POST "http://localhost:1999/volumes/enhance" \\
     -H "X-API-Key: your-secret-api-key-here" \\
     -F "volume=@noisy.vol" -F "t=10" -F "p=1.5" -o enhanced.vol
```
    """,
    response_class=Response,
    response_description="The enhanced volume in the orient3d binary format.",
)
def enhance_volume(
    volume: UploadFile = File(..., description="Volume file in the orient3d binary format"),
    order: int = Form(1, ge=0, le=6, description="Icosahedron subdivision order."),
    L: int = Form(16, ge=1, le=64, description="Spherical-harmonic order."),
    s_theta: float = Form(0.7, gt=0, description="Angular window scale (rad)."),
    D11: float = Form(0.1, ge=0),
    D33: float = Form(1.0, ge=0),
    D44: float = Form(0.02, ge=0),
    t: float = Form(10.0, ge=0, description="Diffusion stopping time."),
    p: Optional[float] = Form(None, gt=0, description="Soft-threshold exponent; off when omitted."),
    recon: ReconstructionMode = Form(ReconstructionMode.APPROX),
):
    input_path, output_path = None, None
    try:
        input_path = _save_upload(volume)
        output_path = os.path.join(UPLOAD_DIR, f"{uuid.uuid4()}.os3d")
        pipeline_service.enhance_file(
            input_path,
            output_path,
            order,
            WaveletParams(L=L, s_theta=s_theta),
            DiffusionParams(D11=D11, D33=D33, D44=D44, t_end=t),
            p,
            recon,
        )
        with open(output_path, "rb") as f:
            content = f.read()
        return Response(
            content=content,
            media_type="application/octet-stream",
            headers={"Content-Disposition": 'attachment; filename="enhanced.vol"'},
        )
    except (Orient3DError, ValidationError) as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
    finally:
        _remove(input_path, output_path)


@router.post(
    "/volumes/metrics",
    response_model=Metrics,
    summary="Compare Volumes",
    description="""Relative L2 error and PSNR of volume `a` against the reference `b`.

**Example with curl:**
```bash
curl -X POST "http://localhost:1999/volumes/metrics" \\
     -H "X-API-Key: your-secret-api-key-here" \\
     -F "a=@enhanced.vol" -F "b=@clean.vol"
```
    """,
)
def compare_volumes(
    a: UploadFile = File(..., description="Volume under test"),
    b: UploadFile = File(..., description="Reference volume"),
):
    a_path, b_path = None, None
    try:
        a_path, b_path = _save_upload(a), _save_upload(b)
        return pipeline_service.metrics_files(a_path, b_path)
    except Orient3DError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
    finally:
        _remove(a_path, b_path)
