"""`orient3d` command line: one subcommand per pipeline stage, files in between.

Every flag can also come from `--config file.toml`: top-level keys apply to all
subcommands, a table named after the subcommand to that one only. Flags given
on the command line win.
"""
import argparse
import json
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import uvicorn
from pydantic import ValidationError

from src import __version__
from src.config import get_config
from src.helper.errors import DimensionError, FormatError, Orient3DError, ParameterError
from src.helper.loggers import cli_logger
from src.models.containers import OrientationScore, Volume
from src.models.params import (
    AngularPart,
    DcPolicy,
    DiffusionParams,
    PhantomSpec,
    ReconstructionMode,
    SoftThresholdMode,
    Stabilization,
    WaveletParams,
)
from src.services import cakewavelet, fileio, lieops, oscore, phantoms, sh, sphere

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _provenance(args: argparse.Namespace, seed: Optional[int] = None) -> Dict[str, Any]:
    flags = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("handler", "config")}
    return fileio.manifest(args.command, flags, seed)


def _volume_kind(args: argparse.Namespace, v: Volume) -> str:
    return fileio.default_kind(v.data, double=getattr(args, "double", False))


def _wavelet_params(args: argparse.Namespace) -> WaveletParams:
    return WaveletParams(
        L=args.L,
        s_theta=args.stheta,
        k=args.k,
        N=args.N,
        gamma=args.gamma,
        grid=tuple(args.grid),
        dc_policy=args.dc_policy,
        angular=args.angular,
    )


def _diffusion_params(args: argparse.Namespace) -> DiffusionParams:
    return DiffusionParams(D11=args.D11, D33=args.D33, D44=args.D44, t_end=args.t, dt=args.dt)


def _check_stack_grid(v: Volume, stack) -> None:
    if v.dims != stack.grid:
        raise DimensionError(f"volume dims {v.dims} do not match wavelet grid {stack.grid}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_phantom(args: argparse.Namespace) -> int:
    dims = tuple(args.dims)
    if args.tubes:
        spec = PhantomSpec.model_validate_json(Path(args.tubes).read_text())
    else:
        spec = phantoms.crossing_tubes(dims, radius=args.radius)
    v = phantoms.phantom(spec, dims)
    fileio.write_volume(args.out, v, _volume_kind(args, v), _provenance(args))
    cli_logger.info(f"phantom: {len(spec.tubes)} tubes on {dims} -> {args.out}")
    return EXIT_OK


def cmd_noise(args: argparse.Namespace) -> int:
    v = fileio.read_volume(args.input)
    sigma = args.sigma * float(np.max(np.abs(v.data))) if args.relative else args.sigma
    noisy = phantoms.add_noise(v, sigma, args.seed)
    fileio.write_volume(args.out, noisy, _volume_kind(args, noisy), _provenance(args, seed=args.seed))
    cli_logger.info(f"noise: sigma={sigma:.6g}, seed={args.seed} -> {args.out}")
    return EXIT_OK


def cmd_make_wavelets(args: argparse.Namespace) -> int:
    orientation_set = sphere.icosphere(args.order)
    params = _wavelet_params(args)
    oscore.check_envelope(params.grid, len(orientation_set))
    stack = cakewavelet.build_wavelet_stack(orientation_set, params)
    fileio.write_stack(args.out, stack, _provenance(args))

    if args.orientations_csv:
        sphere.write_orientations_csv(orientation_set, args.orientations_csv)
    if args.dump_spectra:
        out_dir = Path(args.dump_spectra)
        out_dir.mkdir(parents=True, exist_ok=True)
        h_re, h_im = cakewavelet.angular_spectra(params)
        sh.write_spectrum_csv(cakewavelet.orientation_distribution(params), out_dir / "window.csv")
        sh.write_spectrum_csv(h_re, out_dir / "h_re.csv")
        sh.write_spectrum_csv(h_im, out_dir / "h_im.csv")
    if args.kernel_slices:
        out_dir = Path(args.kernel_slices)
        out_dir.mkdir(parents=True, exist_ok=True)
        kernel = cakewavelet.spatial_kernel(stack, args.kernel_index)
        for part, values in (("re", kernel.real), ("im", kernel.imag)):
            for axis, name in enumerate("xyz"):
                fileio.write_pgm(
                    out_dir / f"kernel{args.kernel_index:03d}_{part}_{name}.pgm",
                    fileio.extract_slice(values, axis),
                    {"orientation": args.kernel_index, "part": part, "axis": axis},
                )
    if args.patch:
        patch, deviation = cakewavelet.export_patch(stack, args.kernel_index, args.patch)
        patch_path = args.patch_out or f"{args.out}.patch{args.patch}"
        fileio.write_volume(patch_path, Volume(patch), "complex128", _provenance(args))
        print(json.dumps({"patch": str(patch_path), "m_psi_relative_deviation": deviation}))
    return EXIT_OK


def cmd_transform(args: argparse.Namespace) -> int:
    v = fileio.read_volume(args.input)
    stack = fileio.read_stack(args.wavelets)
    pad = tuple(args.pad)
    if any(pad):
        v = phantoms.pad_volume(v, pad)
    _check_stack_grid(v, stack)
    U = oscore.forward(v, stack)
    U = OrientationScore(U.data, U.orientation_set, U.spacing, U.real_source, pad)
    fileio.write_score(args.out, U, provenance=_provenance(args))
    cli_logger.info(f"transform: {len(stack)} orientations on {v.dims} -> {args.out}")
    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace) -> int:
    U = fileio.read_score(args.input)
    if args.recon is ReconstructionMode.EXACT:
        if not args.wavelets:
            raise ParameterError("exact reconstruction needs --wavelets")
        stack = fileio.read_stack(args.wavelets)
        v = oscore.reconstruct_exact(U, stack, args.eps, args.stabilization, args.strict, args.fraction)
    else:
        v = oscore.reconstruct_approx(U)
    if any(U.pad):
        v = phantoms.crop_volume(v, U.pad)
    fileio.write_volume(args.out, v, _volume_kind(args, v), _provenance(args))
    return EXIT_OK


def cmd_mpsi_report(args: argparse.Namespace) -> int:
    stack = fileio.read_stack(args.wavelets)
    report = oscore.stability_report(stack, args.fraction, args.bins)
    if args.out:
        oscore.write_stability_csv(report, args.out)
    print(json.dumps({"fraction": report.fraction, "global_min": report.global_min,
                      "global_max": report.global_max}))
    return EXIT_OK


def cmd_diffuse(args: argparse.Namespace) -> int:
    U = fileio.read_score(args.input)
    result = lieops.diffuse(U, U.orientation_set, _diffusion_params(args))
    fileio.write_score(args.out, result, provenance=_provenance(args))
    return EXIT_OK


def cmd_enhance(args: argparse.Namespace) -> int:
    v = fileio.read_volume(args.input)
    stack = fileio.read_stack(args.wavelets)
    _check_stack_grid(v, stack)
    mode = SoftThresholdMode.REAL_PART if args.real_part else SoftThresholdMode.PHASE
    enhanced = lieops.enhance(v, stack, _diffusion_params(args), args.p, args.recon, args.eps, mode)
    fileio.write_volume(args.out, enhanced, _volume_kind(args, enhanced), _provenance(args))
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    result = phantoms.metrics(fileio.read_volume(args.a), fileio.read_volume(args.b))
    print(result.model_dump_json())
    return EXIT_OK


def cmd_slice(args: argparse.Namespace) -> int:
    file_type = fileio.peek_type(args.input)
    if file_type == "volume":
        data = fileio.read_volume(args.input).data
    elif file_type == "score":
        U = fileio.read_score(args.input)
        if not 0 <= args.orientation < U.data.shape[0]:
            raise ParameterError(f"orientation {args.orientation} out of range for {U.data.shape[0]} channels")
        data = U.data[args.orientation]
    else:
        raise FormatError(f"{args.input}: cannot slice a {file_type} file")
    image = fileio.extract_slice(data, args.axis, args.index)
    fileio.write_pgm(args.out, image, {"source": str(args.input), "axis": args.axis, "index": args.index})
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    server = get_config().server
    uvicorn.run(
        "src.api.router:app",
        host=args.host,
        port=args.port or server.port,
        workers=server.workers,
        limit_concurrency=server.limit_concurrency,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_wavelet_flags(p: argparse.ArgumentParser) -> None:
    defaults = WaveletParams()
    p.add_argument("--order", type=int, default=1, help="icosahedron subdivision order (1 -> 42 orientations)")
    p.add_argument("--L", type=int, default=defaults.L, help="spherical-harmonic order")
    p.add_argument("--stheta", type=float, default=defaults.s_theta, help="angular window scale (rad)")
    p.add_argument("--k", type=int, default=defaults.k, help="B-spline order")
    p.add_argument("--N", type=int, default=defaults.N, help="radial Taylor order")
    p.add_argument("--gamma", type=float, default=defaults.gamma, help="radial inflection / Nyquist")
    p.add_argument("--grid", type=int, nargs=3, default=list(defaults.grid), metavar=("NX", "NY", "NZ"))
    p.add_argument("--dc-policy", type=DcPolicy, default=defaults.dc_policy, choices=[m.value for m in DcPolicy])
    p.add_argument("--angular", type=AngularPart, default=defaults.angular, choices=[m.value for m in AngularPart])


def _add_diffusion_flags(p: argparse.ArgumentParser) -> None:
    defaults = DiffusionParams()
    p.add_argument("--D11", type=float, default=defaults.D11)
    p.add_argument("--D33", type=float, default=defaults.D33)
    p.add_argument("--D44", type=float, default=defaults.D44)
    p.add_argument("--t", type=float, default=defaults.t_end, help="stopping time")
    p.add_argument("--dt", type=float, default=None, help="time step (default: stability bound)")


def _add_double_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--double", action="store_true", help="write 64-bit samples instead of 32-bit")


def build_parser(document: Optional[Dict[str, Any]] = None) -> argparse.ArgumentParser:
    """Full parser; document is a loaded --config file whose values become flag defaults."""
    parser = argparse.ArgumentParser(prog="orient3d", description="Invertible 3D orientation scores")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, help="TOML file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    subcommands: Dict[str, argparse.ArgumentParser] = {}

    def command(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        subcommands[name] = p
        return p

    p = command("phantom", cmd_phantom, "synthetic tube phantom")
    p.add_argument("--dims", type=int, nargs=3, default=[32, 32, 32], metavar=("NX", "NY", "NZ"))
    p.add_argument("--tubes", type=Path, help="JSON PhantomSpec (default: three crossing tubes)")
    p.add_argument("--radius", type=float, default=2.0, help="tube radius for the default phantom")
    p.add_argument("-o", "--out", required=True)
    _add_double_flag(p)

    p = command("noise", cmd_noise, "add seeded Gaussian noise")
    p.add_argument("-i", "--in", dest="input", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--relative", action="store_true", help="sigma is a fraction of the peak magnitude")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    _add_double_flag(p)

    p = command("make-wavelets", cmd_make_wavelets, "build a cake-wavelet stack")
    _add_wavelet_flags(p)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--dump-spectra", help="directory for window/h_re/h_im coefficient CSVs")
    p.add_argument("--orientations-csv", help="CSV of the orientation set")
    p.add_argument("--kernel-slices", help="directory for PGM slices of one spatial kernel")
    p.add_argument("--kernel-index", type=int, default=0)
    p.add_argument("--patch", type=int, default=0, help="export a windowed spatial patch of this size")
    p.add_argument("--patch-out")

    p = command("transform", cmd_transform, "volume -> orientation score")
    p.add_argument("-i", "--in", dest="input", required=True)
    p.add_argument("-w", "--wavelets", required=True)
    p.add_argument("--pad", type=int, nargs=3, default=[0, 0, 0], metavar=("PX", "PY", "PZ"))
    p.add_argument("-o", "--out", required=True)

    p = command("reconstruct", cmd_reconstruct, "orientation score -> volume")
    p.add_argument("-i", "--in", dest="input", required=True)
    p.add_argument("-w", "--wavelets")
    p.add_argument("--recon", type=ReconstructionMode, default=ReconstructionMode.EXACT,
                   choices=[m.value for m in ReconstructionMode])
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--stabilization", type=Stabilization, default=Stabilization.CLAMP,
                   choices=[m.value for m in Stabilization])
    p.add_argument("--strict", action="store_true", help="refuse when M_psi < eps inside the band")
    p.add_argument("--fraction", type=float, default=1.0, help="band checked by --strict, as a fraction of Nyquist")
    p.add_argument("-o", "--out", required=True)
    _add_double_flag(p)

    p = command("mpsi-report", cmd_mpsi_report, "M_psi band profile")
    p.add_argument("-w", "--wavelets", required=True)
    p.add_argument("--fraction", type=float, default=0.8)
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("-o", "--out", help="CSV output")

    p = command("diffuse", cmd_diffuse, "left-invariant diffusion of a score")
    p.add_argument("-i", "--in", dest="input", required=True)
    _add_diffusion_flags(p)
    p.add_argument("-o", "--out", required=True)

    p = command("enhance", cmd_enhance, "transform, diffuse, threshold and reconstruct")
    p.add_argument("-i", "--in", dest="input", required=True)
    p.add_argument("-w", "--wavelets", required=True)
    _add_diffusion_flags(p)
    p.add_argument("--p", type=float, default=None, help="soft-threshold exponent (off when unset)")
    p.add_argument("--real-part", action="store_true", help="threshold Re U only")
    p.add_argument("--recon", type=ReconstructionMode, default=ReconstructionMode.APPROX,
                   choices=[m.value for m in ReconstructionMode])
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("-o", "--out", required=True)
    _add_double_flag(p)

    p = command("metrics", cmd_metrics, "relative L2 error and PSNR of a against b")
    p.add_argument("a")
    p.add_argument("b")

    p = command("slice", cmd_slice, "PGM slice of a volume or score channel")
    p.add_argument("-i", "--in", dest="input", required=True)
    p.add_argument("--axis", type=int, default=2, choices=(0, 1, 2))
    p.add_argument("--index", type=int, default=None, help="default: middle slice")
    p.add_argument("--orientation", type=int, default=0, help="score channel")
    p.add_argument("-o", "--out", required=True)

    p = command("serve", cmd_serve, "run the HTTP API")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=None)

    for name, p in subcommands.items():
        _apply_config(p, name, document or {})
    return parser


def load_config(config_path: Path) -> Dict[str, Any]:
    try:
        with open(config_path, "rb") as f:
            return tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ParameterError(f"cannot load config {config_path}: {e}") from e


def _apply_config(p: argparse.ArgumentParser, name: str, document: Dict[str, Any]) -> None:
    known = {a.dest for a in p._actions} - {"help", "handler"}
    shared = {k.replace("-", "_"): v for k, v in document.items() if not isinstance(v, dict)}
    table = {k.replace("-", "_"): v for k, v in document.get(name, {}).items()}
    unknown = sorted(set(table) - known)
    if unknown:
        raise ParameterError(f"config keys not accepted by {name}: {', '.join(unknown)}")
    defaults = {k: v for k, v in shared.items() if k in known}
    defaults.update(table)
    if defaults:
        p.set_defaults(**defaults)
        for action in p._actions:
            if action.dest in defaults:
                action.required = False


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    document = load_config(known.config) if known.config else None
    return build_parser(document).parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = parse_args(argv)
        return args.handler(args)
    except Orient3DError as e:
        cli_logger.error(f"Error in {type(e).__name__}: {str(e)}")
        return e.exit_code
    except ValidationError as e:
        cli_logger.error(f"Error in parameters: {str(e)}")
        return EXIT_USAGE
    except OSError as e:
        cli_logger.error(f"Error in file access: {str(e)}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
