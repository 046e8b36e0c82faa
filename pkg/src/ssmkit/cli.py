"""Command-line access to the engine: inspect, sample, reconstruct, convert,
validate, serve.

Exit codes are a stable scripting contract: 0 success, 1 usage error,
2 data or validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SsmError
from .linalg import DEFAULT_RCOND
from .model import TriangleMesh, instance, mean_shape, sample_random
from .ply import ASCII, BINARY_LE, export_ply
from .posterior import load_observations, posterior_mean
from .statismo import BASIS_CONVENTIONS, load_statismo, save_statismo, validate_statismo

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    """Bad argument values; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; the contract says 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_model_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("model", help="path to a Statismo HDF5 model file")
    p.add_argument(
        "--basis-convention",
        choices=BASIS_CONVENTIONS,
        default="auto",
        help="override the stored-basis convention detection (default: auto)",
    )


def _load_model(args):
    path = Path(args.model)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    return load_statismo(path.read_bytes(), basis_convention=args.basis_convention)


def _ply_mode(args) -> str:
    return ASCII if args.format == "ascii" else BINARY_LE


def _write_mesh(mesh: TriangleMesh, args) -> None:
    Path(args.output).write_bytes(export_ply(mesh, _ply_mode(args)))


def cmd_info(args) -> int:
    model = _load_model(args)
    report = {
        "n_vertices": model.n_vertices,
        "n_components": model.n_components,
        "noise_variance": model.noise_variance,
        "variances": model.variances.tolist(),
        "metadata": dict(model.metadata),
    }
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"vertices:       {report['n_vertices']}")
        print(f"components:     {report['n_components']}")
        print(f"noise variance: {report['noise_variance']:.6g}")
        print(f"triangles:      {model.triangulation.shape[0]}")
        variances = ", ".join(f"{v:.6g}" for v in model.variances[:8])
        suffix = ", ..." if model.n_components > 8 else ""
        print(f"variances:      [{variances}{suffix}]")
        for key, value in sorted(model.metadata.items()):
            print(f"metadata {key}: {value}")
    return EXIT_OK


def cmd_sample(args) -> int:
    model = _load_model(args)
    if args.coeffs is not None:
        try:
            alpha = np.array([float(v) for v in args.coeffs.split(",") if v.strip() != ""])
        except ValueError as exc:
            raise UsageError(f"--coeffs must be comma-separated numbers: {exc}") from exc
        if alpha.size != model.n_components:
            raise UsageError(
                f"--coeffs has {alpha.size} values, model has {model.n_components} components"
            )
        mesh = instance(model, alpha)
    else:
        alpha, mesh = sample_random(model, args.seed)
    _write_mesh(mesh, args)
    if args.report:
        Path(args.report).write_text(json.dumps({"alpha": alpha.tolist()}, indent=2))
    return EXIT_OK


def cmd_posterior(args) -> int:
    model = _load_model(args)
    obs_path = Path(args.obs)
    if not obs_path.is_file():
        raise FileNotFoundError(f"observation file not found: {obs_path}")
    # the CLI is stateless, so "current shape" means the model mean
    current = mean_shape(model)
    obs, file_rcond = load_observations(obs_path.read_text(), current)
    rcond = args.rcond if args.rcond is not None else (file_rcond or DEFAULT_RCOND)
    if len(obs) == 0:
        print("warning: no observations given; emitting the mean shape", file=sys.stderr)
    mesh, alpha = posterior_mean(model, obs, rcond=rcond, current=current)
    _write_mesh(mesh, args)
    if args.report:
        Path(args.report).write_text(
            json.dumps(
                {"alpha": alpha.tolist(), "rcond": rcond, "n_observations": len(obs)},
                indent=2,
            )
        )
    return EXIT_OK


def cmd_validate(args) -> int:
    path = Path(args.model)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    report = validate_statismo(path.read_bytes())
    if report.ok:
        print(f"{path}: ok")
        return EXIT_OK
    for violation in report.violations:
        print(f"{path}: {violation}", file=sys.stderr)
    return EXIT_DATA


def cmd_convert(args) -> int:
    model = _load_model(args)
    Path(args.output).write_bytes(save_statismo(model))
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import ServiceConfig, run_server

    config = ServiceConfig.from_env(
        model_byte_limit=args.model_size_cap,
        session_ttl_seconds=args.session_ttl,
        default_rcond=args.rcond,
        posterior_sync_threshold=args.sync_threshold,
    )
    run_server(host=args.host, port=args.port, config=config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssmkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ssmkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="print model dimensions, variances and metadata")
    _add_model_arg(p)
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("sample", help="write a model instance as a PLY file")
    _add_model_arg(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--seed", type=int, default=0, help="seed for a random draw (default 0)")
    group.add_argument("--coeffs", help="comma-separated coefficients instead of sampling")
    p.add_argument("-o", "--output", required=True, help="output PLY path")
    p.add_argument("--format", choices=("ascii", "binary"), default="binary")
    p.add_argument("--report", help="also write the coefficients to this JSON path")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("posterior", help="reconstruct a full shape from observations")
    _add_model_arg(p)
    p.add_argument("--obs", required=True, help="observation JSON file")
    p.add_argument(
        "--rcond",
        type=float,
        default=None,
        help=f"pseudo-inverse cutoff relative to the largest singular value "
        f"(default: the observation file's value, else {DEFAULT_RCOND})",
    )
    p.add_argument("-o", "--output", required=True, help="output PLY path")
    p.add_argument("--format", choices=("ascii", "binary"), default="binary")
    p.add_argument("--report", help="write the solved coefficients to this JSON path")
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("validate", help="check a model file against the format contract")
    p.add_argument("model", help="path to a Statismo HDF5 model file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("convert", help="rewrite a model in the canonical format")
    _add_model_arg(p)
    p.add_argument("-o", "--output", required=True, help="output model path")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--host", default=os.environ.get("SSMKIT_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(os.environ.get("SSMKIT_PORT", "8080")))
    p.add_argument("--model-size-cap", type=int, default=None, help="upload limit in bytes")
    p.add_argument("--session-ttl", type=float, default=None, help="idle eviction in seconds")
    p.add_argument("--rcond", type=float, default=None, help="default pseudo-inverse cutoff")
    p.add_argument(
        "--sync-threshold",
        type=int,
        default=None,
        help="3N*M above which posterior solves run as background jobs",
    )
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ssmkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SsmError, OSError, ValueError) as exc:
        print(f"ssmkit: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
