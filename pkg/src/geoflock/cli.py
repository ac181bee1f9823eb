"""Command line entry point."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, parse_config, preset
from .kernels import kernel_from_dict
from .manifolds import ManifoldSpec
from .oracle import format_report, oracle_phi, validate_kernel
from .runner import run


def _floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",")]


def _params(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"parameter {pair!r} is not key=value")
        out[key] = _floats(value) if "," in value else float(value)
    return out


def _add_kernel_args(p):
    p.add_argument("--manifold", default="flat_torus", help="euclidean, flat_torus, mobius_strip or klein_bottle")
    p.add_argument("--dimension", type=int, default=None)
    p.add_argument("--family", default="exponential", help="exponential, power_law or compact_polynomial")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="kernel parameter, repeatable; comma-separated values give a list")


def _kernel_and_manifold(args):
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
        data = data.get("config", data)
        m = data["manifold"]
        return kernel_from_dict(data["kernel"]), ManifoldSpec(m["kind"], m.get("dimension", 2))
    dimension = args.dimension
    if dimension is None:
        dimension = len(_floats(args.x)) if hasattr(args, "x") else 2
    kernel = kernel_from_dict({"family": args.family, "params": _params(args.param)})
    return kernel, ManifoldSpec(args.manifold, dimension)


def _load(args):
    if bool(args.config) == bool(args.preset):
        raise ConfigError("give exactly one of --config or --preset")
    config = parse_config(args.config) if args.config else preset(args.preset)
    if args.lanes is not None:
        config = dataclasses.replace(config, lanes=args.lanes)
    return config


def cmd_run(args) -> int:
    config = _load(args)
    out = args.out or f"runs/{args.preset or Path(args.config).stem}"
    manifest, code = run(config, out, assert_claims=args.assert_claims)
    if "error" in manifest:
        print(f"aborted: {manifest['error']}", file=sys.stderr)
        return code
    final = manifest["final_record"]
    print(f"wrote {out}  t={final['time']:g}  energy={final['energy']:.6g}  "
          f"diameter={final['velocity_diameter']:.3g}  wall={manifest['wall_clock_seconds']:.1f}s")
    if manifest["claims"]:
        for name, ok in manifest["claims"]["claims"].items():
            print(f"  {name}: {'met' if ok else 'not met'}")
        if manifest["claims"]["self_interaction"]:
            print(f"  {manifest['claims']['self_interaction']}")
    return code


def cmd_validate(args) -> int:
    kernel, manifold = _kernel_and_manifold(args)
    report = validate_kernel(kernel, manifold, args.strip_half_width)
    print(json.dumps(report, indent=2) if args.json else format_report(report))
    return 0


def cmd_oracle(args) -> int:
    kernel, manifold = _kernel_and_manifold(args)
    print(repr(oracle_phi(manifold, kernel, _floats(args.x), _floats(args.y), args.window)))
    return 0


def cmd_presets(args) -> int:
    if args.name:
        if args.name not in PRESETS:
            raise ConfigError(f"unknown preset {args.name!r}")
        print(json.dumps(PRESETS[args.name], indent=2))
    else:
        for name, data in PRESETS.items():
            m = data["manifold"]
            print(f"{name:16s} {m['kind']:13s} N={data.get('n_particles', 5)}  T={data.get('horizon', 10.0):g}  "
                  f"{data['kernel']['family']} {data['kernel']['params']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoflock", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a configuration and write series.csv / manifest.json")
    p.add_argument("--config", help="JSON configuration or a previous manifest.json")
    p.add_argument("--preset", help="name of a shipped scenario")
    p.add_argument("--out", help="output directory (default runs/<name>)")
    p.add_argument("--assert-claims", action="store_true", help="exit 2 if a convergence claim is not met")
    p.add_argument("--lanes", type=int, help="worker threads for the orbit sums")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate-kernel", help="summability verdict and lower-bound weight")
    _add_kernel_args(p)
    p.add_argument("--config", help="take kernel and manifold from a configuration file")
    p.add_argument("--strip-half-width", type=float, default=1.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle-phi", help="brute-force orbit sum over a translation window")
    _add_kernel_args(p)
    p.add_argument("--x", required=True, help="comma-separated coordinates")
    p.add_argument("--y", required=True, help="comma-separated coordinates")
    p.add_argument("--window", type=int, default=60)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("presets", help="list shipped scenarios or print one")
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
