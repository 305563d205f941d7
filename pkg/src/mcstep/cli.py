"""Command-line surface: critvals, decide, risk-curve and verify.

Exit codes: 0 success, 1 verification check failure, 2 usage error,
3 data error.  Every command that writes a primary output can also write
a JSON manifest recording the resolved inputs, seeds and output digests;
re-running from the manifest reproduces the primary outputs byte for
byte (numbers are printed with 17 significant digits and reports carry
no timestamps).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__
from .critical_values import CriticalValues, SolverError, solve_constants
from .defaults import DEFAULT_MC_REPS, DEFAULT_SEED
from .model import ProblemSpec, Variant
from .procedures import DECIDE_BY_NAME, accept_everything, reject_everything
from .risk import risk_scalar, risk_vector
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_USAGE = 2
EXIT_DATA = 3


class DataError(Exception):
    """Malformed or inconsistent input data."""


class UsageError(Exception):
    """Invalid flag combination caught after parsing."""


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _sha256(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _write_manifest(path: str, command: str, params: dict, outputs: dict[str, bytes],
                    wall_clock: float) -> None:
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "params": params,
        "outputs": {name: _sha256(data) for name, data in outputs.items()},
        "wall_clock_seconds": wall_clock,
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _spec_from_args(args, k: int | None = None) -> ProblemSpec:
    return ProblemSpec(
        k=k if k is not None else args.k,
        sigma2=args.sigma2,
        rho=args.rho,
        b=args.b,
        alpha=args.alpha,
        variant=Variant(args.variant),
    )


_MODEL_DEFAULTS = dict(k=None, rho=0.0, sigma2=1.0, alpha=0.05, b=1.0,
                       variant="point", seed=DEFAULT_SEED, mc_reps=DEFAULT_MC_REPS)


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    # defaults stay None so an optional config file can fill unset flags;
    # the true defaults are applied by _resolve after the merge
    parser.add_argument("--k", type=int, help="number of endpoints")
    parser.add_argument("--rho", type=float, help="common correlation")
    parser.add_argument("--sigma2", type=float, help="common variance")
    parser.add_argument("--alpha", type=float, help="target level")
    parser.add_argument("--b", type=float, help="false-acceptance loss weight")
    parser.add_argument("--variant", choices=["point", "composite"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--mc-reps", dest="mc_reps", type=int)
    parser.add_argument("--config", help="json file mirroring the flags; flags win")


def _resolve(args, defaults: dict, required: tuple[str, ...] = ()) -> argparse.Namespace:
    """Merge explicit flags over config-file values over built-in defaults."""
    config = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="ascii") as fh:
            config = json.load(fh)
        unknown = sorted(set(config) - set(defaults))
        if unknown:
            raise UsageError(f"config file has unknown keys {unknown}")
    merged = {}
    for key, default in defaults.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
        elif key in config:
            merged[key] = config[key]
        else:
            merged[key] = default
    for key in required:
        if merged.get(key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required (flag or config)")
    return argparse.Namespace(**merged)


def _cmd_critvals(args) -> int:
    started = time.monotonic()
    args = _resolve(args, {**_MODEL_DEFAULTS, "procedure": None, "method": "auto",
                           "out": None, "manifest": None},
                    required=("k", "procedure", "out"))
    spec = _spec_from_args(args)
    constants = solve_constants(args.procedure, spec, mc_reps=args.mc_reps,
                                seed=args.seed, method=args.method)
    record = constants.to_record_text().encode("ascii")
    with open(args.out, "wb") as fh:
        fh.write(record)
    if args.manifest:
        params = dict(procedure=args.procedure, k=spec.k, rho=spec.rho,
                      sigma2=spec.sigma2, alpha=spec.alpha, seed=args.seed,
                      mc_reps=args.mc_reps, method=args.method, out=args.out)
        _write_manifest(args.manifest, "critvals", params, {args.out: record},
                        time.monotonic() - started)
    sys.stdout.write(record.decode("ascii"))
    return EXIT_OK


def _read_decision_input(path: str, k: int) -> list[np.ndarray]:
    rows: list[np.ndarray] = []
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        return rows
    expected_header = ",".join(f"z{i + 1}" for i in range(k))
    if lines[0].strip() != expected_header:
        raise DataError(
            f"line 1: expected header {expected_header!r}, got {lines[0].strip()!r}"
        )
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != k:
            raise DataError(f"line {lineno}: expected {k} fields, got {len(parts)}")
        try:
            rows.append(np.array([float(p) for p in parts]))
        except ValueError as exc:
            raise DataError(f"line {lineno}: non-numeric value ({exc})") from exc
    return rows


def _load_constants(path: str) -> CriticalValues:
    try:
        return CriticalValues.load(path)
    except ValueError as exc:
        raise DataError(f"bad constants file {path}: {exc}") from exc


def _cmd_decide(args) -> int:
    started = time.monotonic()
    args = _resolve(args, {"constants": None, "infile": None, "out": None,
                           "manifest": None},
                    required=("constants", "infile", "out"))
    constants = _load_constants(args.constants)
    decide = DECIDE_BY_NAME[constants.provenance.value]
    rows = _read_decision_input(args.infile, constants.k)
    header = ",".join(f"z{i + 1}" for i in range(constants.k)) + "," + \
        ",".join(f"a{i + 1}" for i in range(constants.k))
    lines = [header]
    if rows:
        Z = np.vstack(rows)
        actions = decide(Z, constants)
        for z, a in zip(Z, actions):
            lines.append(",".join(_g17(x) for x in z) + "," + ",".join(str(int(v)) for v in a))
    output = ("\n".join(lines) + "\n").encode("ascii")
    with open(args.out, "wb") as fh:
        fh.write(output)
    if args.manifest:
        params = dict(constants=args.constants, infile=args.infile, out=args.out)
        _write_manifest(args.manifest, "decide", params, {args.out: output},
                        time.monotonic() - started)
    return EXIT_OK


def _parse_mu_grid(text: str, k: int) -> np.ndarray:
    """Grid spec: one comma-separated entry per axis, either a number or
    start:stop:step (stop inclusive up to rounding)."""
    parts = text.split(",")
    if len(parts) != k:
        raise UsageError(f"--mu-grid needs {k} comma-separated entries, got {len(parts)}")
    axes = []
    for part in parts:
        if ":" in part:
            pieces = part.split(":")
            if len(pieces) != 3:
                raise UsageError(f"bad grid axis {part!r}, expected start:stop:step")
            start, stop, step = (float(p) for p in pieces)
            if step <= 0 or stop < start:
                raise UsageError(f"bad grid axis {part!r}: need step > 0 and stop >= start")
            axes.append(np.arange(start, stop + step / 2, step))
        else:
            axes.append(np.array([float(part)]))
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.column_stack([m.ravel() for m in mesh])
    if grid.shape[0] == 0:
        raise UsageError("--mu-grid produced an empty grid")
    return grid


def _cmd_risk_curve(args) -> int:
    started = time.monotonic()
    args = _resolve(args, {**_MODEL_DEFAULTS, "procedure": None, "mu_grid": None,
                           "constants": None, "out": None, "manifest": None},
                    required=("k", "procedure", "mu_grid", "out"))
    spec = _spec_from_args(args)
    grid = _parse_mu_grid(args.mu_grid, spec.k)
    if args.procedure == "accept-all":
        tests = accept_everything
    elif args.procedure == "reject-all":
        tests = reject_everything
    else:
        if args.constants:
            constants = _load_constants(args.constants)
            if constants.k != spec.k:
                raise DataError(
                    f"constants file has k={constants.k}, expected {spec.k}")
        else:
            constants = solve_constants(args.procedure, spec, mc_reps=args.mc_reps,
                                        seed=args.seed)
        decide = DECIDE_BY_NAME[args.procedure]
        tests = lambda Z: decide(Z, constants)  # noqa: E731
    header = ",".join(f"mu{i + 1}" for i in range(spec.k)) + ",risk,se," + \
        ",".join(f"risk_{i + 1},se_{i + 1}" for i in range(spec.k))
    lines = [header]
    for idx, mu in enumerate(grid):
        scalar = risk_scalar(tests, mu, spec, mc_reps=args.mc_reps, seed=args.seed + idx)
        comps = risk_vector(tests, mu, spec, mc_reps=args.mc_reps, seed=args.seed + idx)
        cells = [_g17(x) for x in mu] + [_g17(scalar.mean), _g17(scalar.std_error)]
        for comp in comps:
            cells.extend([_g17(comp.mean), _g17(comp.std_error)])
        lines.append(",".join(cells))
    output = ("\n".join(lines) + "\n").encode("ascii")
    with open(args.out, "wb") as fh:
        fh.write(output)
    if args.manifest:
        params = dict(procedure=args.procedure, k=spec.k, rho=spec.rho,
                      sigma2=spec.sigma2, alpha=spec.alpha, b=spec.b,
                      variant=spec.variant.value, mu_grid=args.mu_grid,
                      seed=args.seed, mc_reps=args.mc_reps, out=args.out,
                      constants=args.constants)
        _write_manifest(args.manifest, "risk-curve", params, {args.out: output},
                        time.monotonic() - started)
    return EXIT_OK


_VERIFY_PARAM_KEYS = ("k", "rho", "alpha", "b", "seed", "mc_reps", "procedure", "epsilon")


def _cmd_verify(args) -> int:
    started = time.monotonic()
    if args.from_manifest:
        with open(args.from_manifest, "r", encoding="ascii") as fh:
            manifest = json.load(fh)
        if manifest.get("command") != "verify":
            raise UsageError("manifest does not describe a verify run")
        suite = manifest["suite"]
        params = manifest["params"]
    else:
        if not args.suite:
            raise UsageError("a suite name or --from-manifest is required")
        suite = args.suite
        merged = _resolve(args, {key: None for key in _VERIFY_PARAM_KEYS})
        params = {key: getattr(merged, key) for key in _VERIFY_PARAM_KEYS
                  if getattr(merged, key, None) is not None}
    result = run_suite(suite, **params)
    report = result.to_report_text().encode("ascii")
    sys.stdout.write(report.decode("ascii"))
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(report)
        manifest_path = args.manifest or (args.out + ".manifest.json")
        manifest = {
            "artifact_version": __version__,
            "command": "verify",
            "suite": suite,
            "params": params,
            "outputs": {args.out: _sha256(report)},
            "wall_clock_seconds": time.monotonic() - started,
        }
        with open(manifest_path, "w", encoding="ascii") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK if result.passed else EXIT_CHECK_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcstep",
        description="Stepwise multiple-comparison decision procedures and their "
                    "risk, Bayes and admissibility diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_crit = sub.add_parser("critvals", help="solve and record critical constants")
    _add_model_flags(p_crit)
    p_crit.add_argument("--procedure",
                        choices=["single-step", "step-down", "step-up", "per-comparison"])
    p_crit.add_argument("--method", choices=["auto", "mc", "closed-form"])
    p_crit.add_argument("--out")
    p_crit.add_argument("--manifest")
    p_crit.set_defaults(func=_cmd_critvals)

    p_dec = sub.add_parser("decide", help="apply a recorded procedure to observations")
    p_dec.add_argument("--constants", help="critical-values record file")
    p_dec.add_argument("--in", dest="infile", help="csv with header z1,...,zk")
    p_dec.add_argument("--out")
    p_dec.add_argument("--manifest")
    p_dec.add_argument("--config", help="json file mirroring the flags; flags win")
    p_dec.set_defaults(func=_cmd_decide)

    p_risk = sub.add_parser("risk-curve", help="tabulate risk over a mean grid")
    _add_model_flags(p_risk)
    p_risk.add_argument("--procedure",
                        choices=["single-step", "step-down", "step-up",
                                 "per-comparison", "accept-all", "reject-all"])
    p_risk.add_argument("--mu-grid", dest="mu_grid",
                        help="per-axis spec, e.g. 0:4:1,0 sweeps axis 1 and pins axis 2")
    p_risk.add_argument("--constants", help="reuse a critical-values record")
    p_risk.add_argument("--out")
    p_risk.add_argument("--manifest")
    p_risk.set_defaults(func=_cmd_risk_curve)

    p_ver = sub.add_parser("verify", help="run a named verification suite")
    p_ver.add_argument("suite", nargs="?", choices=sorted(SUITES))
    p_ver.add_argument("--k", type=int)
    p_ver.add_argument("--rho", type=float)
    p_ver.add_argument("--alpha", type=float)
    p_ver.add_argument("--b", type=float)
    p_ver.add_argument("--seed", type=int)
    p_ver.add_argument("--mc-reps", dest="mc_reps", type=int)
    p_ver.add_argument("--procedure",
                       choices=["single-step", "step-down", "step-up"])
    p_ver.add_argument("--epsilon", type=float)
    p_ver.add_argument("--config", help="json file mirroring the flags; flags win")
    p_ver.add_argument("--out", help="write the report here (plus a manifest)")
    p_ver.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    p_ver.add_argument("--from-manifest", help="re-run the suite recorded in a manifest")
    p_ver.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, SolverError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
