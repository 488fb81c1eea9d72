"""Command line interface.

Four commands share one option vocabulary:

* ``plan``    print the slot footprint, batch capacity, and offsets
* ``run``     execute a batch and print the full inference report
* ``verify``  compare against the plaintext oracle, optionally sweeping scales
* ``bench``   print per-layer operation counts, optionally sweeping the budget

Exit codes: 0 on success, 1 on input/output or parse problems, 2 on
validation failures or a failed verification.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import engine, packing
from .errors import ParseError, SlotCnnError
from .he_backend import HEParams
from .model import ModelSpec, builtin, builtin_names, load_model, validate

__all__ = ["main"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--model", metavar="PATH", help="JSON model description to load")
    source.add_argument("--builtin", metavar="NAME", help=f"built-in model ({', '.join(builtin_names())})")
    parser.add_argument("--params", metavar="PATH", help="JSON parameter file (defaults used otherwise)")
    parser.add_argument("--depth", type=int, help="override the multiplicative level budget")
    parser.add_argument("--scale-bits", type=int, help="override the fixed-point precision")
    parser.add_argument("--quantize", action="store_true", help="turn fixed-point quantization on")
    parser.add_argument("--seed", type=int, default=0, help="seed for built-in weights and random inputs")
    parser.add_argument("--align", type=int, default=1, help="round the footprint up to this alignment")
    parser.add_argument("--report", metavar="PATH", help="also write the report to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slotcnn",
        description="Compile CNN models to slot-parallel ciphertext schedules and run them on an exact simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="compute the packing plan")
    _add_common(p_plan)
    p_plan.add_argument("--format", choices=("json", "csv"), default="json")

    p_run = sub.add_parser("run", help="run encrypted inference on a batch")
    _add_common(p_run)
    p_run.add_argument("--input", metavar="PATH", help="JSON or CSV file with input samples")
    p_run.add_argument("--batch", type=int, help="number of samples (random if no --input)")
    p_run.add_argument("--format", choices=("json", "csv"), default="json")

    p_verify = sub.add_parser("verify", help="compare against the plaintext oracle")
    _add_common(p_verify)
    p_verify.add_argument("--trials", type=int, default=20, help="number of random samples to check")
    p_verify.add_argument("--tol", type=float, default=1e-6, help="maximum tolerated absolute error")
    p_verify.add_argument(
        "--scale-sweep",
        metavar="BITS,BITS,...",
        help="rerun with quantization at each precision and report the error trend",
    )

    p_bench = sub.add_parser("bench", help="per-layer operation counts and cost")
    _add_common(p_bench)
    p_bench.add_argument("--format", choices=("json", "csv"), default="csv")
    p_bench.add_argument(
        "--depth-sweep",
        metavar="D,D,...",
        help="report the estimated cost at each level budget instead of per-layer counts",
    )
    return parser


def _load_params(args) -> HEParams:
    fields = {}
    if args.params:
        try:
            with open(args.params, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ParseError(f"cannot read parameter file {args.params}: {err}") from err
        if not isinstance(data, dict):
            raise ParseError("parameter file must contain a JSON object")
        fields.update(data)
    if args.depth is not None:
        fields["depth"] = args.depth
    if getattr(args, "scale_bits", None) is not None:
        fields["scale_bits"] = args.scale_bits
    if args.quantize:
        fields["quantize"] = True
    try:
        return HEParams.from_dict(fields) if fields else HEParams()
    except (TypeError, ValueError) as err:
        raise ParseError(f"bad parameters: {err}") from err


def _load_model(args) -> ModelSpec:
    if args.builtin:
        return builtin(args.builtin, seed=args.seed)
    return load_model(args.model)


def _samples_from_json(data, m: ModelSpec):
    if not isinstance(data, dict) or "samples" not in data:
        raise ParseError('input file must contain an object with a "samples" list')
    samples = []
    for i, entry in enumerate(data["samples"]):
        if entry and isinstance(entry[0], (int, float)):
            channels = [entry]
        else:
            channels = entry
        if len(channels) != m.channels:
            raise ParseError(f"sample {i} has {len(channels)} channels, model expects {m.channels}")
        plane = []
        for vec in channels:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.size != m.height * m.width:
                raise ParseError(f"sample {i} channel has {arr.size} values, model expects {m.height * m.width}")
            plane.append(arr.reshape(m.height, m.width))
        samples.append(np.stack(plane))
    return samples


def _load_samples(path, m: ModelSpec):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ParseError(f"cannot read input file {path}: {err}") from err
    if path.endswith(".json") or text.lstrip().startswith(("{", "[")):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ParseError(f"cannot parse input file {path}: {err}") from err
        return _samples_from_json(data, m)
    if m.channels != 1:
        raise ParseError("CSV input supports single-channel models only; use JSON for multi-channel samples")
    samples = []
    for i, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            arr = np.asarray([float(v) for v in line.split(",")], dtype=np.float64)
        except ValueError as err:
            raise ParseError(f"bad CSV value on line {i + 1}: {err}") from err
        if arr.size != m.height * m.width:
            raise ParseError(f"CSV line {i + 1} has {arr.size} values, model expects {m.height * m.width}")
        samples.append(arr.reshape(1, m.height, m.width))
    if not samples:
        raise ParseError(f"input file {path} contains no samples")
    return samples


def _random_samples(m: ModelSpec, count: int, seed: int):
    rng = np.random.default_rng(seed + 1)
    return list(rng.uniform(0.0, 1.0, size=(count, m.channels, m.height, m.width)))


def _emit(text: str, report_path) -> None:
    print(text)
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _csv_table(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue().rstrip("\n")


def _print_violations(report) -> None:
    for v in report.violations:
        where = "model" if v["layer"] is None else f"layer {v['layer']}"
        print(f"invalid ({where}, {v['rule']}): {v['message']}", file=sys.stderr)


def cmd_plan(args) -> int:
    m = _load_model(args)
    params = _load_params(args)
    report = validate(m, params)
    if not report.ok:
        _print_violations(report)
        return EXIT_INVALID
    plan = packing.footprint(m, params, args.align)
    if args.format == "csv":
        rows = [(e["layer"], e["slots"]) for e in plan.per_layer_sizes]
        rows.append(("footprint", plan.footprint))
        rows.append(("capacity", plan.capacity))
        _emit(_csv_table(rows, ("layer", "slots")), args.report)
    else:
        _emit(json.dumps(plan.to_dict(), indent=2), args.report)
    return EXIT_OK


def _report_csv(metrics) -> str:
    header = ("layer", "rotations", "pt_mults", "ct_mults", "adds", "level_after", "est_cost")
    rows = [
        (r.name, r.rotations, r.pt_mults, r.ct_mults, r.adds, r.level_after, r.est_cost)
        for r in metrics.per_layer
    ]
    totals = metrics.totals()
    rows.append(
        ("totals", totals["rotations"], totals["pt_mults"], totals["ct_mults"], totals["adds"], "", totals["est_cost"])
    )
    return _csv_table(rows, header)


def cmd_run(args) -> int:
    m = _load_model(args)
    params = _load_params(args)
    report = validate(m, params)
    if not report.ok:
        _print_violations(report)
        return EXIT_INVALID
    plan = packing.footprint(m, params, args.align)
    if args.input:
        samples = _load_samples(args.input, m)
        if args.batch is not None:
            samples = samples[: args.batch]
    else:
        samples = _random_samples(m, args.batch or 1, args.seed)
    outputs, metrics, plan = engine.run_inference(m, samples, params, plan=plan)
    if args.format == "csv":
        _emit(_report_csv(metrics), args.report)
    else:
        doc = {
            "model": m.name,
            "params": params.to_dict(),
            "plan": plan.to_dict(),
            **metrics.to_dict(),
            "outputs": [out.tolist() for out in outputs],
        }
        _emit(json.dumps(doc, indent=2), args.report)
    return EXIT_OK


def cmd_verify(args) -> int:
    m = _load_model(args)
    params = _load_params(args)
    report = validate(m, params)
    if not report.ok:
        _print_violations(report)
        return EXIT_INVALID
    result = engine.verify_against_oracle(m, params, n_trials=args.trials, seed=args.seed, tol=args.tol, alignment=args.align)
    doc = {"model": m.name, "params": params.to_dict(), **result}
    ok = result["ok"]
    if args.scale_sweep:
        try:
            scales = [int(s) for s in args.scale_sweep.split(",") if s.strip()]
        except ValueError as err:
            raise ParseError(f"bad --scale-sweep value: {err}") from err
        sweep = []
        for bits in scales:
            q_params = HEParams.from_dict({**params.to_dict(), "quantize": True, "scale_bits": bits})
            q_result = engine.verify_against_oracle(m, q_params, n_trials=args.trials, seed=args.seed, tol=args.tol, alignment=args.align)
            sweep.append({"scale_bits": bits, "mean_abs_err": q_result["mean_abs_err"], "max_abs_err": q_result["max_abs_err"]})
        errors = [entry["mean_abs_err"] for entry in sweep]
        doc["scale_sweep"] = sweep
        doc["error_decreases_with_precision"] = all(b < a for a, b in zip(errors, errors[1:]))
    _emit(json.dumps(doc, indent=2), args.report)
    print(("PASS" if ok else "FAIL") + f": max |err| {result['max_abs_err']:.3e} vs tolerance {args.tol:.3e}")
    return EXIT_OK if ok else EXIT_INVALID


def cmd_bench(args) -> int:
    m = _load_model(args)
    params = _load_params(args)
    report = validate(m, params)
    if not report.ok:
        _print_violations(report)
        return EXIT_INVALID
    plan = packing.footprint(m, params, args.align)
    samples = _random_samples(m, 1, args.seed)
    _, metrics, _ = engine.run_inference(m, samples, params, plan=plan)
    if args.depth_sweep:
        try:
            depths = [int(d) for d in args.depth_sweep.split(",") if d.strip()]
        except ValueError as err:
            raise ParseError(f"bad --depth-sweep value: {err}") from err
        rows = [(d, engine.estimate_cost(metrics, params, depth_override=d)) for d in depths]
        if args.format == "json":
            _emit(json.dumps([{"depth": d, "est_cost": c} for d, c in rows], indent=2), args.report)
        else:
            _emit(_csv_table(rows, ("depth", "est_cost")), args.report)
        return EXIT_OK
    layer_rows = [r for r in metrics.per_layer if r.name != "Drop Level"]
    if args.format == "json":
        _emit(json.dumps([r.to_dict() for r in layer_rows], indent=2), args.report)
    else:
        header = ("layer", "rotations", "pt_mults", "ct_mults", "adds", "level_after", "est_cost")
        rows = [
            (r.name, r.rotations, r.pt_mults, r.ct_mults, r.adds, r.level_after, r.est_cost)
            for r in layer_rows
        ]
        _emit(_csv_table(rows, header), args.report)
    return EXIT_OK


_COMMANDS = {"plan": cmd_plan, "run": cmd_run, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR
    except SlotCnnError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
