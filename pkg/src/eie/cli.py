"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 format or capacity error, 3 failed
verification.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import bench, csc, cyclesim, energy, engine, formats
from .compress import build_codebook, prune_magnitude, quantize
from .errors import CapacityError, ConfigurationError, FormatError
from .fixedpoint import FixedPointFormat

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _emit(text: str, path: str | None):
    if path:
        formats.atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _write_output(a, path, fmt_name):
    if path:
        formats.write_activations(path, a, raw=(fmt_name == "raw"))
    else:
        sys.stdout.write(formats.format_activations_text(a))


def _tile_cols(cols: int, n_pe: int, reg_file_entries: int = 64):
    limit = n_pe * reg_file_entries
    return limit if cols > limit else None


def _load_inputs(args):
    model = formats.read_container(args.model)
    acts = formats.read_activations(args.activations, model.codebook.fmt)
    if len(acts) != model.cols:
        raise _Fail(EXIT_FORMAT, f"activation length {len(acts)} does not match model input size {model.cols}")
    return model, acts


def cmd_compress(args):
    w = formats.read_matrix_market(args.input)
    fmt = FixedPointFormat(args.fraction_bits)
    mask = prune_magnitude(w, args.density)
    cb = build_codebook(w, mask, fmt=fmt)
    q = quantize(w, mask, cb)
    tile = args.tile_cols if args.tile_cols else None
    e = csc.encode(q, args.pes, tile)
    formats.write_container(args.output, e)
    _, pad = csc.padding_stats(e)
    print(f"shape: {q.rows} x {q.cols}")
    print(f"density: {q.density:.6f} ({q.nnz} kept)")
    print(f"padding entries: {pad}")
    print("codebook: " + " ".join(repr(v) for v in cb.values.tolist()))
    return EXIT_OK


def cmd_run(args):
    model, acts = _load_inputs(args)
    out = engine.spmv_compressed(model, model.codebook, acts, apply_relu=args.relu)
    _write_output(out, args.out, args.format)
    return EXIT_OK


def _sim_config(args) -> cyclesim.SimConfig:
    return cyclesim.SimConfig(
        n_pe=args.pes,
        fifo_depth=args.fifo_depth,
        sram_width_bits=args.sram_width,
        broadcast_latency=args.broadcast_latency,
        clock_mhz=args.clock_mhz,
    )


def cmd_simulate(args):
    model, acts = _load_inputs(args)
    if args.pes is None:
        args.pes = model.n_pe
    cfg = _sim_config(args)
    if model.n_pe != cfg.n_pe:
        q = csc.decode(model)
        model = csc.encode(q, cfg.n_pe, _tile_cols(q.cols, cfg.n_pe, cfg.reg_file_entries))
    out, stats = cyclesim.simulate(model, model.codebook, acts, cfg, apply_relu=args.relu, method=args.method)
    _, eff = cyclesim.load_efficiency(stats)
    table = energy.EnergyTable.load(args.energy_table) if args.energy_table else energy.EnergyTable()
    report = energy.estimate_energy(stats, cfg, table)
    _write_output(out, args.out, args.format)
    if args.stats:
        formats.atomic_write(args.stats, formats.stats_to_csv(stats, cfg, eff))
    if args.json:
        formats.atomic_write(args.json, formats.stats_to_json(stats, cfg, eff, report))
    print(f"cycles {stats.total_cycles}  seconds {stats.seconds!r}  efficiency {eff:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args):
    names = bench.PRESET_NAMES if args.name == "all" else [args.name]
    os.makedirs(args.out_dir, exist_ok=True)
    for name in names:
        spec = bench.preset(name, seed=args.seed).scaled(args.in_dim, args.out_dim)
        q, a = bench.generate_synthetic(spec)
        e = csc.encode(q, args.pes, _tile_cols(q.cols, args.pes))
        model = os.path.join(args.out_dir, f"{name}.eiec")
        acts = os.path.join(args.out_dir, f"{name}.act.txt")
        formats.write_container(model, e)
        formats.write_activations(acts, a)
        print(f"{name}: {spec.out_dim} x {spec.in_dim}, {q.nnz} weights -> {model}, {acts}")
    return EXIT_OK


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty value list")
    return vals


def cmd_sweep(args):
    base = _sim_config(args)
    if args.preset:
        spec = bench.preset(args.preset, seed=args.seed).scaled(args.in_dim, args.out_dim)
        q, a = bench.generate_synthetic(spec)
        label = spec.name
    elif args.model and args.activations:
        model, a = _load_inputs(args)
        q = csc.decode(model)
        label = os.path.basename(args.model)
    else:
        raise _Fail(EXIT_USAGE, "sweep needs --preset or both --model and --activations")
    result = bench.sweep((q, a), base, args.axis, args.values, workers=args.workers)
    result.benchmark = label
    _emit(result.to_csv(), args.out)
    failed = [p for p in result.points if p.error]
    for p in failed:
        print(f"point {p.value}: {p.error}", file=sys.stderr)
    return EXIT_FORMAT if failed else EXIT_OK


def cmd_verify(args):
    with open(args.model, "rb") as fh:
        data = fh.read()
    try:
        e = formats.unpack_container(data)
    except FormatError as exc:
        raise _Fail(EXIT_VERIFY, f"verification failed: {exc}") from None
    q = csc.decode(e)
    tile = e.tile_cols if isinstance(e, csc.TiledCsc) else None
    again = csc.encode(q, e.n_pe, tile)
    if again != e:
        raise _Fail(EXIT_VERIFY, "verification failed: re-encoding the decoded matrix differs from the container")
    if formats.pack_container(again) != data:
        raise _Fail(EXIT_VERIFY, "verification failed: re-serialised container differs byte-wise")
    _, pad = csc.padding_stats(e)
    print(f"ok: {e.rows} x {e.cols}, {e.n_pe} PEs, {q.nnz} weights, {pad} padding entries")
    return EXIT_OK


def _add_sim_flags(p, pes_default=64):
    p.add_argument("--pes", type=int, default=pes_default)
    p.add_argument("--fifo-depth", type=int, default=8)
    p.add_argument("--sram-width", type=int, default=64)
    p.add_argument("--broadcast-latency", type=int, default=2)
    p.add_argument("--clock-mhz", type=float, default=800.0)


def _add_output_flags(p):
    p.add_argument("--relu", action="store_true", help="apply ReLU before write-back")
    p.add_argument("--out", help="output activation file (default: stdout)")
    p.add_argument("--format", choices=("text", "raw"), default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eie", description="Compressed sparse inference engine toolkit and simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compress", help="prune, quantize and encode a Matrix Market matrix")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--pes", type=int, default=64)
    p.add_argument("--fraction-bits", type=int, default=8)
    p.add_argument("--tile-cols", type=int, default=0, help="split the input into column tiles of this width")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("run", help="functional M x V on an EIEC model")
    p.add_argument("model")
    p.add_argument("activations")
    _add_output_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="cycle-level simulation of an EIEC model")
    p.add_argument("model")
    p.add_argument("activations")
    _add_sim_flags(p, pes_default=None)
    _add_output_flags(p)
    p.add_argument("--stats", help="write statistics CSV here")
    p.add_argument("--json", help="write statistics and energy JSON here")
    p.add_argument("--energy-table", help="JSON file of per-event energies in pJ")
    p.add_argument("--method", choices=("event", "cycle"), default="event")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="write synthetic benchmark layers")
    p.add_argument("name", choices=bench.PRESET_NAMES + ("all",))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--pes", type=int, default=64)
    p.add_argument("--in-dim", type=int)
    p.add_argument("--out-dim", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="sweep one simulator parameter")
    p.add_argument("--preset", choices=bench.PRESET_NAMES)
    p.add_argument("--model")
    p.add_argument("--activations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in-dim", type=int)
    p.add_argument("--out-dim", type=int)
    p.add_argument("--axis", required=True, choices=sorted(bench.AXES))
    p.add_argument("--values", required=True, type=_int_list)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="CSV output (default: stdout)")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check an EIEC container")
    p.add_argument("model")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"eie {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except (FormatError, CapacityError) as exc:
        print(f"eie {args.command}: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"eie {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"eie {args.command}: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
