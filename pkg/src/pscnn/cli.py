"""pscnn command line.

Exit codes: 0 success, 1 usage or unreadable input, 2 validation or compile
error, 3 simulation error, 4 simulator/oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import zipfile
from pathlib import Path

import numpy as np

from . import isa
from .cim import VariationParams, monte_carlo_error_rate
from .compiler import CompileError, ValidationError
from .container import load_container, save_container
from .controller import (SimulationError, System, compute_throughput, load_cost_table,
                         model_energy, simulate)
from .memory import MemorySystemError
from .model import load_bits, load_model, save_bits, save_model
from .oracle import ref_infer

EXIT_OK, EXIT_USAGE, EXIT_COMPILE, EXIT_RUNTIME, EXIT_MISMATCH = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    env = os.environ.get("PSCNN_SEED")
    try:
        return int(env) if env else 0
    except ValueError:
        raise UsageError(f"PSCNN_SEED must be an integer, got {env!r}")


def _emit(doc, path) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# -- subcommands -------------------------------------------------------------

def cmd_compile(a) -> int:
    weights = a.weights or Path(a.model).with_suffix(".bin")
    model = load_model(a.model, weights)
    manifest = save_container(model, a.output)
    print(f"{a.output}: {manifest['macro_weights']} macro-resident weights, "
          f"{manifest['wsram_weights']} in weight SRAM ({manifest['wsram_rows']} rows), "
          f"{manifest['programs']['fused']['wrep']} WREP")
    return EXIT_OK


def cmd_asm(a) -> int:
    words = isa.assemble(Path(a.source).read_text())
    Path(a.output).write_bytes(isa.to_bytes(words))
    return EXIT_OK


def cmd_disasm(a) -> int:
    text = isa.disassemble(isa.from_bytes(Path(a.binary).read_bytes()))
    if a.output:
        Path(a.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _variation(a) -> VariationParams:
    return VariationParams(a.sigma, a.seed if a.seed is not None else _default_seed())


def cmd_run(a) -> int:
    var = _variation(a)
    costs = load_cost_table(a.cost_table) if a.cost_table else None
    if zipfile.is_zipfile(a.program):
        c = load_container(a.program)
        mm = c.mapped("unfused" if a.unfused else "fused")
        if a.input is None:
            raise UsageError("--input is required for a compiled container")
        x = load_bits(a.input, c.model.input_len, c.model.input_channels)
        stats, _ = simulate(mm, x, var, capture=False)
    else:
        # bare program: no layer table, so only PTR/WREP/HALT can run
        stats = System(isa.from_bytes(Path(a.program).read_bytes()), var=var).run()
    doc = stats.to_dict()
    doc["freq_hz"] = a.freq_hz
    doc["latency_s"] = stats.cycles / a.freq_hz
    doc["gops"] = compute_throughput(stats, a.freq_hz) if stats.cycles else 0.0
    if costs is not None:
        doc["energy_uJ"] = model_energy(stats, costs)
        doc["energy_note"] = "modeled, relative"
    _emit(doc, a.stats)
    return EXIT_OK


def cmd_compare(a) -> int:
    c = load_container(a.container)
    x = load_bits(a.input, c.model.input_len, c.model.input_channels)
    _, outs = simulate(c.mapped("unfused" if a.unfused else "fused"), x, _variation(a))
    ref = ref_infer(c.model, x)
    for i, r in enumerate(ref):
        got = outs.get(i)
        if got is None or got.shape != r.shape:
            print(f"layer {i}: shape {None if got is None else got.shape} != {r.shape}")
            return EXIT_MISMATCH
        bad = np.argwhere(got != r)
        if len(bad):
            pos, ch = bad[0]
            print(f"mismatch at layer {i}, position {pos}, channel {ch}: "
                  f"simulator {got[pos, ch]}, oracle {r[pos, ch]} ({len(bad)} bits differ)")
            return EXIT_MISMATCH
    print(f"all {len(ref)} layers match")
    return EXIT_OK


def cmd_margin(a) -> int:
    seed = a.seed if a.seed is not None else _default_seed()
    rows = monte_carlo_error_rate(a.rows, a.sigma_grid, a.trials, seed)
    keys = {"twm": ("twm_rate",), "bwm": ("bwm_rate",), "both": ("twm_rate", "bwm_rate")}[a.mode]
    table = []
    for sigma, twm, bwm in rows:
        rates = {"twm_rate": twm, "bwm_rate": bwm}
        table.append({"sigma": sigma, **{k: rates[k] for k in keys}})
    _emit({"rows": a.rows, "trials": a.trials, "seed": seed, "table": table}, a.output)
    return EXIT_OK


def cmd_kws(a) -> int:
    from .kws import kws_model
    out = Path(a.outdir)
    out.mkdir(parents=True, exist_ok=True)
    seed = a.seed if a.seed is not None else _default_seed()
    model = kws_model(seed)
    save_model(model, out / "kws.ini", out / "kws.bin")
    x = np.random.default_rng(seed).integers(0, 2, (model.input_len, model.input_channels))
    save_bits(out / "kws_input.bits", x)
    print(f"wrote {out / 'kws.ini'}, {out / 'kws.bin'}, {out / 'kws_input.bits'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pscnn", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sim_flags(sp):
        sp.add_argument("--sigma", type=float, default=0.0,
                        help="SA offset sigma in unit-cell currents (default 0)")
        sp.add_argument("--seed", type=int, default=None,
                        help="noise seed (default: $PSCNN_SEED, else 0)")
        sp.add_argument("--unfused", action="store_true",
                        help="run pooling as separate bypass passes")

    sp = sub.add_parser("compile", help="compile a model file into a container")
    sp.add_argument("model", help="model description (.ini)")
    sp.add_argument("--weights", help="sign-bit sidecar (default: model path with .bin)")
    sp.add_argument("-o", "--output", required=True, help="container path")
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("asm", help="assemble text into a program binary")
    sp.add_argument("source")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_asm)

    sp = sub.add_parser("disasm", help="disassemble a program binary")
    sp.add_argument("binary")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_disasm)

    sp = sub.add_parser("run", help="simulate a container or bare program and write stats")
    sp.add_argument("program", help="container (.zip) or bare program binary")
    sp.add_argument("--input", help="packed input bits (positions x channels)")
    sp.add_argument("--stats", help="stats JSON output (default stdout)")
    sp.add_argument("--freq-hz", type=float, default=10e6, help="clock for GOPS (default 10 MHz)")
    sp.add_argument("--cost-table", help="JSON of per-event energies in uJ")
    sim_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="check every layer against the reference model")
    sp.add_argument("container")
    sp.add_argument("--input", required=True)
    sim_flags(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("margin", help="Monte Carlo SA error rate vs offset sigma")
    sp.add_argument("--mode", choices=("twm", "bwm", "both"), default="both")
    sp.add_argument("--sigma-grid", type=_float_list, default=[0.0, 0.5, 1.0, 2.0, 4.0])
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--rows", type=int, default=1024, help="weights per column")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_margin)

    sp = sub.add_parser("kws", help="write the reconstructed KWS model and a random input")
    sp.add_argument("outdir")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_kws)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, IsADirectoryError) as e:
        print(f"pscnn: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, CompileError, isa.AssemblyError, isa.EncodingError) as e:
        print(f"pscnn: {e}", file=sys.stderr)
        return EXIT_COMPILE
    except (SimulationError, MemorySystemError, isa.DecodeError) as e:
        print(f"pscnn: simulation error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, KeyError) as e:
        print(f"pscnn: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
