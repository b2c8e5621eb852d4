"""Command-line entry point: ``coopdecode sweep|rank|gen``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from .codes import alist_read, alist_write, rank_gf2
from .errors import CoopDecodeError
from .harness import SimConfig, build_code, emit_csv, emit_plotdata, plotdata_path, run_sweep

# config-file key -> SimConfig field
_SWEEP_KEYS = {
    "code": "code",
    "alist": "alist",
    "decoders": "decoders",
    "ebn0": "ebn0",
    "frames": "frames",
    "target_errors": "target_errors",
    "seed": "seed",
    "workers": "workers",
    "lambda": "lam",
    "max_iters_coop": "max_iters_coop",
    "max_iters_spa": "max_iters_spa",
    "consensus_window": "consensus_window",
    "chunk": "chunk",
    "out": "out",
    "timing": "timing",
}


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in str(text).replace(",", " ").split())


def _names(text: str) -> tuple[str, ...]:
    return tuple(t for t in str(text).replace(",", " ").split())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


_CONVERT = {
    "decoders": _names,
    "ebn0": _floats,
    "frames": int,
    "target_errors": int,
    "seed": int,
    "workers": int,
    "lam": float,
    "max_iters_coop": int,
    "max_iters_spa": int,
    "consensus_window": int,
    "chunk": int,
    "timing": _bool,
}


def read_config_file(path) -> dict:
    """``key = value`` (or ``key: value``) lines; keys match the sweep flags."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        if sep not in line:
            raise CoopDecodeError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split(sep, 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in _SWEEP_KEYS:
            raise CoopDecodeError(f"{path}:{lineno}: unknown key {key!r}")
        values[_SWEEP_KEYS[key]] = value
    return values


def _sweep_config(args) -> SimConfig:
    values: dict = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key, name in _SWEEP_KEYS.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[name] = flag_value
    if "alist" in values and "code" not in values:
        values["code"] = None
    converted = {}
    allowed = {f.name for f in fields(SimConfig)}
    for name, value in values.items():
        if name not in allowed:
            continue
        if value is not None and name in _CONVERT and not isinstance(value, (tuple, bool)):
            value = _CONVERT[name](value)
        converted[name] = value
    return SimConfig(**converted)


def _cmd_sweep(args) -> int:
    config = _sweep_config(args)
    result = run_sweep(config)
    text = emit_csv(result)
    if config.out:
        Path(config.out).write_text(text)
        emit_plotdata(result, plotdata_path(config.out))
        print(f"wrote {config.out} and {plotdata_path(config.out)}", file=sys.stderr)
    print(f"code n={result.n} k={result.dimension}")
    print(f"{'decoder':<12} {'Eb/N0':>6} {'frames':>7} {'BER':>11} {'FER':>11} {'iters':>7} {'consensus':>9}")
    for c in result.cells:
        print(f"{c.decoder:<12} {c.ebn0_db:>6.2f} {c.frames:>7d} {c.ber:>11.3e} {c.fer:>11.3e} "
              f"{c.mean_iters:>7.2f} {c.consensus_rate:>9.3f}")
    return 0


def _cmd_rank(args) -> int:
    h = alist_read(Path(args.alist).read_text())
    r = rank_gf2(h)
    print(f"n={h.n} rows={h.rows} rank={r} dimension={h.n - r}")
    return 0


def _cmd_gen(args) -> int:
    code = build_code(args.code)
    text = alist_write(code.h)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}: n={code.n} rows={code.h.rows} dimension={code.dimension}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopdecode", description="Cooperative and sum-product LDPC decoding tools")
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="Monte-Carlo BER/FER sweep over Eb/N0")
    sw.add_argument("--config", help="key = value file; flags override it")
    sw.add_argument("--code", help="product:SIDE:DIMS | gallager:N:WC:WR[:SEED] | hamming74")
    sw.add_argument("--alist", help="parity-check matrix in AList format")
    sw.add_argument("--decoders", help="comma list from cooperative,sum_product,hard")
    sw.add_argument("--ebn0", help="comma list of Eb/N0 values in dB")
    sw.add_argument("--frames", type=int, help="frames per grid point (cap when --target-errors is set)")
    sw.add_argument("--target-errors", dest="target_errors", type=int,
                    help="stop a point once every decoder has this many frame errors; 0 disables")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--workers", type=int)
    sw.add_argument("--lambda", dest="lambda", type=float, help="cooperation strength in [0, 1)")
    sw.add_argument("--max-iters-coop", dest="max_iters_coop", type=int)
    sw.add_argument("--max-iters-spa", dest="max_iters_spa", type=int)
    sw.add_argument("--consensus-window", dest="consensus_window", type=int)
    sw.add_argument("--chunk", type=int, help="frames per work unit")
    sw.add_argument("--out", help="CSV path; plot data goes next to it as *.plot.json")
    sw.add_argument("--timing", action="store_true", default=None, help="fill mean_ms with wall-clock time")
    sw.set_defaults(func=_cmd_sweep)

    rk = sub.add_parser("rank", help="GF(2) rank and dimension of an AList matrix")
    rk.add_argument("--alist", required=True)
    rk.set_defaults(func=_cmd_rank)

    gn = sub.add_parser("gen", help="construct a code and write its AList")
    gn.add_argument("--code", required=True)
    gn.add_argument("--out")
    gn.set_defaults(func=_cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CoopDecodeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
