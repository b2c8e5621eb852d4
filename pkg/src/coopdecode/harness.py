"""Monte-Carlo BER/FER sweeps over Eb/N0 with paired frames and deterministic output."""

from __future__ import annotations

import concurrent.futures
import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .channel import frame_rng, sigma_from_ebn0
from .codes import LinearCode, alist_read, build_gallager_regular, build_hamming74, build_product_code, code_from_h
from .errors import ParameterError
from .ldpc_coop import CoopDecoderConfig, CooperativeDecoder, DecodeStatus
from .spa import SumProductDecoder

DECODERS = ("cooperative", "sum_product", "hard")
CSV_FIELDS = (
    "decoder", "ebn0_db", "frames", "bit_errors", "frame_errors", "ber", "fer",
    "ci_low", "ci_high", "mean_iters", "mean_ms", "consensus_rate", "mean_gap", "info_ber",
)
Z95 = NormalDist().inv_cdf(0.975)


@dataclass(frozen=True)
class SimConfig:
    code: str | None = "product:8:2"
    alist: str | None = None
    decoders: tuple[str, ...] = ("cooperative", "sum_product")
    ebn0: tuple[float, ...] = (2.0, 3.0, 4.0)
    frames: int = 1000
    target_errors: int | None = 50
    seed: int = 0
    workers: int = 1
    lam: float = 0.9
    max_iters_coop: int = 120
    max_iters_spa: int = 30
    consensus_window: int = 1
    chunk: int = 250
    out: str | None = None
    timing: bool = False

    def __post_init__(self):
        if not self.ebn0:
            raise ParameterError("Eb/N0 grid is empty")
        if self.frames < 1:
            raise ParameterError("frames must be >= 1")
        if self.workers < 1 or self.chunk < 1:
            raise ParameterError("workers and chunk must be >= 1")
        unknown = set(self.decoders) - set(DECODERS)
        if unknown or not self.decoders:
            raise ParameterError(f"unknown decoders {sorted(unknown)}; choose from {DECODERS}")
        if not 0.0 <= self.lam < 1.0:
            raise ParameterError("lambda must lie in [0, 1)")
        if self.max_iters_coop < 1 or self.max_iters_spa < 1:
            raise ParameterError("iteration caps must be >= 1")
        if self.target_errors is not None and self.target_errors < 1:
            object.__setattr__(self, "target_errors", None)
        if (self.code is None) == (self.alist is None):
            if self.alist is not None:
                object.__setattr__(self, "code", None)
            else:
                raise ParameterError("give exactly one of a code spec or an AList path")


def build_code(spec: str) -> LinearCode:
    """Parse 'product:SIDE:DIMS', 'gallager:N:WC:WR[:SEED]' or 'hamming74'."""
    parts = spec.strip().lower().split(":")
    try:
        if parts[0] == "product":
            side = int(parts[1]) if len(parts) > 1 else 8
            dims = int(parts[2]) if len(parts) > 2 else 2
            return build_product_code(side, dims)
        if parts[0] == "gallager":
            n, wc, wr = (int(p) for p in parts[1:4])
            seed = int(parts[4]) if len(parts) > 4 else 0
            return build_gallager_regular(n, wc, wr, seed)
        if parts[0] == "hamming74":
            return build_hamming74()
    except (IndexError, ValueError):
        pass
    raise ParameterError(f"cannot parse code spec {spec!r}")


def load_code(config: SimConfig) -> LinearCode:
    if config.alist:
        return code_from_h(alist_read(Path(config.alist).read_text()), family="alist", path=config.alist)
    return build_code(config.code)


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# -- frame generation and chunk work --------------------------------------


def draw_frames(code: LinearCode, seed: int, point: int, ebn0_db: float, start: int, stop: int):
    """Codewords and LLRs for frames [start, stop) of one grid point."""
    sigma = sigma_from_ebn0(ebn0_db, code.rate)
    info = np.empty((stop - start, code.dimension), dtype=np.uint8)
    noise = np.empty((stop - start, code.n))
    for row, frame in enumerate(range(start, stop)):
        rng = frame_rng(seed, point, frame)
        info[row] = rng.integers(0, 2, code.dimension, dtype=np.uint8)
        noise[row] = rng.standard_normal(code.n)
    x = code.encode(info)
    y = 2.0 * x - 1.0 + sigma * noise
    return info, x, 2.0 * y / (sigma * sigma)


_CACHE: dict = {}


def _workbench(config: SimConfig):
    stamp = Path(config.alist).stat().st_mtime_ns if config.alist else None
    key = (config.code, config.alist, stamp, config.lam, config.max_iters_coop,
           config.max_iters_spa, config.consensus_window)
    bench = _CACHE.get(key)
    if bench is None:
        code = load_code(config)
        decoders = {
            "cooperative": CooperativeDecoder(
                code, CoopDecoderConfig(config.lam, config.max_iters_coop, config.consensus_window)
            ),
            "sum_product": SumProductDecoder(code, config.max_iters_spa),
        }
        bench = _CACHE[key] = (code, decoders)
    return bench


def run_chunk(config: SimConfig, point: int, start: int, stop: int) -> dict:
    """Decode frames [start, stop) of one grid point with every configured decoder."""
    code, decoders = _workbench(config)
    info_pos = np.asarray(code.info_positions, dtype=np.int64)
    _, x, llr = draw_frames(code, config.seed, point, config.ebn0[point], start, stop)
    out = {}
    for name in config.decoders:
        t0 = time.perf_counter()
        if name == "hard":
            words = (llr > 0).astype(np.uint8)
            iters = np.zeros(len(words), dtype=np.int64)
            consensus = np.zeros(len(words), dtype=bool)
            gaps = np.full(len(words), np.nan)
        else:
            results = decoders[name].decode_batch(llr)
            words = np.array([r.codeword for r in results])
            iters = np.array([r.iterations for r in results], dtype=np.int64)
            consensus = np.array([r.status == DecodeStatus.CONSENSUS for r in results])
            gaps = np.array([np.nan if r.gap_certificate is None else r.gap_certificate for r in results])
        elapsed = time.perf_counter() - t0
        wrong = words != x
        out[name] = {
            "bit_errors": wrong.sum(axis=1),
            "info_errors": wrong[:, info_pos].sum(axis=1) if info_pos.size else np.zeros(len(x), dtype=np.int64),
            "iters": iters,
            "consensus": consensus,
            "gap": gaps,
            "seconds": elapsed,
        }
    return out


# -- sweep -----------------------------------------------------------------


@dataclass
class Cell:
    decoder: str
    ebn0_db: float
    frames: int
    bit_errors: int
    frame_errors: int
    ber: float
    fer: float
    ci_low: float
    ci_high: float
    mean_iters: float
    mean_ms: float
    consensus_rate: float
    mean_gap: float
    info_ber: float


@dataclass
class SweepResult:
    n: int
    dimension: int
    cells: list[Cell] = field(default_factory=list)
    config: SimConfig | None = None

    def cell(self, decoder: str, ebn0_db: float) -> Cell:
        for c in self.cells:
            if c.decoder == decoder and c.ebn0_db == ebn0_db:
                return c
        raise KeyError((decoder, ebn0_db))


def _cut_index(per_decoder: dict, target: int | None) -> int | None:
    """First frame count at which every decoder has reached ``target`` frame errors."""
    if target is None:
        return None
    worst = 0
    for rec in per_decoder.values():
        cum = np.cumsum(rec["bit_errors"] > 0)
        hit = np.searchsorted(cum, target)
        if hit >= len(cum):
            return None
        worst = max(worst, int(hit) + 1)
    return worst


def _merge(parts: list[dict], names) -> dict:
    merged = {}
    for name in names:
        merged[name] = {
            key: np.concatenate([p[name][key] for p in parts])
            for key in ("bit_errors", "info_errors", "iters", "consensus", "gap")
        }
        merged[name]["seconds"] = sum(p[name]["seconds"] for p in parts)
    return merged


def _point_records(config: SimConfig, point: int, pool) -> dict:
    bounds = [(s, min(s + config.chunk, config.frames)) for s in range(0, config.frames, config.chunk)]
    parts: list[dict] = []
    pending: list = []
    next_chunk = 0
    ahead = 2 * config.workers if pool else 1
    while True:
        while pool and next_chunk < len(bounds) and len(pending) < ahead:
            pending.append(pool.submit(run_chunk, config, point, *bounds[next_chunk]))
            next_chunk += 1
        if pool:
            if not pending:
                break
            part = pending.pop(0).result()
        else:
            if next_chunk >= len(bounds):
                break
            part = run_chunk(config, point, *bounds[next_chunk])
            next_chunk += 1
        parts.append(part)
        merged = _merge(parts, config.decoders)
        cut = _cut_index(merged, config.target_errors)
        if cut is not None:
            for f in pending:
                f.cancel()
            computed = len(merged[config.decoders[0]]["iters"])
            for rec in merged.values():
                for key in ("bit_errors", "info_errors", "iters", "consensus", "gap"):
                    rec[key] = rec[key][:cut]
                rec["seconds"] *= cut / computed
            return merged
    return _merge(parts, config.decoders)


def run_sweep(config: SimConfig) -> SweepResult:
    code = load_code(config)
    result = SweepResult(code.n, code.dimension, config=config)
    pool = concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for point, ebn0 in enumerate(config.ebn0):
            records = _point_records(config, point, pool)
            for name in config.decoders:
                rec = records[name]
                frames = len(rec["iters"])
                bit_errors = int(rec["bit_errors"].sum())
                frame_errors = int((rec["bit_errors"] > 0).sum())
                lo, hi = wilson_interval(frame_errors, frames)
                gaps = rec["gap"][~np.isnan(rec["gap"])]
                result.cells.append(Cell(
                    decoder=name,
                    ebn0_db=float(ebn0),
                    frames=frames,
                    bit_errors=bit_errors,
                    frame_errors=frame_errors,
                    ber=bit_errors / (frames * code.n),
                    fer=frame_errors / frames,
                    ci_low=lo,
                    ci_high=hi,
                    mean_iters=float(rec["iters"].mean()),
                    mean_ms=1000.0 * rec["seconds"] / frames,
                    consensus_rate=float(rec["consensus"].mean()),
                    mean_gap=float(gaps.mean()) if gaps.size else math.nan,
                    info_ber=int(rec["info_errors"].sum()) / (frames * code.dimension) if code.dimension else 0.0,
                ))
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)
    return result


# -- output ----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(result: SweepResult | None, path=None, timing: bool | None = None) -> str:
    """CSV text for a sweep; written to ``path`` when given.

    Wall-clock timing is left out (``nan``) unless requested, so that reruns
    produce identical files.
    """
    if timing is None:
        timing = bool(result and result.config and result.config.timing)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for c in (result.cells if result else []):
        row = asdict(c)
        if not timing:
            row["mean_ms"] = math.nan
        writer.writerow([_fmt(row[k]) for k in CSV_FIELDS])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(text: str) -> list[dict]:
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row = {}
        for key, value in raw.items():
            if key == "decoder":
                row[key] = value
            elif key in ("frames", "bit_errors", "frame_errors"):
                row[key] = int(value)
            else:
                row[key] = float(value)
        rows.append(row)
    return rows


def emit_plotdata(result: SweepResult, path=None) -> str:
    """One (Eb/N0, BER, FER) series per decoder, as JSON."""
    series = {}
    for c in result.cells:
        s = series.setdefault(c.decoder, {"ebn0_db": [], "ber": [], "fer": []})
        s["ebn0_db"].append(c.ebn0_db)
        s["ber"].append(c.ber)
        s["fer"].append(c.fer)
    doc = {"n": result.n, "dimension": result.dimension, "yscale": "log", "series": series}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def plotdata_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".plot.json")
