"""Command-line driver.

Exit status: 0 on success, 1 on usage or I/O errors, 2 when the solver
aborts on a non-finite iterate.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import HpmfError, InvalidConfig, NonFinite
from .imaging import (
    SamplingSpec,
    load_image,
    make_observation,
    psnr,
    quantize,
    rse,
    save_image,
    ssim,
)
from .solver import PER_MODE_FIELDS, CompletionReport, HpmfConfig, run_hpmf

log = logging.getLogger("hpmf")

METRICS_HEADER = ("sr", "psnr", "rse", "ssim", "iterations", "seconds")
TRACE_HEADER = ("iteration", "relative_change", "objective", "seconds")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    input_path: Path
    output_path: Optional[Path]
    metrics_path: Optional[Path]
    sampling: SamplingSpec
    solver: HpmfConfig
    emit_trace: bool = False
    timing: bool = True


@dataclass
class SweepRow:
    sr: float
    psnr: float
    rse: float
    ssim: float
    iterations: int
    seconds: float

    def cells(self):
        return [_fmt(self.sr), _fmt(self.psnr), _fmt(self.rse), _fmt(self.ssim),
                str(self.iterations), _fmt(self.seconds)]


def _fmt(x: float) -> str:
    # repr of a float is locale-independent and spells infinity "inf"
    return repr(float(x))


def _parse_value(key: str, text: str):
    text = text.strip()
    if key == "rank_override":
        if text.lower() in ("", "none"):
            return None
        return tuple(int(t) for t in text.split(","))
    if key in PER_MODE_FIELDS:
        if key == "alpha" and text.lower() in ("", "none"):
            return None
        parts = [float(t) for t in text.split(",")]
        return parts[0] if len(parts) == 1 else tuple(parts)
    if key in ("max_iters", "seed"):
        return int(text)
    if key == "aux_init":
        return text
    return float(text)


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file whose keys are :class:`HpmfConfig` fields."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = Path(path).read_text()
    parser.read_string("[hpmf]\n" + text)
    known = {f.name for f in dataclasses.fields(HpmfConfig)}
    out = {}
    for key, value in parser["hpmf"].items():
        if key not in known:
            raise InvalidConfig(f"unknown configuration key {key!r} in {path}")
        try:
            out[key] = _parse_value(key, value)
        except ValueError as exc:
            raise InvalidConfig(f"bad value for {key!r}: {value!r}") from exc
    return out


def build_solver_config(args) -> HpmfConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    values = {}
    if args.config is not None:
        values.update(read_config_file(args.config))
    flags = {
        "delta": args.delta,
        "mu": args.mu,
        "max_iters": args.max_iters,
        "tol": args.tol,
        "seed": args.seed,
    }
    if args.rank is not None:
        flags["rank_override"] = _parse_value("rank_override", args.rank)
    values.update({k: v for k, v in flags.items() if v is not None})
    return HpmfConfig(**values)


def _sampling(args, cfg: HpmfConfig, sr: Optional[float]) -> SamplingSpec:
    if args.mask is not None:
        return SamplingSpec(kind="mask_file", mask_path=Path(args.mask), seed=cfg.seed)
    return SamplingSpec(kind="uniform_random", sr=0.2 if sr is None else sr, seed=cfg.seed)


def _solve(img, sampling: SamplingSpec, solver: HpmfConfig):
    problem = make_observation(img, sampling)
    start = time.perf_counter()
    report = run_hpmf(problem, solver)
    seconds = time.perf_counter() - start
    return problem, report, seconds


def _row(problem, report: CompletionReport, img, seconds: float, sampling: SamplingSpec):
    # metrics are computed on the 8-bit image actually written to disk
    recovered = quantize(report.recovered) / 255.0
    sr = sampling.sr if sampling.kind == "uniform_random" else problem.sampling_ratio
    return SweepRow(
        sr=sr,
        psnr=psnr(recovered, img),
        rse=rse(recovered, img),
        ssim=ssim(recovered, img),
        iterations=report.iterations,
        seconds=seconds,
    )


def _write_trace(path: Path, report: CompletionReport, timing: bool) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for rec in report.trace:
            writer.writerow([
                rec.iteration,
                _fmt(rec.relative_change),
                _fmt(rec.objective),
                _fmt(rec.wall_seconds if timing else 0.0),
            ])


def _open_csv(path: Optional[Path]):
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_complete(cfg: RunConfig) -> int:
    img = load_image(cfg.input_path)
    problem, report, seconds = _solve(img, cfg.sampling, cfg.solver)
    if cfg.output_path is not None:
        save_image(cfg.output_path, report.recovered)
    row = _row(problem, report, img, seconds if cfg.timing else 0.0, cfg.sampling)
    fh, owned = _open_csv(cfg.metrics_path)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        writer.writerow(row.cells())
    finally:
        if owned:
            fh.close()
    if cfg.emit_trace:
        base = cfg.metrics_path or cfg.output_path or Path("hpmf")
        _write_trace(base.with_name(base.stem + "_trace.csv"), report, cfg.timing)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, sr_list) -> int:
    """One completion per sampling ratio, rows written in ascending SR order.

    When ``cfg.output_path`` is set it is treated as a directory receiving
    one recovered image per ratio.
    """
    if not sr_list:
        raise UsageError("sweep needs at least one sampling ratio")
    # build every SamplingSpec first so a bad ratio fails before any solve runs
    specs = [dataclasses.replace(cfg.sampling, kind="uniform_random", sr=sr, mask_path=None)
             for sr in sorted(sr_list)]
    img = load_image(cfg.input_path)
    if cfg.output_path is not None:
        cfg.output_path.mkdir(parents=True, exist_ok=True)
    fh, owned = _open_csv(cfg.metrics_path)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        fh.flush()
        for sampling in specs:
            sr = sampling.sr
            problem, report, seconds = _solve(img, sampling, cfg.solver)
            row = _row(problem, report, img, seconds if cfg.timing else 0.0, sampling)
            writer.writerow(row.cells())
            fh.flush()
            log.info("sr=%s psnr=%.3f rse=%.4f iters=%d", sr, row.psnr, row.rse,
                     row.iterations)
            if cfg.output_path is not None:
                save_image(cfg.output_path / f"recovered_sr{sr:g}.png", report.recovered)
            if cfg.emit_trace:
                trace_dir = cfg.output_path or (cfg.metrics_path or Path("hpmf")).parent
                _write_trace(trace_dir / f"trace_sr{sr:g}.csv", report, cfg.timing)
    finally:
        if owned:
            fh.close()
    return EXIT_OK


def cmd_metrics(ref_path, est_path) -> int:
    ref = load_image(ref_path)
    est = load_image(est_path)
    if ref.shape != est.shape:
        raise UsageError(f"image sizes differ: {ref.shape[:2]} vs {est.shape[:2]}")
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow([_fmt(psnr(est, ref)), _fmt(rse(est, ref)), _fmt(ssim(est, ref))])
    return EXIT_OK


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, type=Path, help="8-bit PNG to complete")
    p.add_argument("--metrics-out", type=Path, help="metrics CSV (default: stdout)")
    p.add_argument("--mask", help="mask image; dark pixels are missing")
    p.add_argument("--seed", type=int)
    p.add_argument("--delta", type=float, help="rank-estimation threshold")
    p.add_argument("--mu", type=float, help="penalty growth factor")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--rank", help="per-mode ranks, e.g. 20,20,3")
    p.add_argument("--config", type=Path, help="key = value file of solver settings")
    p.add_argument("--trace", action="store_true", help="also write per-iteration CSV")
    p.add_argument("--no-timing", action="store_true",
                   help="write 0 in time columns so outputs are reproducible byte for byte")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hpmf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("complete", help="complete one image")
    _add_solver_flags(p)
    p.add_argument("--output", type=Path, help="recovered PNG")
    p.add_argument("--sr", type=float, help="sampling ratio in (0, 1] (default 0.2)")

    p = sub.add_parser("sweep", help="complete one image at several sampling ratios")
    _add_solver_flags(p)
    p.add_argument("--output", type=Path, help="directory for recovered PNGs")
    p.add_argument("--sr", required=True, help="comma-separated sampling ratios")

    p = sub.add_parser("metrics", help="print psnr,rse,ssim of EST against REF")
    p.add_argument("ref", type=Path)
    p.add_argument("est", type=Path)
    return parser


def _run_config(args, sr) -> RunConfig:
    solver = build_solver_config(args)
    return RunConfig(
        input_path=args.input,
        output_path=args.output,
        metrics_path=args.metrics_out,
        sampling=_sampling(args, solver, sr),
        solver=solver,
        emit_trace=args.trace,
        timing=not args.no_timing,
    )


def _sr_list(text: str):
    items = [t for t in text.split(",") if t.strip()]
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise UsageError(f"bad sampling ratio list {text!r}") from exc


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "complete":
            return cmd_complete(_run_config(args, args.sr))
        if args.command == "sweep":
            srs = _sr_list(args.sr)
            return cmd_sweep(_run_config(args, srs[0] if srs else None), srs)
        return cmd_metrics(args.ref, args.est)
    except NonFinite as exc:
        print(f"hpmf: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, HpmfError, OSError, ValueError) as exc:
        print(f"hpmf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
