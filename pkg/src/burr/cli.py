"""Command line: build, query and benchmark bumped ribbon retrieval structures."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, plotting
from .config import BuildConfig, ParallelOptions, Strategy, ThresholdMode
from .filter import RibbonFilter, may_contain
from .hashing import fingerprint, fingerprints, hash_keys, master_hash
from .serialize import StructureFileError, load, save
from .structure import ConstructionError, construct, query

log = logging.getLogger("burr")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--r", type=int, default=8, help="bits per value (1..16)")
    p.add_argument("--w", type=int, default=64, choices=(16, 32, 64), help="ribbon width")
    p.add_argument("--b", type=int, default=128, help="bucket size in slots")
    p.add_argument("--mode", default="1plus", choices=[m.value for m in ThresholdMode])
    p.add_argument("--overload", type=float, default=0.05)
    p.add_argument("--layers", type=int, default=4, help="bumping layers before the base layer")
    p.add_argument("--seed", type=int, default=0)


def _add_parallel_args(p: argparse.ArgumentParser, threads=True):
    if threads:
        p.add_argument("--threads", type=int, default=1)
    p.add_argument("--minbpt", type=int, default=1000, help="minimum buckets per thread")
    p.add_argument("--strategy", default="nosearch", choices=[s.value for s in Strategy])
    p.add_argument("--search-range", type=int, default=50)


def _add_report_args(p: argparse.ArgumentParser):
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    p.add_argument("--figures", default=None,
                   help="directory for PNG figures (default: next to --out)")
    p.add_argument("--no-figures", action="store_true")


def _config(args) -> BuildConfig:
    return BuildConfig(r=args.r, w=args.w, b=args.b, mode=args.mode, overload=args.overload,
                       layers=args.layers, seed=args.seed)


def _options(args, threads=None) -> ParallelOptions:
    return ParallelOptions(threads=threads if threads is not None else args.threads, minbpt=args.minbpt,
                           strategy=args.strategy, search_range=args.search_range)


def read_keys(path: str | os.PathLike):
    """One key per line, optionally ``key<TAB>value``. Returns ``(keys, values or None)``."""
    keys, values = [], []
    with open(path, "rb") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip(b"\r\n")
            key, sep, value = line.partition(b"\t")
            keys.append(key)
            if sep:
                values.append(int(value))
            elif values:
                raise ValueError(f"{path}:{lineno}: missing value (earlier lines had one)")
    if values and len(values) != len(keys):
        raise ValueError(f"{path}: either every line carries a value or none does")
    return keys, (np.asarray(values, dtype=np.uint16) if values else None)


def _figure_path(args, stem: str) -> Path | None:
    if args.no_figures:
        return None
    if args.figures:
        Path(args.figures).mkdir(parents=True, exist_ok=True)
        return Path(args.figures) / f"{stem}.png"
    if args.out != "-":
        return Path(args.out).with_suffix(".png")
    return None


def _write_report(args, rows, stem, plot=None):
    bench.write_csv(rows, sys.stdout if args.out == "-" else args.out)
    fig = _figure_path(args, Path(args.out).stem if args.out != "-" else stem)
    if plot is not None and fig is not None:
        plot(rows, fig)
        log.info("figure written to %s", fig)


def cmd_build(args) -> int:
    config = _config(args)
    if args.keys:
        keys, values = read_keys(args.keys)
        hashes = hash_keys(keys, config.seed)
    else:
        hashes = hash_keys(bench.synthetic_keys(args.n, config.seed), config.seed)
        values = None
    if values is None:
        values = fingerprints(hashes, config.r)
    structure = construct(hashes, values, config, _options(args))
    save(structure, args.out)
    st = structure.stats
    nbytes = bench.structural_bytes(structure)
    print(f"keys={hashes.shape[0]} structural_bytes={nbytes} bits_per_key={8 * nbytes / max(hashes.shape[0], 1):.4f} "
          f"bumped_per_layer={';'.join(map(str, st.bumped_per_layer))} base_keys={st.base_n} "
          f"seconds={st.total_seconds:.3f}")
    return 0


def cmd_query(args) -> int:
    structure = load(args.input)
    key = bytes.fromhex(args.hex_key) if args.hex_key is not None else args.key.encode("utf-8")
    value = query(structure, key)
    fp = fingerprint(master_hash(key, structure.config.seed), structure.config.r)
    print(f"value={value} fingerprint_match={str(may_contain(RibbonFilter(structure), key)).lower()} "
          f"fingerprint={fp}")
    return 0


def cmd_bench_construct(args) -> int:
    records = bench.bench_construct(args.n, _int_list(args.threads_list), args.repeats, _config(args),
                                    _options(args, threads=1))
    _write_report(args, records, "construct", plotting.plot_construct)
    return 0


def cmd_bench_strategies(args) -> int:
    modes = [ThresholdMode(m) for m in args.modes.split(",")]
    strategies = [Strategy(s) for s in args.strategies.split(",")]
    rows = bench.bench_strategies(args.n, args.threads, args.minbpt, args.search_range, modes,
                                  seeds=range(args.seed, args.seed + args.seeds), strategies=strategies,
                                  config=_config(args))
    _write_report(args, rows, "strategies", plotting.plot_strategies)
    return 0


def cmd_bench_filter(args) -> int:
    rec = bench.bench_filter(args.n, args.negatives, _config(args), _options(args))
    _write_report(args, [rec], "filter")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="burr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a structure file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--n", type=int, help="number of synthetic keys (stores their fingerprints)")
    src.add_argument("--keys", help="file with one key per line, optionally key<TAB>value")
    _add_config_args(p)
    _add_parallel_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="look up one key in a structure file")
    p.add_argument("--in", dest="input", required=True)
    k = p.add_mutually_exclusive_group(required=True)
    k.add_argument("--key", help="UTF-8 key")
    k.add_argument("--hex-key", help="key bytes as hex (synthetic keys are 8 bytes little-endian)")
    p.set_defaults(func=cmd_query)

    pb = sub.add_parser("bench", help="benchmarks writing CSV (and figures)")
    bsub = pb.add_subparsers(dest="bench", required=True)

    p = bsub.add_parser("construct", help="construction time and space per thread count")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--threads-list", default="1,2,4,8")
    p.add_argument("--repeats", type=int, default=1)
    _add_config_args(p)
    _add_parallel_args(p, threads=False)
    _add_report_args(p)
    p.set_defaults(func=cmd_bench_construct)

    p = bsub.add_parser("strategies", help="per-thread space overhead of each cut strategy")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--threads", type=int, default=8)
    p.add_argument("--minbpt", type=int, default=100)
    p.add_argument("--search-range", type=int, default=50)
    p.add_argument("--modes", default="1plus,2bit")
    p.add_argument("--strategies", default=",".join(s.value for s in Strategy))
    p.add_argument("--seeds", type=int, default=10, help="number of consecutive seeds starting at --seed")
    _add_config_args(p)
    _add_report_args(p)
    p.set_defaults(func=cmd_bench_strategies)

    p = bsub.add_parser("filter", help="false-positive rate and space of an r-bit filter")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--negatives", type=int, default=1_000_000)
    _add_config_args(p)
    _add_parallel_args(p)
    _add_report_args(p)
    p.set_defaults(func=cmd_bench_filter)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (StructureFileError, ConstructionError, ValueError, OSError) as exc:
        print(f"burr: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
