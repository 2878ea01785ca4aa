"""Command-line entry point: ``flim <command> [options]``.

Commands write CSV/JSON files into the output directory together with a
``manifest.json`` that embeds the effective configuration; passing that
manifest back via ``--config`` repeats the run bit for bit.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from io import StringIO
from pathlib import Path

from flim import __version__, analysis
from flim.channel import channel_matrix, condition_number_db
from flim.codebook import spectral_efficiency
from flim.config import RunConfig, canonical_scheme, parse_config, parse_config_text
from flim.errors import ConfigError, FlimError
from flim.sim import DetectorSpec, SimRun, run_abep, snr_at_abep, sweep_cn, union_bound_curve

log = logging.getLogger("flim")

ABEP_COLUMNS = ("eb_n0_db", "abep", "bit_errors", "bits_sent", "repair_rate", "analytic")
CN_COLUMNS = ("r_cm", "omega_deg", "cn_db")
SE_COLUMNS = ("scheme", "n_t", "n_a", "M", "eta_bpcu")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ("inf" if x > 0 else "nan")
    return str(x)


def _write_csv(path: Path, columns, rows) -> int:
    n = 0
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
            n += 1
    return n


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file or a manifest.json from an earlier run")
    common.add_argument("--seed", type=int, help="master seed (overrides [sim] seed)")
    common.add_argument("--symbols", type=int, help="symbols per SNR point (overrides [sim] n_symbols)")
    common.add_argument("--out", type=Path, help="output directory (overrides [output] directory)")
    common.add_argument(
        "--scheme", action="append", help="scheme to run (smx, sm, gsm2, flim); repeatable", default=None
    )
    common.add_argument("--detector", choices=("ml", "mmse"), help="detector (overrides [detector] kind)")
    common.add_argument("--workers", type=int, help="worker processes for Monte Carlo")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="flim", description="LED index modulation link simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("abep", parents=[common], help="Monte Carlo bit error probability vs Eb/N0")
    sub.add_parser("cn-map", parents=[common], help="channel condition number over the cell")
    sub.add_parser("codebook", parents=[common], help="build and export codebooks")
    sub.add_parser("bound", parents=[common], help="analytic union bound vs Eb/N0")
    sub.add_parser("se-table", parents=[common], help="spectral efficiency table")
    return parser


def _load(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else parse_config_text("", origin="<defaults>")
    if args.detector:
        cfg = replace(cfg, detector=DetectorSpec(args.detector, cfg.detector.rs_variant))
    cfg = cfg.with_overrides(seed=args.seed, n_symbols=args.symbols, workers=args.workers)
    if args.symbols is not None and args.symbols < 1:
        raise ConfigError("--symbols must be >= 1")
    if args.workers is not None and args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    return cfg


def _effective_text(cfg: RunConfig, args) -> str:
    """Config text with CLI overrides appended so a manifest fully describes the run."""
    extra = []
    sim = []
    if args.seed is not None:
        sim.append(f"seed = {args.seed}")
    if args.symbols is not None:
        sim.append(f"n_symbols = {args.symbols}")
    if args.workers is not None:
        sim.append(f"workers = {args.workers}")
    if sim:
        extra.append(("sim", sim))
    if args.detector:
        extra.append(("detector", [f"kind = {args.detector}"]))
    if args.scheme:
        extra.append(("scheme", [f"schemes = {', '.join(_schemes(cfg, args))}"]))
    if not extra:
        return cfg.source_text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.read_string(cfg.source_text)
    for section, lines in extra:
        if not parser.has_section(section):
            parser.add_section(section)
        for line in lines:
            key, value = (p.strip() for p in line.split("=", 1))
            parser.set(section, key, value)
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()


def _schemes(cfg: RunConfig, args) -> list[str]:
    names = args.scheme or list(cfg.default_schemes)
    return [canonical_scheme(n) for n in names]


def _out_dir(cfg: RunConfig, args) -> Path:
    out = args.out or Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, cfg: RunConfig, args, command: str, extra: dict) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "seed": cfg.sim.seed,
        "n_symbols": cfg.sim.n_symbols,
        "config_text": _effective_text(cfg, args),
        **extra,
    }
    _write_json(out / "manifest.json", doc)


def _codebooks(cfg: RunConfig, args, channel):
    books = {}
    for name in _schemes(cfg, args):
        books[name] = cfg.scheme(name).build(cfg.scene.n_t, channel)
    return books


def cmd_abep(cfg: RunConfig, args, analytic: bool = False) -> dict:
    out = _out_dir(cfg, args)
    h = channel_matrix(cfg.scene)
    books = _codebooks(cfg, args, h)
    hashes, crossings = {}, {}
    for name, book in books.items():
        run = SimRun(
            book,
            h,
            cfg.sim.snr_db,
            n_symbols=cfg.sim.n_symbols,
            seed=cfg.sim.seed,
            detector=cfg.detector,
            snr_convention=cfg.snr_convention,
            min_errors=cfg.sim.min_errors,
        )
        curve = union_bound_curve(run) if analytic else run_abep(run, workers=cfg.sim.workers)
        prefix = "bound" if analytic else "abep"
        rows = ((p.eb_n0_db, p.abep, p.bit_errors, p.bits_sent, p.repair_rate, curve.analytic) for p in curve.points)
        _write_csv(out / f"{prefix}_{name}.csv", ABEP_COLUMNS, rows)
        hashes[name] = book.content_hash()
        crossings[name] = snr_at_abep(curve, 1e-3)
        log.info("%s: Eb/N0 at ABEP 1e-3 = %s dB", name, crossings[name])
    report = {name: analysis.power_report(h, book, 1.0).path_loss_db for name, book in books.items()}
    _manifest(
        out,
        cfg,
        args,
        "bound" if analytic else "abep",
        {
            "codebook_sha256": hashes,
            "eb_n0_db_at_1e-3": crossings,
            "path_loss_db": report,
            "condition_number_db": condition_number_db(h),
        },
    )
    return {"out": str(out), "schemes": list(books)}


def cmd_cn_map(cfg: RunConfig, args) -> dict:
    out = _out_dir(cfg, args)
    cn = sweep_cn(cfg.scene, cfg.radial_step_cm, cfg.angular_step_deg)
    n = _write_csv(out / "cn_map.csv", CN_COLUMNS, cn.rows())
    summary = {
        "mean_db": cn.mean_db,
        "std_db": cn.std_db,
        "n_points": n,
        "n_rank_deficient": cn.n_rank_deficient,
        "radial_step_cm": cn.radial_step_cm,
        "angular_step_deg": cn.angular_step_deg,
        "r_cell_cm": cfg.scene.r_cell,
        "receiver": cfg.scene.receiver_kind,
    }
    _write_json(out / "cn_summary.json", summary)
    _manifest(out, cfg, args, "cn-map", {"cn_summary": summary})
    return summary


def cmd_codebook(cfg: RunConfig, args) -> dict:
    out = _out_dir(cfg, args)
    h = channel_matrix(cfg.scene)
    books = _codebooks(cfg, args, h)
    for name, book in books.items():
        (out / f"codebook_{name}.json").write_text(book.to_json() + "\n")
    hashes = {name: book.content_hash() for name, book in books.items()}
    _manifest(out, cfg, args, "codebook", {"codebook_sha256": hashes})
    return hashes


def cmd_se_table(cfg: RunConfig, args) -> dict:
    out = _out_dir(cfg, args)
    se = cfg.se_table
    rows = []
    for scheme in se.schemes:
        for n_t in se.n_t:
            n_a = se.n_a if se.n_a is not None else n_t // 2
            uses_na = scheme in ("gssk", "gsm", "gsm2")
            try:
                eta = spectral_efficiency(scheme, n_t, n_a if uses_na else None, se.m)
            except FlimError as exc:
                log.debug("skipping %s n_t=%d: %s", scheme, n_t, exc)
                continue
            rows.append((scheme, n_t, n_a if uses_na else "", se.m, float(eta)))
    n = _write_csv(out / "se_table.csv", SE_COLUMNS, rows)
    _manifest(out, cfg, args, "se-table", {"rows": n})
    return {"rows": n}


COMMANDS = {
    "abep": cmd_abep,
    "bound": lambda cfg, args: cmd_abep(cfg, args, analytic=True),
    "cn-map": cmd_cn_map,
    "codebook": cmd_codebook,
    "se-table": cmd_se_table,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _load(args)
        result = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except FlimError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(result, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
