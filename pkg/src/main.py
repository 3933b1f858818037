"""
Command-line entry point for rcmlab.

Loads the JSON config, applies command-line overrides, runs one subcommand
and writes its records. Exit codes: 0 on success, 2 on validation errors
(including usage errors), 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

# Ensure project root is on sys.path before importing src.*
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src import actions
from src.__version__ import __version__
from src.errors import ConfigError, LabError, NumericalError, ValidationError
from src.lattice.domain import Quad, read_domain_file, read_quad_file
from src.managers.enumeration import enumerate_measure
from src.managers.records import EstimateRecord, RecordStore, records_to_csv, records_to_json
from src.managers.sampler import ChainSpec, run_chains
from src.model.connectivity import crossing_event
from src.model.extremal import extremal_report
from src.model.measure import BoundaryPartition, Weights, critical_p, exact_probability
from src.utils.rng import chain_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def get_default_config() -> dict:
    """Default experiment configuration, as written to a fresh config.json."""
    data = actions.ExperimentConfig().to_dict()
    data["paths"] = {"data_dir": ".data"}
    return data


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: Path) -> dict:
    """Read a config file merged over the defaults.

    A missing file is created with the defaults; a corrupted one is backed up
    to *.json.corrupted and replaced by the defaults.
    """
    defaults = get_default_config()
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(defaults, indent=2), encoding="utf-8")
        logger.info(f"[config] Created default config at: {path}")
        return defaults

    try:
        # Handle potential BOM with utf-8-sig
        user = json.loads(path.read_text(encoding="utf-8-sig"))
    except json.JSONDecodeError as e:
        backup_path = path.with_suffix(".json.corrupted")
        try:
            backup_path.unlink(missing_ok=True)
            path.rename(backup_path)
            logger.warning(f"[config] Config corrupted (line {e.lineno}): backed up to {backup_path.name}")
        except OSError:
            logger.warning(f"[config] Config corrupted (line {e.lineno}): could not backup")
        path.write_text(json.dumps(defaults, indent=2), encoding="utf-8")
        logger.info(f"[config] Created new default config at: {path}")
        return defaults
    if not isinstance(user, dict):
        raise ConfigError(f"config root must be an object: {path}")
    return deep_merge(defaults, user)


def setup_logging(data_dir: Path, quiet: bool = False, console=None) -> Path:
    """
    Configure logging to file + console.

    Console shows INFO+ (WARNING+ when quiet), file shows DEBUG+ with rotation.
    Log files rotate at 10MB, keeping 5 backups.
    """
    from logging.handlers import RotatingFileHandler

    logs_dir = data_dir / "logs"
    logs_dir.mkdir(parents=True, exist_ok=True)
    log_file = logs_dir / "app.log"

    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler(console or sys.stdout)
    console_handler.setLevel(logging.WARNING if quiet else logging.INFO)
    console_handler.setFormatter(logging.Formatter(
        "%(asctime)s.%(msecs)03d [%(levelname)s] %(message)s",
        datefmt="%H:%M:%S"
    ))
    root.addHandler(console_handler)

    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=10 * 1024 * 1024,  # 10MB per file
        backupCount=5,
        encoding="utf-8"
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(
        "%(asctime)s.%(msecs)03d [%(levelname)s] [%(threadName)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    ))
    root.addHandler(file_handler)

    # Suppress noise from external libraries
    logging.getLogger("networkx").setLevel(logging.WARNING)
    logging.getLogger("hypothesis").setLevel(logging.WARNING)

    logging.debug(f"Logging initialized: console={'WARNING' if quiet else 'INFO'}, file=DEBUG")
    logging.debug(f"Log file: {log_file}")
    return log_file


# --- argument parsing -----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so cli() can return a code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", type=float, nargs="+", help="cluster weights")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--samples", type=int, help="samples per point (all chains together)")
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--thin", type=int)
    p.add_argument("--chains", type=int, help="independent chains per point")
    p.add_argument("--algorithm", choices=("heat-bath", "chayes-machta"))
    p.add_argument("--domain", type=Path, metavar="FILE", help="domain or quad file (LOOP + MARK lines)")
    p.add_argument("--config", type=Path, metavar="FILE", help="JSON config")
    p.add_argument("--out", metavar="PATH", help="output file, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--threads", type=int, help="worker threads (0 = auto)")
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rcmlab", description="Critical random-cluster laboratory")
    parser.add_argument("--version", action="version", version=f"rcmlab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("enumerate", help="exact measure of a small domain")
    _common(p)
    p.add_argument("--bc", default="free", choices=("free", "wired"))
    p.add_argument("--p", type=float, help="edge parameter (default p_c(q))")

    p = sub.add_parser("sample", help="run chains and dump samples")
    _common(p)
    p.add_argument("--bc", default="free", choices=("free", "wired"))

    p = sub.add_parser("crossing", help="crossing probability against extremal distance")
    _common(p)
    p.add_argument("--quad", nargs="+", help="quad specs, e.g. rect:8x4 l-shape:3")
    p.add_argument("--refine", type=int)

    p = sub.add_parser("arms", help="arm-event frequencies and exponent fits")
    _common(p)
    p.add_argument("--sigma", nargs="+")
    mask = p.add_mutually_exclusive_group()
    mask.add_argument("--half-plane", dest="mask", action="store_const", const="half")
    mask.add_argument("--quarter-plane", dest="mask", action="store_const", const="quarter")
    mask.add_argument("--full-plane", dest="mask", action="store_const", const="full")
    p.add_argument("--r", type=int, nargs="+")
    p.add_argument("--R", type=int, nargs="+")
    p.add_argument("--rho", type=int, nargs="+")
    p.add_argument("--defects", type=int)

    p = sub.add_parser("parafermion", help="contour identity of the exact observable")
    _common(p)
    p.add_argument("--enumerate", action="store_true", help="use the enumerable domain suite")
    p.add_argument("--max-edges", type=int, dest="max_edges")
    p.add_argument("--mc-samples", type=int, dest="mc_samples")

    p = sub.add_parser("extremal", help="extremal distance of a quad")
    _common(p)
    p.add_argument("--refine", type=int)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("chains", help="Hamming distance and chains of clusters")
    _common(p)
    p.add_argument("--N", type=int)
    p.add_argument("--ell", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--alpha", type=float, nargs="+")
    p.add_argument("--delta", type=float)

    p = sub.add_parser("touch", help="p(R) over R-centred domain families")
    _common(p)
    p.add_argument("--family", nargs="+")
    p.add_argument("--R", type=int, nargs="+")
    p.add_argument("--r", type=int)
    p.add_argument("--domains", type=int)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Config fragment built from the flags that were given."""
    o: Dict[str, Any] = {}

    def put(section: Optional[str], key: str, value: Any) -> None:
        if value is None:
            return
        if section is None:
            o[key] = value
        else:
            o.setdefault(section, {})[key] = value

    get = lambda name: getattr(args, name, None)
    put(None, "q", get("q"))
    put(None, "master_seed", get("seed"))
    put("chain", "samples", get("samples"))
    put("chain", "burn_in", get("burn_in"))
    put("chain", "thin", get("thin"))
    put("chain", "chains", get("chains"))
    put("chain", "algorithm", get("algorithm"))
    put("output", "format", get("format"))
    cmd = args.command
    if cmd == "crossing":
        put("crossing", "quads", get("quad"))
        put("extremal", "refinement", get("refine"))
    elif cmd == "arms":
        put("arms", "sigma", get("sigma"))
        put("arms", "mask", get("mask"))
        put("arms", "r", get("r"))
        put("arms", "R", get("R"))
        put("arms", "rho", get("rho"))
        put("arms", "defects", get("defects"))
    elif cmd == "parafermion":
        put("parafermion", "max_edges", get("max_edges"))
        put("parafermion", "mc_samples", get("mc_samples"))
    elif cmd == "extremal":
        put("extremal", "refinement", get("refine"))
        put("extremal", "tol", get("tol"))
    elif cmd == "chains":
        put("chains", "N", get("N"))
        put("chains", "ell", get("ell"))
        put("chains", "K", get("K"))
        put("chains", "alpha", get("alpha"))
        put("chains", "delta", get("delta"))
    elif cmd == "touch":
        put("touch", "families", get("family"))
        put("touch", "R", get("R"))
        put("touch", "r", get("r"))
        put("touch", "domains", get("domains"))
    return o


# --- subcommands ----------------------------------------------------------

def _read_quad(args: argparse.Namespace) -> Quad:
    if args.domain is None:
        raise ConfigError(f"{args.command} needs --domain FILE with four MARK lines")
    return read_quad_file(args.domain)


def _cmd_enumerate(args: argparse.Namespace, cfg: actions.ExperimentConfig) -> str:
    if args.domain is None:
        raise ConfigError("enumerate needs --domain FILE")
    domain, marks = read_domain_file(args.domain)
    rows = []
    for q in cfg.q:
        w = Weights(p=args.p if args.p is not None else critical_p(q), q=q)
        bc = BoundaryPartition.from_name(domain, args.bc)
        em = enumerate_measure(domain, bc, w, cap=cfg.enumeration.cap, chunk_bits=cfg.enumeration.chunk_bits,
                               workers=cfg.workers)
        row = dict(em.to_json(), bc=args.bc)
        if len(marks) == 4:
            row["crossing"] = exact_probability(em, crossing_event(Quad(domain, *marks)), vectorized=True)
        rows.append(row)
    return json.dumps(rows, indent=2) + "\n"


def _cmd_sample(args: argparse.Namespace, cfg: actions.ExperimentConfig, out: Optional[str]) -> str:
    if args.domain is None:
        raise ConfigError("sample needs --domain FILE")
    domain, _ = read_domain_file(args.domain)
    base = Path(out) if out not in (None, "-") else Path(cfg.output.dir) / "samples"
    summary = []
    for point, q in enumerate(cfg.q):
        seed = chain_seed(cfg.master_seed, point)
        algorithm = cfg.chain.algorithm if q >= 1.0 else "heat-bath"
        spec = ChainSpec(domain, BoundaryPartition.from_name(domain, args.bc), Weights.critical(q), seed,
                         burn_in=cfg.chain.burn_in, thin=cfg.chain.thin, algorithm=algorithm)
        streams = run_chains(spec, max(1, cfg.chain.samples // cfg.chain.chains), cfg.chain.chains,
                             workers=cfg.workers)
        spec.save_json(base / f"q{q:g}" / "chain.json")
        for s in streams:
            s.dump(base / f"q{q:g}" / f"chain{s.chain_index}.txt")
        summary.append({"q": q, "seed": seed, "chains": len(streams), "samples": sum(len(s) for s in streams),
                        "dir": str(base / f"q{q:g}")})
    return json.dumps(summary, indent=2) + "\n"


def _cmd_extremal(args: argparse.Namespace, cfg: actions.ExperimentConfig) -> str:
    report = extremal_report(_read_quad(args), cfg.extremal.refinement, cfg.extremal.tol)
    return json.dumps(report, indent=2) + "\n"


def _run_experiment(args: argparse.Namespace, cfg: actions.ExperimentConfig) -> List[EstimateRecord]:
    if args.command == "crossing" and args.domain is not None:
        quad = _read_quad(args)
        return actions.exp_crossing_vs_modulus(cfg, quads=[(f"file:{args.domain.name}", quad)])
    return actions.RUNNERS[args.command](cfg)


def _emit(text: str, out: Optional[str], default: Path) -> None:
    if out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(out) if out else default
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    logger.info(f"[cli] Wrote {path}")


def cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except _UsageError as e:
        print(f"rcmlab: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)

    out = args.out
    try:
        raw = load_config(args.config) if args.config else get_default_config()
        data_dir = Path(raw.get("paths", {}).get("data_dir", ".data"))
        setup_logging(data_dir, quiet=args.quiet, console=sys.stderr if out == "-" else sys.stdout)
        cfg = actions.ExperimentConfig.from_dict(deep_merge(raw, _overrides(args)))
        cfg.workers = args.threads
        fmt = cfg.output.format
        logger.info(f"[cli] rcmlab {__version__}: {args.command} (seed={cfg.master_seed}, q={cfg.q})")

        if args.command == "enumerate":
            _emit(_cmd_enumerate(args, cfg), out, Path(cfg.output.dir) / "enumerate.json")
        elif args.command == "sample":
            _emit(_cmd_sample(args, cfg, out), "-" if out == "-" else None,
                  Path(cfg.output.dir) / "samples.json")
        elif args.command == "extremal":
            _emit(_cmd_extremal(args, cfg), out, Path(cfg.output.dir) / "extremal.json")
        else:
            records = _run_experiment(args, cfg)
            store_path = Path(out) if out and out != "-" else Path(cfg.output.dir) / f"{args.command}.{fmt}"
            if out == "-":
                render = records_to_json if fmt == "json" else records_to_csv
                _emit(render(records, cfg.output.record_timing), out, store_path)
            else:
                RecordStore(store_path, fmt, cfg.output.record_timing).write(records)
        return EXIT_OK
    except ValidationError as e:
        logger.error(f"[cli] {type(e).__name__}: {e}")
        return EXIT_VALIDATION
    except NumericalError as e:
        logger.error(f"[cli] {type(e).__name__}: {e}")
        return EXIT_NUMERICAL
    except LabError as e:
        logger.error(f"[cli] {type(e).__name__}: {e}")
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        pass  # Clean exit on Ctrl+C
