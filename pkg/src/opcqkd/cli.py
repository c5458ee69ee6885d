"""Command-line front end.

    opcqkd verify  --dim D --q Q --trials T [--seed S] [--mode symmetric|general] [--out FILE]
    opcqkd session --config FILE --out FILE
    opcqkd sweep   --config FILE --axis NAME --values LIST --out FILE

Session configs are flat JSON objects whose keys are listed in
``CONFIG_FIELDS``.  Results are written only after a run completes; a sweep
also writes ``FILE.manifest.json`` recording the config and seed.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .channel import SegmentKind, hwp_matrix, random_sequence, round_trip_matrix
from .errors import ConfigError
from .linalg import max_abs
from .opc import OpcParams
from .protocol import Eve, Mirror, SessionConfig, SessionStats, draw_seed, run_session
from .states import IntensityRole, PulseIntensity

log = logging.getLogger("opcqkd")

VERIFY_THRESHOLD = 1e-8
SWEEP_AXES = ("q_perturbations", "n_cores", "mu_signal", "kappa_l")
SWEEP_HEADER = ("value", "qber", "gain_signal", "gain_decoy", "sifted_fraction")

# key -> (accepted python types, default)
CONFIG_FIELDS: dict[str, tuple[tuple[type, ...], Any]] = {
    "n_cores": ((int,), 2),
    "q_perturbations": ((int,), 5),
    "kappa_scale": ((int, float), 1.0),
    "kappa_l": ((int, float), 0.6),
    "mu_signal": ((int, float), 0.5),
    "mu_decoy": ((int, float, type(None)), 0.1),
    "mu_vacuum": ((int, float, type(None)), 0.0),
    "n_rounds": ((int,), 10_000),
    "eve": ((str,), "none"),
    "seed": ((int, type(None)), None),
    "segment_kind": ((str,), "symmetric"),
    "mirror": ((str,), "opc"),
    "drift_step": ((int, float), 0.0),
    "beta": ((int, float), 1.0),
    "z_length": ((int, float), 1.0),
}


class UsageError(Exception):
    pass


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    """Parse and type-check a flat JSON config; returns the completed mapping."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    cfg = {k: default for k, (_, default) in CONFIG_FIELDS.items()}
    for key, value in raw.items():
        if key not in CONFIG_FIELDS:
            raise ConfigError(f"{source}: unknown field {key!r}")
        types, _ = CONFIG_FIELDS[key]
        if isinstance(value, bool) or not isinstance(value, types):
            names = "/".join("null" if t is type(None) else t.__name__ for t in types)
            raise ConfigError(f"{source}: field {key!r} must be {names}, got {json.dumps(value)}")
        cfg[key] = value
    for key in ("eve", "mirror", "segment_kind"):
        enum_type = {"eve": Eve, "mirror": Mirror, "segment_kind": SegmentKind}[key]
        allowed = [e.value for e in enum_type]
        if cfg[key] not in allowed:
            raise ConfigError(f"{source}: field {key!r} must be one of {allowed}, got {cfg[key]!r}")
    return cfg


def session_config(cfg: dict[str, Any]) -> SessionConfig:
    """Build a :class:`SessionConfig` from a parsed flat config."""
    intensities = [PulseIntensity(cfg["mu_signal"], IntensityRole.SIGNAL)]
    if cfg["mu_decoy"] is not None:
        intensities.append(PulseIntensity(cfg["mu_decoy"], IntensityRole.DECOY))
    if cfg["mu_vacuum"] is not None:
        intensities.append(PulseIntensity(cfg["mu_vacuum"], IntensityRole.VACUUM))
    try:
        return SessionConfig(
            n_cores=cfg["n_cores"],
            q_perturbations=cfg["q_perturbations"],
            kappa_scale=float(cfg["kappa_scale"]),
            opc=OpcParams(float(cfg["kappa_l"])),
            intensities=tuple(intensities),
            n_rounds=cfg["n_rounds"],
            eve=cfg["eve"],
            seed=cfg["seed"],
            segment_kind=cfg["segment_kind"],
            mirror=cfg["mirror"],
            drift_step=float(cfg["drift_step"]),
            beta=float(cfg["beta"]),
            z_length=float(cfg["z_length"]),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike) -> dict[str, Any]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(p)!r}: {exc.strerror}") from None
    return parse_config(text, str(p))


def _write_atomic(path: str | os.PathLike, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _manifest(command: str, config: dict[str, Any], seed: int, results: Any, started: str) -> dict:
    return {
        "artifact": "opcqkd",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "started_at": started,
        "finished_at": _now(),
        "results": results,
    }


def verify(dim: int, q: int, trials: int, seed: int, mode: str = "symmetric") -> dict[str, Any]:
    """Max deviation of the round-trip matrix from the wave-plate matrix over random links."""
    if dim < 2 or dim % 2:
        raise UsageError(f"--dim must be an even integer >= 2, got {dim}")
    if q < 0 or trials < 1:
        raise UsageError("--q must be >= 0 and --trials >= 1")
    kind = SegmentKind(mode)
    n_cores = dim // 2
    d = hwp_matrix(n_cores)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        seq = random_sequence(n_cores, q, kind, rng)
        worst = max(worst, max_abs(round_trip_matrix(seq) - d))
    return {
        "dim": dim,
        "q": q,
        "trials": trials,
        "mode": kind.value,
        "seed": seed,
        "max_deviation": worst,
        "threshold": VERIFY_THRESHOLD,
        "passed": worst <= VERIFY_THRESHOLD,
    }


def _fmt(x: float | None) -> str:
    return "-" if x is None else f"{x:.6f}"


def summary_table(stats: SessionStats) -> str:
    rows = [
        ("sent", str(stats.sent)),
        ("detected", str(stats.detected)),
        ("sifted", str(stats.sifted)),
        ("errors", str(stats.errors)),
        ("qber", _fmt(stats.qber)),
        ("qber basis 0", _fmt(stats.qber_per_basis[0])),
        ("qber basis 1", _fmt(stats.qber_per_basis[1])),
    ]
    rows += [(f"gain {role}", _fmt(g)) for role, g in stats.gains.items()]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _with_seed(cfg: dict[str, Any]) -> dict[str, Any]:
    if cfg["seed"] is None:
        cfg = dict(cfg, seed=draw_seed())
    return cfg


def session(cfg: dict[str, Any]) -> tuple[dict[str, Any], SessionStats]:
    cfg = _with_seed(cfg)
    return cfg, run_session(session_config(cfg))


def sweep_rows(cfg: dict[str, Any], axis: str, values: Sequence[float]) -> list[tuple]:
    if axis not in SWEEP_AXES:
        raise UsageError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    if not values:
        raise UsageError("--values must list at least one value")
    cfg = _with_seed(cfg)
    rows = []
    for v in values:
        if axis in ("q_perturbations", "n_cores"):
            if float(v) != int(v):
                raise UsageError(f"axis {axis} takes integers, got {v}")
            v = int(v)
        point = dict(cfg, **{axis: v})
        stats = run_session(session_config(point))
        rows.append(
            (
                v,
                stats.qber,
                stats.gain(IntensityRole.SIGNAL),
                stats.gain(IntensityRole.DECOY),
                stats.sifted_fraction,
            )
        )
    return rows


def rows_to_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(SWEEP_HEADER)
    for row in rows:
        w.writerow(["" if x is None else repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _parse_values(text: str) -> list[float]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"--values must be a comma-separated list of numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise UsageError("--values must be finite")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opcqkd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check the round-trip cancellation on random links")
    v.add_argument("--dim", type=int, required=True, help="number of modes 2N (even)")
    v.add_argument("--q", type=int, required=True, help="segments per link")
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--mode", choices=[k.value for k in SegmentKind], default="symmetric")
    v.add_argument("--out", default=None, help="optional JSON report path")

    s = sub.add_parser("session", help="run one protocol session")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)

    w = sub.add_parser("sweep", help="repeat sessions along one parameter axis")
    w.add_argument("--config", required=True)
    w.add_argument("--axis", required=True, help=f"one of {', '.join(SWEEP_AXES)}")
    w.add_argument("--values", required=True, help="comma-separated values")
    w.add_argument("--out", required=True)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    started = _now()
    try:
        if args.command == "verify":
            seed = args.seed if args.seed is not None else draw_seed()
            report = verify(args.dim, args.q, args.trials, seed, args.mode)
            print(
                f"dim={report['dim']} q={report['q']} trials={report['trials']} "
                f"mode={report['mode']} seed={seed} max_deviation={report['max_deviation']:.3e} "
                f"{'PASS' if report['passed'] else 'FAIL'}"
            )
            if args.out:
                config = {k: report[k] for k in ("dim", "q", "trials", "mode")}
                doc = _manifest("verify", config, seed, report, started)
                _write_atomic(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
            return 0 if report["passed"] else 1

        cfg = load_config(args.config)
        if args.command == "session":
            cfg, stats = session(cfg)
            doc = _manifest("session", cfg, cfg["seed"], stats.to_dict(), started)
            _write_atomic(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
            print(summary_table(stats))
            return 0

        values = _parse_values(args.values)
        cfg = _with_seed(cfg)
        rows = sweep_rows(cfg, args.axis, values)
        _write_atomic(args.out, rows_to_csv(rows))
        sweep_meta = {"axis": args.axis, "values": values, "csv": Path(args.out).name}
        doc = _manifest("sweep", cfg, cfg["seed"], sweep_meta, started)
        _write_atomic(f"{args.out}.manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
        for row in rows:
            log.info("%s=%s qber=%s", args.axis, row[0], _fmt(row[1]))
        return 0
    except (UsageError, ConfigError) as exc:
        parser.exit(2, f"{parser.prog}: error: {exc}\n")
    return 2  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
