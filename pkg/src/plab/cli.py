"""Command-line runner: ``plab run <config>``, ``plab report <files...>``, ``plab selftest``.

Config files are flat ``key = value`` text, one pair per line, ``#`` starts a comment.
Keys not valid for the chosen ``kind`` are rejected with the offending line number.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from collections import defaultdict
from dataclasses import dataclass, field, fields, asdict, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .experiments import RUNNERS
from .rng import set_threads


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    kind: str = ""
    seed: int = 0
    group: str = "free 4"
    measure: str = ""
    family: str = "free"
    s: float = 0.3
    r: tuple[float, ...] = (0.05,)
    r_values: tuple[float, ...] = (0.02, 0.05, 0.1)
    r_max: float = 1.0
    target_fraction: float = 0.5
    realize_tol: float = 0.005
    max_steps: int = 25
    max_samples: int = 1 << 21
    grid: int = 20000
    coarse_grid: int = 200
    samples: int = 1 << 18
    burn_in: int = 200
    burn_in_doubling: bool = False
    tol: float = 1e-10
    residual_limit: float = 1e-8
    tv_limit: float = 0.02
    cross_tol: float = 0.01
    max_iter: int = 5000
    starts: int = 5
    lmax: int = 8
    avez_n: int = 4
    jmax: float = 4.0
    angles: int = 10
    checks: tuple[str, ...] = ()
    trials: int = 1000
    dim: int = 60
    kappa: str = "random"
    conjugator_samples: int = 100_000
    n_values: tuple[int, ...] = (8, 64, 512)
    quadrature: bool = True
    source: str = field(default="", repr=False)

    def snapshot(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


_PARSERS = {int: int, float: float, str: str, bool: _bool,
            "tuple[float, ...]": _floats, "tuple[int, ...]": _ints, "tuple[str, ...]": _names}

_COMMON = {"kind", "seed"}
_WALK = {"group", "measure", "family", "s", "burn_in"}
ALLOWED = {
    "stationary": _COMMON | _WALK | {"r", "grid", "coarse_grid", "samples", "tol", "residual_limit",
                                     "tv_limit", "max_iter", "starts"},
    "entropy-sweep": _COMMON | _WALK | {"r_values", "grid", "samples", "tol", "max_iter", "lmax",
                                        "avez_n", "cross_tol", "quadrature", "burn_in_doubling"},
    "realize": _COMMON | _WALK | {"r_max", "target_fraction", "realize_tol", "max_steps",
                                  "samples", "max_samples"},
    "cube": _COMMON | _WALK | {"r", "samples", "cross_tol"},
    "gap": _COMMON | {"checks", "lmax", "jmax", "angles", "trials", "dim", "kappa",
                      "conjugator_samples"},
    "quat-verify": _COMMON | {"checks", "grid", "samples", "group"},
    "net": _COMMON | {"n_values"},
    "selftest": _COMMON,
}

RANGES = {
    "grid": (12, 2_000_000), "coarse_grid": (12, 2_000_000), "samples": (2, 100_000_000),
    "burn_in": (1, 100_000), "s": (0.0, 1.0), "target_fraction": (0.0, 1.0),
    "realize_tol": (0.0, 1.0), "lmax": (1, 60), "jmax": (0.5, 20), "dim": (2, 200),
    "trials": (1, 10**7), "starts": (0, 100), "max_steps": (1, 1000), "avez_n": (1, 12),
    "angles": (1, 1000), "r_max": (0.0, 50.0),
}


def _field_types() -> dict[str, object]:
    out = {}
    for f in fields(ExperimentConfig):
        t = f.type if isinstance(f.type, str) else str(f.type)
        out[f.name] = {"int": int, "float": float, "str": str, "bool": bool}.get(t, t)
    return out


def parse_config(text: str, source: str = "<string>", base: Path | None = None) -> ExperimentConfig:
    types = _field_types()
    pairs: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in types or key == "source":
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = (val, lineno)
    if "kind" not in pairs:
        raise ConfigError(f"{source}: missing required key 'kind'")
    kind = pairs["kind"][0]
    if kind not in ALLOWED:
        raise ConfigError(f"{source}:{pairs['kind'][1]}: unknown kind {kind!r}; "
                          f"choose from {sorted(ALLOWED)}")
    values = {}
    for key, (val, lineno) in pairs.items():
        if key not in ALLOWED[kind]:
            raise ConfigError(f"{source}:{lineno}: key {key!r} not valid for kind {kind!r}")
        try:
            v = _PARSERS[types[key]](val)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
        if key in RANGES:
            lo, hi = RANGES[key]
            if not lo <= v <= hi:
                raise ConfigError(f"{source}:{lineno}: {key} = {v} outside [{lo}, {hi}]")
        if key in ("r", "r_values") and (not v or min(v) <= 0):
            raise ConfigError(f"{source}:{lineno}: {key} needs positive rates")
        if key == "measure":
            p = Path(v)
            if base is not None and not p.is_absolute():
                p = base / p
            if not p.exists():
                raise ConfigError(f"{source}:{lineno}: measure file {p} not found")
            v = str(p)
        if key == "group":
            parts = v.split()
            if len(parts) != 2 or parts[0] not in ("free", "surface") or not parts[1].isdigit():
                raise ConfigError(f"{source}:{lineno}: group must be 'free N' or 'surface G'")
        values[key] = v
    return ExperimentConfig(source=source, **values)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    return parse_config(p.read_text(encoding="utf-8"), str(p), p.parent)


# -- running -----------------------------------------------------------------

@dataclass
class RunRecord:
    config: dict
    started: str
    finished: str
    seconds: float
    version: str
    results: dict
    checks: list
    passed: bool

    def payload(self) -> str:
        """Canonical JSON of the numeric part (no timestamps)."""
        return json.dumps({"config": self.config, "results": self.results, "checks": self.checks},
                          sort_keys=True)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _jsonable(obj):
    import numpy as np
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunRecord:
    started, t0 = _now(), time.perf_counter()
    results, checks, artifacts = RUNNERS[cfg.kind](cfg)
    rec = RunRecord(config=cfg.snapshot(), started=started, finished=_now(),
                    seconds=time.perf_counter() - t0, version=__version__,
                    results=_jsonable(results), checks=[c.to_dict() for c in checks],
                    passed=all(c.passed for c in checks))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = Path(cfg.source).stem if cfg.source and cfg.source != "<string>" else cfg.kind
        with open(out / f"{stem}.jsonl", "a", encoding="utf-8") as fh:
            fh.write(rec.to_json() + "\n")
        for name, writer in artifacts.items():
            writer(out / f"{stem}_{name}")
    return rec


# -- report ------------------------------------------------------------------

def report(paths, out_dir: str | Path | None = None, stream=None) -> dict:
    stream = stream or sys.stdout
    groups: dict[str, list[dict]] = defaultdict(list)
    skipped = 0
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    kind = rec["config"]["kind"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    skipped += 1
                    continue
                groups[kind].append(rec)
    summary = {"kinds": {}, "skipped": skipped}
    for kind in sorted(groups):
        recs = groups[kind]
        n_pass = sum(r.get("passed", False) for r in recs)
        failed = sorted({c["name"] for r in recs for c in r.get("checks", []) if not c["passed"]})
        summary["kinds"][kind] = {"records": len(recs), "passed": n_pass, "failed_checks": failed}
        print(f"{kind:14s} records={len(recs):3d} passed={n_pass:3d}"
              + (f" failing: {', '.join(failed)}" if failed else ""), file=stream)
    print(f"skipped malformed lines: {skipped}", file=stream)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for i, rec in enumerate(groups.get("entropy-sweep", [])):
            pts = rec["results"]["points"]
            series = {
                "h": [(p["r"], p["mc"]["value"], p["mc"]["stderr"]) for p in pts],
                "lower": [(p["r"], p["bounds"]["spectral_lower"], 0.0) for p in pts],
                "upper": [(p["r"], p["bounds"]["upper"], 0.0) for p in pts],
            }
            for q, rows in series.items():
                f = out / f"sweep{i}_{q}.dat"
                with open(f, "w") as fh:
                    fh.write("# x y err\n")
                    for x, y, e in rows:
                        fh.write(f"{x!r} {y!r} {e!r}\n")
                written.append(str(f))
        summary["plot_files"] = written
    return summary


# -- entry point -------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plab", description="stationary measure and entropy lab")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in ("run", "selftest"):
        p = sub.add_parser(name)
        if name == "run":
            p.add_argument("config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out-dir", default="results")
    p = sub.add_parser("report")
    p.add_argument("files", nargs="*")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    set_threads(args.threads)
    if args.cmd == "report":
        report(args.files, args.out_dir)
        return 0
    try:
        cfg = ExperimentConfig(kind="selftest") if args.cmd == "selftest" else load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    rec = run(cfg, args.out_dir)
    for c in rec.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']:.6g} {c['op']} {c['limit']:.6g}")
    print(f"{cfg.kind}: {'ok' if rec.passed else 'FAILED'} in {rec.seconds:.1f}s")
    return 0 if rec.passed else 1


if __name__ == "__main__":
    sys.exit(main())
