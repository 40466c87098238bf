"""File formats, configuration text and run manifests.

All CSV files carry a header row and write floats with ``repr`` so that
values round-trip exactly.  Writes go to a temporary file that is renamed
into place, so a reader never sees a half-written file.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .measures import IntradayDay
from .model import FREE_PARAMS, LatentPath, ObservedData

DATASET_COLUMNS = ("date", "r", "lnbv", "dnp", "zp")
TRUTH_COLUMNS = ("date", "V", "dnv", "zv", "delta_p", "delta_v")
CONFIG_SECTIONS = ("sim", "param", "prior", "chain", "evidence", "forecast")


class InputError(ValueError):
    """Malformed or inconsistent input (maps to exit code 2)."""


# ----------------------------------------------------------------------
# low-level helpers


def fmt(x) -> str:
    """Exact text form of a scalar (``repr`` for floats, empty for None/NaN-as-missing)."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, columns: Sequence[str], rows: Iterable) -> None:
    """Write rows (dicts or sequences) under a header, atomically."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(c) for c in columns]
        w.writerow([fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path, required: Sequence[str] = ()) -> list[dict]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rd = csv.DictReader(fh)
            if rd.fieldnames is None:
                raise InputError(f"{path}: empty file")
            missing = [c for c in required if c not in rd.fieldnames]
            if missing:
                raise InputError(f"{path}: missing columns {missing}")
            return list(rd)
    except FileNotFoundError as exc:
        raise InputError(f"{path}: no such file") from exc


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _float(v: str, what: str) -> float:
    try:
        return float(v)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad number for {what}: {v!r}") from exc


# ----------------------------------------------------------------------
# intraday and daily data


def read_intraday_csv(path) -> IntradayDay:
    """One day of ``timestamp,price`` rows; the file stem is the date."""
    path = Path(path)
    rows = read_csv(path, ("timestamp", "price"))
    if len(rows) < 4:
        raise InputError(f"{path}: need at least 4 intraday prices")
    ts = np.array([_float(r["timestamp"], f"{path.name} timestamp") for r in rows])
    px = np.array([_float(r["price"], f"{path.name} price") for r in rows])
    if not np.all(np.diff(ts) > 0):
        raise InputError(f"{path}: timestamps must be strictly increasing")
    if not np.all(np.isfinite(px)) or np.any(px <= 0):
        raise InputError(f"{path}: prices must be positive and finite")
    return IntradayDay(path.stem, np.log(px))


def write_intraday_csv(path, day: IntradayDay) -> None:
    """Write a day with integer timestamps ``0..M`` and prices ``exp(log price)``."""
    lp = day.log_prices
    write_csv(path, ("timestamp", "price"), ((i, float(np.exp(v))) for i, v in enumerate(lp)))


def read_intraday_dir(directory, skip_bad: bool = False, on_skip=None) -> list[IntradayDay]:
    """All ``*.csv`` day files in name order; bad files raise unless ``skip_bad``."""
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"{d}: not a directory")
    days = []
    for p in sorted(d.glob("*.csv")):
        try:
            days.append(read_intraday_csv(p))
        except (InputError, ValueError) as exc:
            if not skip_bad:
                raise InputError(f"{p.name}: {exc}") from exc
            if on_skip is not None:
                on_skip(p, exc)
    return days


def write_dataset_csv(path, data: ObservedData) -> None:
    rows = []
    for i in range(len(data)):
        jump = int(data.dnp[i])
        rows.append((data.dates[i], float(data.r[i]), float(data.lnbv[i]), jump,
                     float(data.zp[i]) if jump else None))
    write_csv(path, DATASET_COLUMNS, rows)


def read_dataset_csv(path) -> ObservedData:
    rows = read_csv(path, DATASET_COLUMNS)
    if not rows:
        raise InputError(f"{path}: no data rows")
    r, lnbv, dnp, zp, dates = [], [], [], [], []
    for k, row in enumerate(rows, 2):
        where = f"{Path(path).name} line {k}"
        dates.append(row["date"])
        r.append(_float(row["r"], where))
        lnbv.append(_float(row["lnbv"], where))
        j = row["dnp"].strip()
        if j not in ("0", "1"):
            raise InputError(f"{where}: dnp must be 0 or 1")
        dnp.append(int(j))
        zp.append(_float(row["zp"], where) if j == "1" else 0.0)
    try:
        return ObservedData(np.array(r), np.array(lnbv), np.array(dnp, dtype=np.int8),
                            np.array(zp), tuple(dates))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_truth_csv(path, data: ObservedData, latents: LatentPath) -> None:
    rows = ((data.dates[i], float(latents.V[i]), int(latents.dnv[i]), float(latents.zv[i]),
             float(latents.delta_p[i]), float(latents.delta_v[i])) for i in range(len(data)))
    write_csv(path, TRUTH_COLUMNS, rows)


def read_truth_csv(path) -> LatentPath:
    rows = read_csv(path, TRUTH_COLUMNS)
    col = lambda c: np.array([_float(r[c], c) for r in rows])  # noqa: E731
    return LatentPath(col("V"), col("zv"), col("dnv").astype(np.int8), col("delta_p"),
                      col("delta_v"))


# ----------------------------------------------------------------------
# chains


def write_chain(prefix, chain) -> list[Path]:
    """Draws CSV plus a JSON-lines acceptance sidecar; returns the paths written."""
    p_draws = Path(f"{prefix}_chain.csv")
    p_acc = Path(f"{prefix}_acceptance.jsonl")
    write_csv(p_draws, chain.names, chain.draws.tolist())
    lines = [json.dumps({"block": k, **{kk: v[kk] for kk in sorted(v)}}, sort_keys=True)
             for k, v in sorted(chain.acceptance.items())]
    atomic_write_text(p_acc, "\n".join(lines) + ("\n" if lines else ""))
    return [p_draws, p_acc]


def read_chain_csv(path, variant: str):
    """Parameter draws written by :func:`write_chain`, as a minimal ChainOutput."""
    from .sampler.chain import ChainConfig, ChainOutput

    rows = read_csv(path)
    names = FREE_PARAMS.get(variant)
    if names is None:
        raise InputError(f"unknown model {variant!r}")
    with open(path, encoding="utf-8") as fh:
        header = tuple(fh.readline().strip().split(","))
    if header != tuple(names):
        raise InputError(f"{path}: columns do not match the parameters of {variant}")
    if not rows:
        raise InputError(f"{path}: no draws")
    draws = np.array([[_float(r[n], n) for n in names] for r in rows])
    empty = np.zeros(0)
    return ChainOutput(variant, tuple(names), draws, {}, ChainConfig(), empty, empty, empty,
                       np.full(len(rows), math.nan))


# ----------------------------------------------------------------------
# configuration text


def parse_config(text: str) -> dict:
    """Parse flat ``section.key = value`` lines into ``{section: {key: value}}``.

    Blank lines and ``#`` comments are ignored; values stay strings.
    """
    out = {s: {} for s in CONFIG_SECTIONS}
    for n, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise InputError(f"config line {n}: expected key = value")
        k, v = (t.strip() for t in s.split("=", 1))
        sec, dot, key = k.partition(".")
        if not dot or sec not in out or not key:
            raise InputError(f"config line {n}: unknown key {k!r}")
        if key in out[sec]:
            raise InputError(f"config line {n}: duplicate key {k!r}")
        out[sec][key] = v
    return out


def emit_config(cfg: dict) -> str:
    """Canonical text for a parsed config (sorted; parse(emit(c)) == c)."""
    lines = []
    for sec in CONFIG_SECTIONS:
        for k in sorted(cfg.get(sec, {})):
            lines.append(f"{sec}.{k} = {cfg[sec][k]}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_config(path) -> dict:
    if path is None:
        return parse_config("")
    try:
        return parse_config(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InputError(f"{path}: no such config file") from exc


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(emit_config(cfg).encode()).hexdigest()


# ----------------------------------------------------------------------
# manifests


@dataclass
class RunManifest:
    command: str
    argv: list
    config_hash: str
    seed: int | None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    versions: dict = field(default_factory=dict)

    def write(self, path) -> None:
        atomic_write_text(path, json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise InputError(f"{path}: no such manifest") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not a manifest ({exc})") from exc
        return cls(**d)


def module_versions() -> dict:
    import scipy

    from . import __version__, kernels

    return {"hawkessv": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "kernels": kernels.BACKEND}


def hash_paths(paths: Iterable) -> dict:
    out = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for q in sorted(p.rglob("*")):
                if q.is_file():
                    out[str(q)] = file_sha256(q)
        elif p.exists():
            out[str(p)] = file_sha256(p)
    return out
