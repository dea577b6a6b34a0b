"""CSV/JSON readers and writers used by the command line.

Every written file starts with a ``# manifest: {...}`` comment line (CSV) or a
``manifest`` key (JSON) recording how it was produced.  Numbers are written
with six decimals so repeated runs diff cleanly.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .estimators import EstimateRecord
from .regret import BidSequence, Window

MANIFEST_PREFIX = "# manifest: "


class BidLogError(ValueError):
    """A bid log failed validation."""


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    version: str
    seed: int | None = None
    config: str | None = None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return ""
        out = f"{x:.6f}"
        return "0.000000" if out == "-0.000000" else out
    return str(x)


def _atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], manifest: RunManifest | None) -> None:
    buf = io.StringIO()
    if manifest is not None:
        buf.write(MANIFEST_PREFIX + manifest.to_json() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    _atomic_write(path, buf.getvalue())


def _round(obj):
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return None
        x = round(x, 6)
        return 0.0 if x == 0 else x
    return obj


def write_json(path, obj: dict, manifest: RunManifest | None) -> None:
    body = dict(obj)
    if manifest is not None:
        body = {"manifest": manifest.to_dict(), **body}
    _atomic_write(path, json.dumps(_round(body), indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict | None:
    text = Path(path).read_text()
    if text.startswith(MANIFEST_PREFIX):
        return json.loads(text.splitlines()[0][len(MANIFEST_PREFIX):])
    if text.lstrip().startswith("{"):
        return json.loads(text).get("manifest")
    return None


def _data_lines(path) -> list[tuple[int, str]]:
    with open(path, newline="") as f:
        return [(k, line) for k, line in enumerate(f, start=1)
                if line.strip() and not line.startswith("#")]


def _rows(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    lines = _data_lines(path)
    if not lines:
        raise BidLogError(f"{path}: no header")
    parsed = list(csv.reader([l for _, l in lines]))
    header = [h.strip() for h in parsed[0]]
    return header, [(lines[k][0], [c.strip() for c in parsed[k]]) for k in range(1, len(parsed))]


def _number(text: str, path, lineno: int, what: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise BidLogError(f"{path}:{lineno}: cannot parse {what} {text!r}") from None
    if not math.isfinite(x):
        raise BidLogError(f"{path}:{lineno}: {what} must be finite")
    return x


def _integer(text: str, path, lineno: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise BidLogError(f"{path}:{lineno}: cannot parse {what} {text!r}") from None


def load_bid_log(path, wide: bool = False) -> BidSequence:
    """Read a long-form (auction_index,bidder_id,bid) or wide-form bid log.

    Wide form has a header ``auction_index,<id>,<id>,...`` and one row per
    auction.  A mechanism recorded in the file's manifest is attached.
    """
    header, rows = _rows(path)
    if wide:
        if not header or header[0] != "auction_index" or len(header) < 3:
            raise BidLogError(f"{path}: wide header must be auction_index,<bidder ids...>")
        ids = [_integer(h, path, 1, "bidder id") for h in header[1:]]
        entries = []
        for lineno, r in rows:
            if len(r) != len(header):
                raise BidLogError(f"{path}:{lineno}: expected {len(header)} fields")
            t = _integer(r[0], path, lineno, "auction index")
            for i, cell in zip(ids, r[1:]):
                entries.append((lineno, t, i, cell))
    else:
        if header != ["auction_index", "bidder_id", "bid"]:
            raise BidLogError(f"{path}: header must be auction_index,bidder_id,bid")
        entries = []
        for lineno, r in rows:
            if len(r) != 3:
                raise BidLogError(f"{path}:{lineno}: expected 3 fields")
            entries.append((lineno, _integer(r[0], path, lineno, "auction index"),
                            _integer(r[1], path, lineno, "bidder id"), r[2]))
    if not entries:
        raise BidLogError(f"{path}: empty bid log")

    seen: dict[tuple[int, int], float] = {}
    for lineno, t, i, cell in entries:
        b = _number(cell, path, lineno, "bid")
        if b < 0:
            raise BidLogError(f"{path}:{lineno}: negative bid {b} for bidder {i} at auction {t}")
        if (t, i) in seen:
            raise BidLogError(f"{path}:{lineno}: duplicate bid for bidder {i} at auction {t}")
        seen[(t, i)] = b
    ids = sorted({i for _, i in seen})
    T = max(t for t, _ in seen)
    auctions = {t for t, _ in seen}
    for t in range(1, T + 1):
        if t not in auctions:
            raise BidLogError(f"{path}: auction indices not contiguous, auction {t} missing")
        for i in ids:
            if (t, i) not in seen:
                raise BidLogError(f"{path}: incomplete profile at auction {t} (bidder {i} missing)")
    if min(auctions) != 1:
        raise BidLogError(f"{path}: auction indices must start at 1")
    bids = np.array([[seen[(t, i)] for i in ids] for t in range(1, T + 1)])
    manifest = read_manifest(path) or {}
    mech = manifest.get("options", {}).get("mechanism")
    return BidSequence(bids, tuple(ids), mech)


def write_bid_log(path, seq: BidSequence, manifest: RunManifest | None, wide: bool = False) -> None:
    if wide:
        rows = ([t + 1, *seq.bids[t]] for t in range(seq.T))
        write_csv(path, ["auction_index", *map(str, seq.bidder_ids)], rows, manifest)
    else:
        rows = ((t + 1, i, seq.bids[t, j]) for t in range(seq.T) for j, i in enumerate(seq.bidder_ids))
        write_csv(path, ["auction_index", "bidder_id", "bid"], rows, manifest)


def load_values(path) -> dict[int, float]:
    header, rows = _rows(path)
    if header != ["bidder_id", "value"]:
        raise BidLogError(f"{path}: header must be bidder_id,value")
    out = {}
    for lineno, r in rows:
        i = _integer(r[0], path, lineno, "bidder id")
        v = _number(r[1], path, lineno, "value")
        if v <= 0:
            raise BidLogError(f"{path}:{lineno}: value must be positive")
        out[i] = v
    return out


def write_values(path, values: dict[int, float], manifest: RunManifest | None) -> None:
    write_csv(path, ["bidder_id", "value"], sorted(values.items()), manifest)


ESTIMATE_HEADER = ["bidder_id", "method", "estimate", "window_first", "window_last", "flags"]


def write_estimates(path, records: Sequence[EstimateRecord], manifest: RunManifest | None) -> None:
    rows = ([r.bidder_id, r.method, r.estimate, r.window.first, r.window.last, ";".join(r.flags)]
            for r in records)
    write_csv(path, ESTIMATE_HEADER, rows, manifest)


def load_estimates(path) -> list[EstimateRecord]:
    header, rows = _rows(path)
    if header != ESTIMATE_HEADER:
        raise BidLogError(f"{path}: header must be {','.join(ESTIMATE_HEADER)}")
    out = []
    for lineno, r in rows:
        if len(r) != len(ESTIMATE_HEADER):
            raise BidLogError(f"{path}:{lineno}: expected {len(ESTIMATE_HEADER)} fields")
        out.append(EstimateRecord(
            _integer(r[0], path, lineno, "bidder id"), r[1], _number(r[2], path, lineno, "estimate"),
            Window(_integer(r[3], path, lineno, "window"), _integer(r[4], path, lineno, "window")),
            tuple(f for f in r[5].split(";") if f)))
    return out
