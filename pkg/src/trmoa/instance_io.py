"""Reading and writing instances and allocations.

An instance directory holds one CSV per entity plus ``manifest.txt``:

* ``trajectories.csv``  ``user_id,lat,lon,t_start,t_end``
* ``affinities.csv``    ``user_id,tag_id,prob``
* ``billboards.csv``    ``board_id,lat,lon``
* ``slots.csv``         ``slot_id,board_id,lat,lon,t_start,t_end,cost,base_influence``
* ``advertisers.csv``   ``adv_id,demand,payment,tags`` (tags joined with ``;``)
* ``manifest.txt``      ``key=value`` lines: horizon, slot duration, provenance

Floats are written with ``repr`` so a write/read round trip is exact.
:func:`ingest_csv` builds an instance from the four raw tables alone; slots,
costs and influences are derived.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .geo import GridIndex
from .model import (
    Advertiser,
    AdvertiserRegret,
    Allocation,
    BillboardSlot,
    Instance,
    RegretReport,
    TagAffinity,
    TrajectoryRecord,
)

log = logging.getLogger(__name__)

TRAJECTORY_FIELDS = ("user_id", "lat", "lon", "t_start", "t_end")
AFFINITY_FIELDS = ("user_id", "tag_id", "prob")
BILLBOARD_FIELDS = ("board_id", "lat", "lon")
SLOT_FIELDS = ("slot_id", "board_id", "lat", "lon", "t_start", "t_end", "cost", "base_influence")
ADVERTISER_FIELDS = ("adv_id", "demand", "payment", "tags")
ALLOCATION_HEADER = "# trmoa-allocation v1"
MANIFEST_HEADER = "# trmoa-instance v1"


class MalformedRowError(ValueError):
    """A CSV row that cannot be parsed; the message names file and line."""


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _int(text: str) -> int:
    x = float(text)
    if not x.is_integer():
        raise ValueError(f"expected whole seconds, got {text!r}")
    return int(x)


def _finite(text: str) -> float:
    x = float(text)
    if not math.isfinite(x):
        raise ValueError(f"non-finite number {text!r}")
    return x


def _rows(path: Path, fields: tuple[str, ...]):
    """Yield ``(line_number, dict)`` for each data row, checking the header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != fields:
            raise MalformedRowError(f"{path}:1: expected header {','.join(fields)}, got {header}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(fields):
                raise MalformedRowError(f"{path}:{reader.line_num}: expected {len(fields)} fields, got {len(row)}")
            yield reader.line_num, dict(zip(fields, (c.strip() for c in row)))


def _parse(path: Path, fields, build):
    out = []
    for line, row in _rows(path, fields):
        try:
            out.append(build(row))
        except (ValueError, TypeError) as e:
            raise MalformedRowError(f"{path}:{line}: {e}") from None
    return out


def _trajectory(r) -> TrajectoryRecord:
    return TrajectoryRecord(r["user_id"], _finite(r["lat"]), _finite(r["lon"]), _int(r["t_start"]), _int(r["t_end"]))


def _affinity(r) -> TagAffinity:
    return TagAffinity(r["user_id"], r["tag_id"], _finite(r["prob"]))


def _billboard(r):
    return r["board_id"], _finite(r["lat"]), _finite(r["lon"])


def _slot(r) -> BillboardSlot:
    return BillboardSlot(
        r["slot_id"], r["board_id"], _finite(r["lat"]), _finite(r["lon"]),
        _int(r["t_start"]), _int(r["t_end"]), _finite(r["cost"]), _finite(r["base_influence"]),
    )


def _advertiser(r) -> Advertiser:
    tags = tuple(sorted({t.strip() for t in r["tags"].split(";") if t.strip()}))
    return Advertiser(r["adv_id"], _finite(r["demand"]), _finite(r["payment"]), tags)


def _write_csv(path: Path, fields, rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _check_unique(ids, what: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise ValueError(f"duplicate {what} {i!r}")
        seen.add(i)


def write_instance(instance: Instance, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "trajectories.csv", TRAJECTORY_FIELDS,
               ((r.user_id, r.lat, r.lon, r.t_start, r.t_end) for r in instance.trajectories))
    _write_csv(out / "affinities.csv", AFFINITY_FIELDS, ((a.user_id, a.tag_id, a.prob) for a in instance.affinities))
    boards = {}
    for s in instance.slots:
        boards.setdefault(s.board_id, (s.board_id, s.lat, s.lon))
    _write_csv(out / "billboards.csv", BILLBOARD_FIELDS, (boards[b] for b in sorted(boards)))
    _write_csv(out / "slots.csv", SLOT_FIELDS,
               ((s.slot_id, s.board_id, s.lat, s.lon, s.t_start, s.t_end, s.cost, s.base_influence) for s in instance.slots))
    _write_csv(out / "advertisers.csv", ADVERTISER_FIELDS,
               ((a.adv_id, a.demand, a.payment, ";".join(a.tags)) for a in instance.advertisers))
    manifest = {
        "t1": str(instance.horizon[0]),
        "t2": str(instance.horizon[1]),
        "slot_duration": str(instance.slot_duration),
    }
    manifest.update({f"meta.{k}": str(v) for k, v in instance.meta.items()})
    (out / "manifest.txt").write_text(
        MANIFEST_HEADER + "\n" + "".join(f"{k}={manifest[k]}\n" for k in sorted(manifest))
    )
    return out


def read_manifest(path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise MalformedRowError(f"{path}:{n}: expected key=value")
        out[key.strip()] = value.strip()
    return out


def read_instance(in_dir) -> Instance:
    d = Path(in_dir)
    manifest = read_manifest(d / "manifest.txt")
    try:
        horizon = (int(manifest["t1"]), int(manifest["t2"]))
        delta = int(manifest["slot_duration"])
    except KeyError as e:
        raise MalformedRowError(f"{d / 'manifest.txt'}: missing key {e.args[0]}") from None
    slots = _parse(d / "slots.csv", SLOT_FIELDS, _slot)
    advertisers = _parse(d / "advertisers.csv", ADVERTISER_FIELDS, _advertiser)
    _check_unique((s.slot_id for s in slots), "slot_id")
    _check_unique((a.adv_id for a in advertisers), "adv_id")
    meta = {k[5:]: v for k, v in manifest.items() if k.startswith("meta.")}
    return Instance(
        tuple(_parse(d / "trajectories.csv", TRAJECTORY_FIELDS, _trajectory)),
        tuple(_parse(d / "affinities.csv", AFFINITY_FIELDS, _affinity)),
        tuple(slots),
        tuple(advertisers),
        horizon,
        delta,
        meta,
    )


def ingest_csv(
    trajectories,
    affinities,
    billboards,
    advertisers,
    *,
    slot_duration: int = 1_800,
    t1: int | None = None,
    t2: int | None = None,
    gamma: float = 100.0,
    seed: int = 0,
) -> Instance:
    """Build an instance from raw tables (paths to CSV files).

    Without ``t1``/``t2`` the horizon starts at the earliest record and is
    rounded up to a whole number of slots. Records outside the horizon,
    boards no record comes within ``gamma`` meters of, and affinities of
    users without records are dropped (and logged). Slot costs draw their
    noise from ``seed``.
    """
    from .generate import price_slots, tile_slots

    if slot_duration <= 0:
        raise ValueError("slot_duration must be positive")
    recs = _parse(Path(trajectories), TRAJECTORY_FIELDS, _trajectory)
    affs = _parse(Path(affinities), AFFINITY_FIELDS, _affinity)
    boards = _parse(Path(billboards), BILLBOARD_FIELDS, _billboard)
    advs = _parse(Path(advertisers), ADVERTISER_FIELDS, _advertiser)
    _check_unique((b[0] for b in boards), "board_id")
    _check_unique((a.adv_id for a in advs), "adv_id")
    _check_unique(((a.user_id, a.tag_id) for a in affs), "affinity (user_id, tag_id)")
    if not recs:
        raise ValueError(f"{trajectories}: no trajectory records")

    lo = t1 if t1 is not None else min(r.t_start for r in recs)
    if t2 is None:
        hi = lo + math.ceil((max(r.t_end for r in recs) - lo) / slot_duration) * slot_duration
        hi = max(hi, lo + slot_duration)
    else:
        hi = t2
    if hi <= lo or (hi - lo) % slot_duration:
        raise ValueError(f"horizon [{lo}, {hi}] is not a positive multiple of slot_duration={slot_duration}")

    kept = [r for r in recs if r.t_start >= lo and r.t_end <= hi]
    if len(kept) < len(recs):
        log.info("dropped %d trajectory records outside the horizon [%d, %d]", len(recs) - len(kept), lo, hi)
    if not kept:
        raise ValueError("no trajectory records inside the horizon")
    users = {r.user_id for r in kept}
    known = [a for a in affs if a.user_id in users]
    if len(known) < len(affs):
        log.info("dropped %d affinities of users without trajectory records", len(affs) - len(known))

    grid = GridIndex(np.array([r.lat for r in kept]), np.array([r.lon for r in kept]), gamma)
    reachable = [b for b in boards if grid.query(b[1], b[2])]
    if len(reachable) < len(boards):
        log.info("dropped %d billboards with no trajectory record within %g m", len(boards) - len(reachable), gamma)

    horizon = (lo, hi)
    draft = Instance(tuple(kept), tuple(known), tuple(tile_slots(reachable, lo, hi, slot_duration)), (), horizon, slot_duration)
    rng = np.random.RandomState(np.random.MT19937(np.random.SeedSequence(seed)))
    slots = price_slots(draft, gamma, rng)
    meta = {"source": "ingest", "gamma": repr(float(gamma)), "seed": str(seed)}
    return Instance(tuple(kept), tuple(known), slots, tuple(advs), horizon, slot_duration, meta)


def serialize_allocation(alloc: Allocation, report: RegretReport | None = None, summary=None) -> str:
    """Canonical text form: sorted, ``repr`` floats, ``\\n`` line ends.

    Bucket order within a tag is kept, so the text fixes the allocation
    exactly; :func:`parse_allocation` inverts it.
    """
    buf = io.StringIO()
    buf.write(ALLOCATION_HEADER + "\n")
    buf.write("adv_id,tag_id,slot_id\n")
    for a in sorted(alloc.buckets):
        for t in sorted(alloc.buckets[a]):
            for s in alloc.buckets[a][t]:
                buf.write(f"{a},{t},{s}\n")
    buf.write("# advertisers\n")
    for a in sorted(alloc.buckets):
        if not alloc.buckets[a]:
            buf.write(f"{a}\n")
    if report is not None:
        buf.write("# regret\nadv_id,achieved,demand,payment,regret,kind\n")
        for e in sorted(report.entries, key=lambda e: e.adv_id):
            buf.write(",".join([e.adv_id, *(repr(float(x)) for x in (e.achieved, e.demand, e.payment, e.regret)), e.kind]) + "\n")
    buf.write("# unassigned\n")
    for s in sorted(alloc.unassigned):
        buf.write(f"{s}\n")
    summary = dict(summary or {})
    if report is not None:
        summary.update(
            total_regret=repr(report.total),
            excessive_regret=repr(report.excessive),
            unsatisfied_regret=repr(report.unsatisfied),
            n_satisfied=str(report.n_satisfied),
        )
    summary.update(n_allocated=str(alloc.n_allocated()), n_unassigned=str(len(alloc.unassigned)))
    buf.write("# summary\n")
    for k in sorted(summary):
        buf.write(f"{k}={summary[k]}\n")
    return buf.getvalue()


def parse_allocation(text: str) -> tuple[Allocation, RegretReport | None, dict[str, str]]:
    lines = text.splitlines()
    if not lines or lines[0] != ALLOCATION_HEADER:
        raise ValueError(f"line 1: expected {ALLOCATION_HEADER!r}")
    buckets: dict[str, dict[str, list[str]]] = {}
    unassigned, entries, summary = [], [], {}
    section = "rows"
    for n, line in enumerate(lines[1:], 2):
        if line.startswith("# "):
            section = line[2:]
            continue
        if line in ("adv_id,tag_id,slot_id", "adv_id,achieved,demand,payment,regret,kind") or not line:
            continue
        try:
            if section == "rows":
                a, t, s = line.split(",")
                buckets.setdefault(a, {}).setdefault(t, []).append(s)
            elif section == "advertisers":
                buckets.setdefault(line, {})
            elif section == "regret":
                a, x, d, p, r, kind = line.split(",")
                entries.append(AdvertiserRegret(a, float(x), float(d), float(p), float(r), kind))
            elif section == "unassigned":
                unassigned.append(line)
            elif section == "summary":
                k, sep, v = line.partition("=")
                if not sep:
                    raise ValueError("expected key=value")
                summary[k] = v
            else:
                raise ValueError(f"unknown section {section!r}")
        except ValueError as e:
            raise ValueError(f"line {n}: {e}") from None
    for e in entries:
        buckets.setdefault(e.adv_id, {})
    alloc = Allocation({a: {t: tuple(v) for t, v in b.items()} for a, b in buckets.items()}, tuple(unassigned))
    report = RegretReport(tuple(entries)) if entries else None
    for k in ("total_regret", "excessive_regret", "unsatisfied_regret", "n_satisfied", "n_allocated", "n_unassigned"):
        summary.pop(k, None)
    return alloc, report, summary
