"""Structured step logs: one JSON object per line, numbers at full
binary64 round-trip precision (Python's shortest-repr float formatting),
so equal runs produce byte-identical files.

Internally each record is also a flat 70-float row; the stepping kernels
fill rows and this module converts between rows, typed records, and the
serialized form. Pose groups share one layout: p(3) q(4, w-first) v(3)
w(3), in the station / reference / vehicle order, followed by the
contact wrench, the three feedback components, and the grasp wrench.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

import numpy as np

ROW_WIDTH = 70

T = 0
STATION = slice(1, 14)
REFERENCE = slice(14, 27)
VEHICLE = slice(27, 40)
CONTACT = slice(40, 46)
W_REC = slice(46, 52)
W_INT = slice(52, 58)
W_FB = slice(58, 64)
F_H = slice(64, 70)

# offsets within a 13-float pose group
G_P = slice(0, 3)
G_Q = slice(3, 7)
G_V = slice(7, 10)
G_W = slice(10, 13)


@dataclass(frozen=True, slots=True)
class StepRecord:
    """One logged tick; tuple fields mirror the JSON schema exactly."""

    t: float
    station_p: tuple[float, ...]
    station_q: tuple[float, ...]
    station_v: tuple[float, ...]
    station_w: tuple[float, ...]
    reference_p: tuple[float, ...]
    reference_q: tuple[float, ...]
    reference_v: tuple[float, ...]
    reference_w: tuple[float, ...]
    vehicle_p: tuple[float, ...]
    vehicle_q: tuple[float, ...]
    vehicle_v: tuple[float, ...]
    vehicle_w: tuple[float, ...]
    contact_f: tuple[float, ...]
    contact_tau: tuple[float, ...]
    w_rec: tuple[float, ...]
    w_int: tuple[float, ...]
    w_fb: tuple[float, ...]
    f_h: tuple[float, ...]

    @staticmethod
    def from_row(row) -> "StepRecord":
        if len(row) != ROW_WIDTH:
            raise ValueError(f"record row must have {ROW_WIDTH} floats")
        r = [float(x) for x in row]

        def group(sl: slice) -> list[float]:
            return r[sl]

        st, ref, veh = group(STATION), group(REFERENCE), group(VEHICLE)
        return StepRecord(
            t=r[T],
            station_p=tuple(st[G_P]), station_q=tuple(st[G_Q]),
            station_v=tuple(st[G_V]), station_w=tuple(st[G_W]),
            reference_p=tuple(ref[G_P]), reference_q=tuple(ref[G_Q]),
            reference_v=tuple(ref[G_V]), reference_w=tuple(ref[G_W]),
            vehicle_p=tuple(veh[G_P]), vehicle_q=tuple(veh[G_Q]),
            vehicle_v=tuple(veh[G_V]), vehicle_w=tuple(veh[G_W]),
            contact_f=tuple(r[CONTACT][0:3]), contact_tau=tuple(r[CONTACT][3:6]),
            w_rec=tuple(r[W_REC]), w_int=tuple(r[W_INT]),
            w_fb=tuple(r[W_FB]), f_h=tuple(r[F_H]),
        )

    def to_row(self) -> np.ndarray:
        row = np.empty(ROW_WIDTH)
        row[T] = self.t
        for sl, (p, q, v, w) in (
            (STATION, (self.station_p, self.station_q, self.station_v, self.station_w)),
            (REFERENCE, (self.reference_p, self.reference_q, self.reference_v, self.reference_w)),
            (VEHICLE, (self.vehicle_p, self.vehicle_q, self.vehicle_v, self.vehicle_w)),
        ):
            row[sl] = [*p, *q, *v, *w]
        row[CONTACT] = [*self.contact_f, *self.contact_tau]
        row[W_REC] = self.w_rec
        row[W_INT] = self.w_int
        row[W_FB] = self.w_fb
        row[F_H] = self.f_h
        return row

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "station": {"p": list(self.station_p), "q": list(self.station_q),
                        "v": list(self.station_v), "w": list(self.station_w)},
            "reference": {"p": list(self.reference_p), "q": list(self.reference_q),
                          "v": list(self.reference_v), "w": list(self.reference_w)},
            "vehicle": {"p": list(self.vehicle_p), "q": list(self.vehicle_q),
                        "v": list(self.vehicle_v), "w": list(self.vehicle_w)},
            "contact": {"f": list(self.contact_f), "tau": list(self.contact_tau)},
            "w_rec": list(self.w_rec),
            "w_int": list(self.w_int),
            "w_fb": list(self.w_fb),
            "f_h": list(self.f_h),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "StepRecord":
        def triple(obj, key) -> tuple[float, ...]:
            return tuple(float(x) for x in obj[key])

        return StepRecord(
            t=float(d["t"]),
            station_p=triple(d["station"], "p"), station_q=triple(d["station"], "q"),
            station_v=triple(d["station"], "v"), station_w=triple(d["station"], "w"),
            reference_p=triple(d["reference"], "p"), reference_q=triple(d["reference"], "q"),
            reference_v=triple(d["reference"], "v"), reference_w=triple(d["reference"], "w"),
            vehicle_p=triple(d["vehicle"], "p"), vehicle_q=triple(d["vehicle"], "q"),
            vehicle_v=triple(d["vehicle"], "v"), vehicle_w=triple(d["vehicle"], "w"),
            contact_f=triple(d["contact"], "f"), contact_tau=triple(d["contact"], "tau"),
            w_rec=triple(d, "w_rec"), w_int=triple(d, "w_int"),
            w_fb=triple(d, "w_fb"), f_h=triple(d, "f_h"),
        )


def dump_row(row) -> str:
    """Serialize one row without building a StepRecord (hot logging path)."""
    return json.dumps(StepRecord.from_row(row).to_json_dict(), separators=(",", ":"))


def write_rows(fh: IO[str], rows: Iterable) -> int:
    n = 0
    for row in rows:
        fh.write(dump_row(row))
        fh.write("\n")
        n += 1
    return n


def write_log(path: str, rows: Iterable) -> int:
    with open(path, "w") as fh:
        return write_rows(fh, rows)


def iter_records(path: str) -> Iterator[StepRecord]:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield StepRecord.from_json_dict(json.loads(line))


def load_rows(path: str) -> np.ndarray:
    """Whole log as an (n, 70) array; empty logs give shape (0, 70)."""
    rows = [rec.to_row() for rec in iter_records(path)]
    if not rows:
        return np.empty((0, ROW_WIDTH))
    return np.vstack(rows)


@dataclass(frozen=True, slots=True)
class InputRecord:
    """One operator input as consumed at a tick (for session replay)."""

    tick: int
    mode: str  # "pose" | "wrench"
    v: tuple[float, ...]

    def to_json_line(self) -> str:
        return json.dumps({"tick": self.tick, "mode": self.mode, "v": list(self.v)},
                          separators=(",", ":"))


def write_inputs(path: str, inputs: Iterable[InputRecord]) -> int:
    n = 0
    with open(path, "w") as fh:
        for rec in inputs:
            fh.write(rec.to_json_line())
            fh.write("\n")
            n += 1
    return n


def read_inputs(path: str) -> list[InputRecord]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                d = json.loads(line)
                out.append(InputRecord(int(d["tick"]), str(d["mode"]), tuple(float(x) for x in d["v"])))
    return out
