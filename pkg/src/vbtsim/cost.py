"""Manufacturing cost of monolithically printed sensors: unit metrics and tray batching."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .core import Variant
from .errors import CapacityError

TABLE_COLUMNS = ("Sensor", "Size X/Y/Z(mm)", "Volume(cm^3)", "AG(g)", "VR(g)", "DG(g)", "Sup(g)",
                 "Time(min)", "Cost(£)", "T/V(min/cm^3)", "C/V(£/cm^3)")

KNEE = 8  # tray slots along X
TRAY_X = 8
TRAY_Y = {
    Variant.C_Tac: 6, Variant.Vi_C_Tac: 6, Variant.Vi_C_Sight: 6,  # Digit base
    Variant.C_Sight: 8, Variant.C_SighTac: 8,  # custom base
}
# C-Tac full-tray averages, the only measured batch point
ANCHOR_CAPACITY = 48
ANCHOR_TIME = 9.08
ANCHOR_COST = 2.43
# per-extra-column time as a share of the fixed setup time; 1/52 keeps every
# average curve non-increasing up to a 64-unit tray (needs share <= 1/50)
COLUMN_SHARE = 1.0 / 52.0


@dataclass(frozen=True)
class CostRecord:
    name: str
    footprint: tuple[float, float, float]
    volume: float
    materials: dict
    time_single: float
    cost_single: float

    def __post_init__(self):
        vals = (*self.footprint, self.volume, self.time_single, self.cost_single, *self.materials.values())
        if not all(v > 0 for v in vals):
            raise ValueError(f"{self.name}: all cost-record quantities must be > 0")

    @property
    def variant(self) -> Variant:
        return Variant.parse(self.name)


@dataclass(frozen=True)
class BatchCalibration:
    fixed_overhead_time: float
    marginal_time: float
    per_extra_column_time: float
    fixed_overhead_cost: float
    marginal_cost: float
    knee: int = KNEE


@dataclass(frozen=True)
class BatchPlan:
    record: CostRecord
    capacity: int
    avg_time: float
    avg_cost: float


def unit_metrics(rec: CostRecord) -> dict[str, float]:
    return {"t_per_v": rec.time_single / rec.volume, "c_per_v": rec.cost_single / rec.volume}


def tray_capacity(sensor: Variant | str) -> int:
    v = Variant.parse(sensor) if isinstance(sensor, str) else sensor
    return TRAY_X * TRAY_Y[v]


def _parse_row(row: dict) -> CostRecord:
    fp = tuple(float(s) for s in row["Size X/Y/Z(mm)"].lower().split("x"))
    mats = {k: float(row[f"{k}(g)"]) for k in ("AG", "VR", "DG", "Sup")}
    return CostRecord(name=row["Sensor"].strip(), footprint=fp, volume=float(row["Volume(cm^3)"]),
                      materials=mats, time_single=float(row["Time(min)"]), cost_single=float(row["Cost(£)"]))


def load_table(path: str | Path | None = None) -> dict[str, CostRecord]:
    """Read the per-sensor cost table (bundled copy when ``path`` is None)."""
    if path is None:
        text = resources.files("vbtsim").joinpath("data/table2.csv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in TABLE_COLUMNS[:9] if c not in (reader.fieldnames or [])]
    if missing:
        raise ValueError(f"cost table lacks columns {missing}")
    return {r.name: r for r in map(_parse_row, reader)}


def record_for(table: dict[str, CostRecord], sensor: Variant | str) -> CostRecord:
    v = Variant.parse(sensor) if isinstance(sensor, str) else sensor
    for rec in table.values():
        if rec.variant is v:
            return rec
    raise KeyError(f"no cost record for {v.value}")


def _columns_beyond_first(n: int, knee: int) -> int:
    return max(0, math.ceil(n / knee - 1))


def calibrate(rec: CostRecord, anchor_time: float | None = None, anchor_cost: float | None = None,
              anchor_capacity: int = ANCHOR_CAPACITY, column_share: float = COLUMN_SHARE,
              knee: int = KNEE) -> BatchCalibration:
    """Fit the batch model to the single-unit values and one full-tray average.

    Without explicit anchors every sensor reuses the C-Tac full-tray reduction
    ratios.  The time model has three constants and two endpoints; the third
    condition ties the per-column overhead to the setup time.
    """
    if anchor_time is None:
        anchor_time = rec.time_single * ANCHOR_TIME / 74.0
    if anchor_cost is None:
        anchor_cost = rec.cost_single * ANCHOR_COST / 4.678
    n = anchor_capacity
    cols = _columns_beyond_first(n, knee)
    # T0 + tm = t1 ; T0 + n tm + cols * share * T0 = n * tn
    t0 = (n * rec.time_single - n * anchor_time) / (n - 1 - cols * column_share)
    tm = rec.time_single - t0
    # C0 + cm = c1 ; C0 + n cm = n * cn
    cm = (n * anchor_cost - rec.cost_single) / (n - 1)
    c0 = rec.cost_single - cm
    if min(t0, tm, c0, cm) <= 0:
        raise ValueError(f"{rec.name}: batch anchors give non-positive model constants")
    return BatchCalibration(fixed_overhead_time=t0, marginal_time=tm, per_extra_column_time=column_share * t0,
                            fixed_overhead_cost=c0, marginal_cost=cm, knee=knee)


def total_time(calib: BatchCalibration, n: int) -> float:
    return (calib.fixed_overhead_time + n * calib.marginal_time
            + _columns_beyond_first(n, calib.knee) * calib.per_extra_column_time)


def total_cost(calib: BatchCalibration, n: int) -> float:
    return calib.fixed_overhead_cost + n * calib.marginal_cost


def batch_plan(rec: CostRecord, capacity: int, calib: BatchCalibration | None = None) -> BatchPlan:
    cap = tray_capacity(rec.variant)
    if not isinstance(capacity, int) or not 1 <= capacity <= cap:
        base = "Digit-base" if cap == 48 else "custom-base"
        raise CapacityError(f"capacity {capacity} outside 1..{cap} ({base} tray max {cap} for {rec.name})")
    calib = calib or calibrate(rec)
    return BatchPlan(record=rec, capacity=capacity, avg_time=total_time(calib, capacity) / capacity,
                     avg_cost=total_cost(calib, capacity) / capacity)


def sweep(rec: CostRecord, calib: BatchCalibration | None = None) -> list[BatchPlan]:
    calib = calib or calibrate(rec)
    return [batch_plan(rec, n, calib) for n in range(1, tray_capacity(rec.variant) + 1)]
