"""Parameter sweeps of the CRIB and their CSV/JSON result files."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidConfig
from .fim import MODELS, canonical_model, crib_model
from .ggd import GgdParams
from .model import linear_schedule

SCHEMA = "crib-bse/result-rows"
SCHEMA_VERSION = 1
CSV_COLUMNS = ("model", "axis", "value", "d", "N", "T", "alpha", "gamma", "tau", "isr", "isr_db", "identifiable", "rcond")
AXES = ("alpha", "gamma", "tau")


def max_threads() -> int:
    env = os.environ.get("CRIB_BSE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidConfig("CRIB_BSE_THREADS", f"not an integer: {env!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SweepSpec:
    axis: str = "alpha"
    grid_min: float = 0.2
    grid_max: float = 5.0
    points: int = 21
    spacing: str = "log"
    d: int = 5
    N: int = 5000
    T: int = 10
    schedule: str = "linear"
    alpha: float = 1.0
    gamma: float = 0.0
    tau: float = 0.0
    models: tuple = MODELS

    def validate(self) -> "SweepSpec":
        if self.axis not in AXES:
            raise InvalidConfig("axis", f"must be one of {', '.join(AXES)}, got {self.axis!r}")
        if self.points < 1:
            raise InvalidConfig("grid", "needs at least one point")
        if self.spacing not in ("linear", "log"):
            raise InvalidConfig("grid", f"spacing must be linear or log, got {self.spacing!r}")
        if self.spacing == "log" and self.grid_min <= 0:
            raise InvalidConfig("grid", "log spacing needs a positive minimum")
        if self.grid_max < self.grid_min:
            raise InvalidConfig("grid", "maximum below minimum")
        if self.d < 2:
            raise InvalidConfig("d", f"need at least 2 sensors, got {self.d}")
        if self.T < 1:
            raise InvalidConfig("T", f"need at least one block, got {self.T}")
        if self.N < 1 or self.N % self.T:
            raise InvalidConfig("N", f"N={self.N} is not a positive multiple of T={self.T}")
        if self.schedule != "linear":
            raise InvalidConfig("schedule", f"only 'linear' is supported, got {self.schedule!r}")
        if not self.models:
            raise InvalidConfig("models", "no models selected")
        object.__setattr__(self, "models", tuple(canonical_model(m) for m in self.models))
        for v in self.values():
            self._point(v)
        return self

    def values(self) -> list[float]:
        if self.points == 1:
            raw = np.array([self.grid_min])
        elif self.spacing == "log":
            raw = np.geomspace(self.grid_min, self.grid_max, self.points)
        else:
            raw = np.linspace(self.grid_min, self.grid_max, self.points)
        # snap to 12 significant digits so grid points like 1.0 are exact
        return [float(f"{v:.12g}") for v in raw]

    def _point(self, value: float) -> tuple[GgdParams, float]:
        params = {"alpha": self.alpha, "gamma": self.gamma, "tau": self.tau, self.axis: value}
        if not 0.0 <= params["tau"] <= 1.0:
            raise InvalidConfig("tau", f"must lie in [0, 1], got {params['tau']}")
        try:
            return GgdParams(params["alpha"], params["gamma"]), params["tau"]
        except Exception as exc:
            field_name = "alpha" if "alpha" in str(exc) else "gamma"
            raise InvalidConfig(field_name, str(exc)) from None


PRESETS = {
    "chart1": SweepSpec(axis="alpha", grid_min=0.2, grid_max=5.0, points=21, spacing="log", gamma=0.0, tau=0.0),
    "chart2": SweepSpec(axis="gamma", grid_min=0.0, grid_max=0.95, points=20, spacing="linear", alpha=1.0, tau=0.0),
    "chart3": SweepSpec(axis="tau", grid_min=0.0, grid_max=1.0, points=21, spacing="linear", alpha=1.0, gamma=0.0),
}


@dataclass(frozen=True)
class ResultRow:
    model: str
    axis: str
    value: float
    d: int
    N: int
    T: int
    alpha: float
    gamma: float
    tau: float
    isr: float
    isr_db: float
    identifiable: bool
    rcond: float


def _evaluate(spec: SweepSpec, value: float) -> list[ResultRow]:
    ggd, tau = spec._point(value)
    schedule = linear_schedule(spec.T)
    rows = []
    for m in spec.models:
        r = crib_model(m, spec.d, spec.N, spec.T, schedule, ggd, tau)
        rows.append(
            ResultRow(m, spec.axis, value, spec.d, spec.N, spec.T, ggd.alpha, ggd.gamma, tau,
                      r.isr, r.isr_db, r.identifiable, float(r.rcond))
        )
    return rows


def run_sweep(spec: SweepSpec, threads: int | None = None) -> list[ResultRow]:
    """One row per model per grid point, ordered by grid point then model."""
    spec.validate()
    values = spec.values()
    with ThreadPoolExecutor(max_workers=threads or max_threads()) as pool:
        chunks = list(pool.map(lambda v: _evaluate(spec, v), values))
    return [row for chunk in chunks for row in chunk]


# -- serialization ---------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) and v > 0 else repr(v)
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {SCHEMA} v{SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


_INT_COLS = {"d", "N", "T"}
_FLOAT_COLS = {"value", "alpha", "gamma", "tau", "isr", "isr_db", "rcond"}


def parse_csv(text: str) -> list[ResultRow]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    rows = []
    for rec in reader:
        kw = {}
        for c in CSV_COLUMNS:
            v = rec[c]
            if c in _INT_COLS:
                kw[c] = int(v)
            elif c in _FLOAT_COLS:
                kw[c] = float(v)
            elif c == "identifiable":
                kw[c] = v == "true"
            else:
                kw[c] = v
        rows.append(ResultRow(**kw))
    return rows


def rows_to_json(rows) -> str:
    out = []
    for row in rows:
        rec = asdict(row)
        if not row.identifiable:
            rec["isr"] = None
            rec["isr_db"] = None
        out.append(rec)
    doc = {"schema": SCHEMA, "version": SCHEMA_VERSION, "rows": out}
    return json.dumps(doc, indent=2) + "\n"


def parse_json(text: str) -> list[ResultRow]:
    doc = json.loads(text)
    if doc.get("schema") != SCHEMA:
        raise ValueError("not a crib-bse result file")
    rows = []
    for rec in doc["rows"]:
        rec = dict(rec)
        for k in ("isr", "isr_db"):
            if rec[k] is None:
                rec[k] = math.inf
        rows.append(ResultRow(**rec))
    return rows


def gnuplot_script(csv_name: str, spec: SweepSpec, title: str | None = None) -> str:
    """Plain-text gnuplot script plotting ``isr_db`` against the swept axis."""
    col = {c: i + 1 for i, c in enumerate(CSV_COLUMNS)}
    lines = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        f"set xlabel '{spec.axis}'",
        "set ylabel 'CRIB on ISR [dB]'",
        f"set title '{title or 'CRIB sweep over ' + spec.axis}'",
        "set key top right",
        "set grid",
    ]
    if spec.spacing == "log":
        lines.append("set logscale x")
    plots = []
    for m in spec.models:
        plots.append(
            f"'{csv_name}' skip 2 using (strcol({col['model']}) eq '{m}' && strcol({col['identifiable']}) eq 'true' "
            f"? ${col['value']} : 1/0):{col['isr_db']} with linespoints title '{m}'"
        )
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
