"""Report records shared by the experiment runner and the acceptance suite.

A check row records one verified quantity: an identifier, a plain-language
description of the law being checked, the target value, the estimate with its
standard error, and a status. Statuses: "pass"/"fail" for tolerance checks,
"trend" for qualitative trend checks that hold, "info" for diagnostics that
carry no pass/fail meaning.

Floats are serialized with repr so identical runs produce byte-identical
files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

PLOTDATA_HEADER = "experiment,x_name,x,y_name,y,y_stderr"

PASSING = ("pass", "trend", "info")


def fmt(value) -> str:
    """Deterministic text form of a report value."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class CheckRow:
    check_id: str
    reference: str  # plain-language description of the verified law
    target: float | None
    estimate: float | None
    standard_error: float | None
    status: str  # pass | fail | trend | info

    def __post_init__(self):
        assert self.status in ("pass", "fail", "trend", "info")

    @property
    def ok(self) -> bool:
        return self.status in PASSING


@dataclass(frozen=True)
class PlotSeries:
    x_name: str
    y_name: str
    points: tuple  # of (x, y, y_stderr)


@dataclass
class RunReport:
    experiment: str
    seed: int
    config: dict  # fully resolved parameters
    rows: list = field(default_factory=list)
    series: list = field(default_factory=list)
    wall_clock_s: float = 0.0
    event_count: int = 0

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def rows_csv(self) -> str:
        lines = ["check_id,reference,target,estimate,standard_error,status"]
        for r in self.rows:
            ref = '"' + r.reference.replace('"', '""') + '"'
            lines.append(",".join([r.check_id, ref, fmt(r.target),
                                   fmt(r.estimate), fmt(r.standard_error),
                                   r.status]))
        return "\n".join(lines) + "\n"

    def plotdata_csv(self) -> str:
        lines = [PLOTDATA_HEADER]
        for s in self.series:
            for x, y, se in s.points:
                lines.append(",".join([self.experiment, s.x_name, fmt(float(x)),
                                       s.y_name, fmt(float(y)), fmt(float(se))]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        """Deterministic JSON mirror of the report (timing kept separate)."""
        payload = {
            "experiment": self.experiment,
            "seed": self.seed,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "series": [{"x_name": s.x_name, "y_name": s.y_name,
                        "points": [[fmt(float(x)), fmt(float(y)), fmt(float(se))]
                                   for x, y, se in s.points]}
                       for s in self.series],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def run_record_json(self) -> str:
        """Run record with resolved config, seed, and timing (not byte-stable)."""
        payload = {
            "experiment": self.experiment,
            "seed": self.seed,
            "config": self.config,
            "wall_clock_s": self.wall_clock_s,
            "event_count": self.event_count,
            "ok": self.ok,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def parse_plotdata(text: str):
    """Parse an emitted plotdata file back into numeric rows."""
    lines = text.strip().split("\n")
    if lines[0] != PLOTDATA_HEADER:
        raise ValueError(f"unexpected plotdata header {lines[0]!r}")
    out = []
    for line in lines[1:]:
        exp, x_name, x, y_name, y, se = line.split(",")
        out.append((exp, x_name, float(x), y_name, float(y), float(se)))
    return out


def tolerance_row(check_id: str, reference: str, target: float, estimate: float,
                  standard_error: float, *, abs_tol: float | None = None,
                  rel_tol: float | None = None, n_se: float | None = None) -> CheckRow:
    """Pass iff |estimate - target| is within the given tolerance."""
    tol = 0.0
    if abs_tol is not None:
        tol = max(tol, abs_tol)
    if rel_tol is not None:
        tol = max(tol, rel_tol * abs(target))
    if n_se is not None:
        tol = max(tol, n_se * standard_error)
    status = "pass" if abs(estimate - target) <= tol else "fail"
    return CheckRow(check_id=check_id, reference=reference, target=target,
                    estimate=estimate, standard_error=standard_error, status=status)
