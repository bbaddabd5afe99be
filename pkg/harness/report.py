"""Run reports: one row per (instance, bound) with the numbers the verdict derives from."""
import math
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import orjson
import pandas as pd
from loguru import logger

from common.audit import audit_event
from common.errors import ReportError

JsonDict = Dict[str, Any]

COLUMNS = [
    "instance_id", "mechanism", "eq_kind", "eps", "eps_ci", "sw_eq", "ew_eq", "sw_opt", "ew_opt", "ratio",
    "bound", "pass", "seed", "wallclock_ms",
]
WELFARE_FIELDS = ("sw_eq", "ew_eq", "sw_opt", "ew_opt")

_BOUND = re.compile(r"^(?P<num>\w+)/(?P<den>\w+)(?P<op><=|>=)(?P<value>[^;]+)(?:;eps<=(?P<tol>.+))?$")


def ratio_of(num: Optional[float], den: Optional[float]) -> float:
    if num is None or den is None:
        raise ReportError("ratio needs both welfare values")
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


@dataclass(frozen=True)
class Bound:
    """`<num>/<den><op><value>[;eps<=<tol>]` over the report's welfare fields."""
    num: str
    den: str
    op: str
    value: float
    eps_tol: Optional[float] = None

    def __post_init__(self):
        if self.num not in WELFARE_FIELDS or self.den not in WELFARE_FIELDS:
            raise ReportError(f"bound must relate welfare fields, got {self.num}/{self.den}")
        if self.op not in ("<=", ">="):
            raise ReportError(f"unknown comparison {self.op}")

    def __str__(self) -> str:
        text = f"{self.num}/{self.den}{self.op}{self.value!r}"
        return text if self.eps_tol is None else f"{text};eps<={self.eps_tol!r}"

    @classmethod
    def parse(cls, text: str) -> "Bound":
        match = _BOUND.match(text)
        if match is None:
            raise ReportError(f"cannot parse bound {text!r}")
        tol = match.group("tol")
        return cls(match.group("num"), match.group("den"), match.group("op"), float(match.group("value")),
                   None if tol is None else float(tol))

    def holds(self, ratio: float, eps: float, eps_ci: float) -> bool:
        ok = ratio <= self.value if self.op == "<=" else ratio >= self.value
        if self.eps_tol is not None:
            ok = ok and eps - eps_ci <= self.eps_tol
        return bool(ok)


@dataclass
class RunReport:
    instance_id: str
    mechanism: str
    eq_kind: str
    eps: float
    eps_ci: float
    sw_eq: float
    ew_eq: Optional[float]
    sw_opt: float
    ew_opt: Optional[float]
    ratio: float
    bound: str
    passed: bool
    seed: int
    wallclock_ms: float

    @classmethod
    def build(cls, *, instance_id: str, mechanism: str, eq_kind: str, eps: float, sw_eq: float, sw_opt: float,
              bound: Bound, seed: int, wallclock_ms: float, eps_ci: float = 0.0, ew_eq: Optional[float] = None,
              ew_opt: Optional[float] = None) -> "RunReport":
        values = {"sw_eq": sw_eq, "ew_eq": ew_eq, "sw_opt": sw_opt, "ew_opt": ew_opt}
        ratio = ratio_of(values[bound.num], values[bound.den])
        return cls(instance_id, mechanism, eq_kind, float(eps), float(eps_ci), float(sw_eq),
                   None if ew_eq is None else float(ew_eq), float(sw_opt), None if ew_opt is None else float(ew_opt),
                   ratio, str(bound), bound.holds(ratio, eps, eps_ci), int(seed), float(wallclock_ms))

    def recheck(self) -> bool:
        """Re-derive the verdict from the stored numbers and the bound string."""
        bound = Bound.parse(self.bound)
        ratio = ratio_of(getattr(self, bound.num), getattr(self, bound.den))
        if ratio != self.ratio:
            raise ReportError(f"{self.instance_id}: stored ratio {self.ratio!r} != recomputed {ratio!r}")
        return bound.holds(ratio, self.eps, self.eps_ci)

    def to_row(self) -> JsonDict:
        row = asdict(self)
        row["pass"] = row.pop("passed")
        return {c: row[c] for c in COLUMNS}

    @classmethod
    def from_row(cls, row: JsonDict) -> "RunReport":
        data = {c: row[c] for c in COLUMNS}
        for key in ("ew_eq", "ew_opt"):
            value = data[key]
            data[key] = None if value is None or (isinstance(value, float) and math.isnan(value)) else float(value)
        data["passed"] = bool(data.pop("pass"))
        return cls(**data)


def reports_frame(reports: Sequence[RunReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in reports], columns=COLUMNS)


def emit_report(reports: Sequence[RunReport], format: str, path: str) -> Path:
    """Write reports as CSV (fixed column order) or JSON (same field names)."""
    if not reports:
        raise ReportError("no reports to emit")
    if format not in ("csv", "json"):
        raise ReportError(f"unknown report format {format}")
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        if format == "csv":
            reports_frame(reports).to_csv(target, index=False)
        else:
            target.write_bytes(orjson.dumps([r.to_row() for r in reports], option=orjson.OPT_INDENT_2))
    except OSError as e:
        raise ReportError(f"cannot write {target}: {e}") from e
    passed = sum(r.passed for r in reports)
    logger.info(f"wrote {len(reports)} reports to {target} ({passed} passing)")
    audit_event("report.emitted", details={"path": str(target), "format": format, "rows": len(reports),
                                           "passed": passed})
    return target


def load_reports(path: str) -> List[RunReport]:
    target = Path(path)
    try:
        if target.suffix == ".json":
            rows = orjson.loads(target.read_bytes())
        else:
            rows = pd.read_csv(target, float_precision="round_trip").to_dict(orient="records")
    except (OSError, ValueError) as e:
        raise ReportError(f"cannot read {target}: {e}") from e
    return [RunReport.from_row(row) for row in rows]
