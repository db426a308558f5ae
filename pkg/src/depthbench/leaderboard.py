"""Rank submissions by final score."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources

from .errors import FormatError
from .metrics import ScoreParams, calibrate_c, final_score

LEADERBOARD_SCHEMA = "depthbench.leaderboard/1"


@dataclass(frozen=True)
class Row:
    name: str
    si_rmse: float
    runtime_ms: float
    reported_score: float | None = None


@dataclass(frozen=True)
class Ranked:
    rank: int
    row: Row
    score: float

    @property
    def rounded(self) -> int:
        return int(round(self.score))


def parse_rows(text: str) -> list[Row]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    need = {"name", "si_rmse", "runtime_ms"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise FormatError(f"leaderboard CSV needs columns {sorted(need)}")
    rows = []
    for i, r in enumerate(reader, start=2):
        try:
            rep = r.get("reported_score")
            rows.append(Row(r["name"], float(r["si_rmse"]), float(r["runtime_ms"]),
                            float(rep) if rep not in (None, "") else None))
        except ValueError as exc:
            raise FormatError(f"line {i}: {exc}") from None
    return rows


def read_rows(path) -> list[Row]:
    with open(path, newline="") as fh:
        return parse_rows(fh.read())


def builtin_rows() -> list[Row]:
    """The eight reference rows bundled with the package."""
    text = resources.files("depthbench").joinpath("data/reference_results.csv").read_text()
    return parse_rows(text)


def calibrate_from(rows: list[Row], name: str) -> ScoreParams:
    for r in rows:
        if r.name == name:
            if r.reported_score is None:
                raise FormatError(f"row {name!r} has no reported_score to calibrate from")
            return ScoreParams(calibrate_c(r.si_rmse, r.runtime_ms, r.reported_score))
    raise FormatError(f"no row named {name!r}")


def rank(rows: list[Row], params: ScoreParams) -> list[Ranked]:
    """Sort by score, highest first; ties keep input order."""
    scored = [(final_score(r.si_rmse, r.runtime_ms, params), r) for r in rows]
    order = sorted(range(len(scored)), key=lambda i: -scored[i][0])
    return [Ranked(k + 1, scored[i][1], scored[i][0]) for k, i in enumerate(order)]


def render_text(ranked: list[Ranked]) -> str:
    head = ("rank", "name", "si_rmse", "runtime_ms", "score", "rounded", "reported")
    body = [(str(r.rank), r.row.name, f"{r.row.si_rmse:g}", f"{r.row.runtime_ms:g}",
             f"{r.score:.4f}", str(r.rounded),
             "" if r.row.reported_score is None else f"{r.row.reported_score:g}") for r in ranked]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    fmt = lambda cells: "  ".join(c.ljust(w) if j == 1 else c.rjust(w)
                                  for j, (c, w) in enumerate(zip(cells, widths))).rstrip()
    return "\n".join([fmt(head)] + [fmt(b) for b in body]) + "\n"


def render_csv(ranked: list[Ranked]) -> str:
    buf = io.StringIO()
    buf.write(f"# {LEADERBOARD_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "name", "si_rmse", "runtime_ms", "score", "rounded", "reported_score"])
    for r in ranked:
        w.writerow([r.rank, r.row.name, repr(r.row.si_rmse), repr(r.row.runtime_ms), repr(r.score),
                    r.rounded, "" if r.row.reported_score is None else repr(r.row.reported_score)])
    return buf.getvalue()
