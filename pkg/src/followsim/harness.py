"""Trial harness: single trials, campaigns and success-rate tables."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .results import ABORTED, FAILURE, SUCCESS, HarnessError, TrialResult
from .scenario import ACTIVATION_DISTANCES, Scenario, default_scenario
from .session import run_in_process
from .tracking.trackers import TRACKER_KINDS

# Column order of the rendered table.
TABLE_TRACKERS = ("bytetrack", "botsort_lite", "ocsort", "baseline")
TRACKER_LABELS = {
    "bytetrack": "ByteTrack",
    "botsort_lite": "BoTSORT-lite",
    "ocsort": "OC-SORT",
    "baseline": "Baseline",
}
DL_TRACKERS = ("bytetrack", "botsort_lite", "ocsort")

CSV_COLUMNS = (
    "scenario_id",
    "distance_m",
    "tracker",
    "seed",
    "outcome",
    "failure_cause",
    "duration_s",
    "activation_time_s",
    "occluded_frames",
    "final_distance_m",
)
INCOMPLETE_MARKER = "INCOMPLETE"


def run_trial(scenario: Scenario, tracker_kind: str, seed: Optional[int] = None) -> TrialResult:
    if tracker_kind not in TRACKER_KINDS:
        raise ValueError(f"unknown tracker {tracker_kind!r}; valid: {', '.join(TRACKER_KINDS)}")
    return run_in_process(scenario, tracker_kind, scenario.seed if seed is None else seed)


@dataclass(frozen=True)
class CellStats:
    trials: int
    successes: int
    mean_duration_s: float
    mean_occluded_frames: float

    @property
    def success_rate(self) -> float:
        return 100.0 * self.successes / self.trials


@dataclass
class MetricsTable:
    cells: Dict[Tuple[float, str], CellStats] = field(default_factory=dict)
    tracker_average: Dict[str, float] = field(default_factory=dict)

    @property
    def distances(self) -> List[float]:
        return sorted({d for d, _ in self.cells})

    @property
    def trackers(self) -> List[str]:
        present = {t for _, t in self.cells}
        return [t for t in TABLE_TRACKERS if t in present] + sorted(present - set(TABLE_TRACKERS))


def aggregate(results: Sequence[TrialResult]) -> MetricsTable:
    if not results:
        raise HarnessError("aggregate needs at least one trial result")
    ordered = sorted(results, key=lambda r: (r.distance_m, r.tracker_kind, r.seed, r.scenario_id))
    groups: Dict[Tuple[float, str], List[TrialResult]] = {}
    for r in ordered:
        groups.setdefault((r.distance_m, r.tracker_kind), []).append(r)
    table = MetricsTable()
    for key, rs in groups.items():
        table.cells[key] = CellStats(
            trials=len(rs),
            successes=sum(r.success for r in rs),
            mean_duration_s=fmean(r.duration_s for r in rs),
            mean_occluded_frames=fmean(r.occluded_frames for r in rs),
        )
    for tracker in table.trackers:
        rates = [c.success_rate for (d, t), c in sorted(table.cells.items()) if t == tracker]
        table.tracker_average[tracker] = fmean(rates)
    return table


def success_table(results: Iterable[TrialResult], group: Sequence[str] = DL_TRACKERS, reference: str = "baseline"):
    """2x2 counts ``(group_success, group_fail, ref_success, ref_fail)``."""
    a = b = c = d = 0
    for r in results:
        if r.tracker_kind in group:
            a += r.success
            b += not r.success
        elif r.tracker_kind == reference:
            c += r.success
            d += not r.success
    return a, b, c, d


def _table_rows(m: MetricsTable) -> List[List[str]]:
    trackers = m.trackers
    rows = [["Distance"] + [TRACKER_LABELS.get(t, t) for t in trackers]]
    for dist in m.distances:
        row = [f"{dist}m"]
        for t in trackers:
            cell = m.cells.get((dist, t))
            row.append("" if cell is None else f"{cell.success_rate:.1f}")
        rows.append(row)
    rows.append(["Average"] + [f"{m.tracker_average[t]:.1f}" for t in trackers])
    return rows


def render_table(m: MetricsTable, fmt: str = "markdown") -> str:
    rows = _table_rows(m)
    if fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown table format {fmt!r}")
    lines = ["| " + " | ".join(rows[0]) + " |", "|" + "|".join("---" for _ in rows[0]) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows[1:]]
    return "\n".join(lines) + "\n"


# -- results CSV -------------------------------------------------------------


def _fmt(v) -> str:
    return "" if v is None else str(v)


def result_row(r: TrialResult) -> List[str]:
    return [
        r.scenario_id,
        _fmt(r.distance_m),
        r.tracker_kind,
        _fmt(r.seed),
        r.outcome,
        _fmt(r.failure_cause),
        _fmt(r.duration_s),
        _fmt(r.activation_time_s),
        _fmt(r.occluded_frames),
        _fmt(r.final_robot_user_distance_m),
    ]


def _opt_float(s: str) -> Optional[float]:
    return None if s == "" else float(s)


def read_results_csv(path: Union[str, Path]) -> Tuple[List[TrialResult], bool]:
    """Return the results and whether the file was complete."""
    results, complete = [], True
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise HarnessError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            if row["scenario_id"] == INCOMPLETE_MARKER:
                complete = False
                continue
            results.append(
                TrialResult(
                    scenario_id=row["scenario_id"],
                    distance_m=float(row["distance_m"]),
                    tracker_kind=row["tracker"],
                    seed=int(row["seed"]),
                    outcome=row["outcome"],
                    failure_cause=row["failure_cause"] or None,
                    duration_s=float(row["duration_s"]),
                    activation_time_s=_opt_float(row["activation_time_s"]),
                    occluded_frames=int(row["occluded_frames"]),
                    final_robot_user_distance_m=_opt_float(row["final_distance_m"]),
                )
            )
    return results, complete


# -- campaigns -----------------------------------------------------------------


@dataclass(frozen=True)
class TrialSpec:
    distance: float
    tracker: str
    index: int
    seed: int


def campaign_grid(distances: Sequence[float], trackers: Sequence[str], trials: int, base_seed: int) -> List[TrialSpec]:
    # Seeds depend only on the trial index, so every cell sees the same noise draws.
    order = {t: i for i, t in enumerate(TRACKER_KINDS)}
    return [
        TrialSpec(d, t, i, base_seed + i)
        for d in sorted(distances)
        for t in sorted(trackers, key=lambda k: order.get(k, len(order)))
        for i in range(trials)
    ]


def _run_spec(spec: TrialSpec) -> TrialResult:
    return run_trial(default_scenario(spec.distance), spec.tracker, spec.seed)


def run_campaign(
    distances: Sequence[float] = ACTIVATION_DISTANCES,
    trackers: Sequence[str] = TRACKER_KINDS,
    trials: int = 10,
    base_seed: int = 0,
    out: Optional[Union[str, Path]] = None,
    jobs: int = 1,
) -> List[TrialResult]:
    """Run the distance x tracker x trial grid, streaming rows to ``out``.

    If interrupted, the CSV keeps the finished rows and ends with an
    ``INCOMPLETE`` marker row.
    """
    for t in trackers:
        if t not in TRACKER_KINDS:
            raise ValueError(f"unknown tracker {t!r}; valid: {', '.join(TRACKER_KINDS)}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = campaign_grid(distances, trackers, trials, base_seed)
    results: List[TrialResult] = []
    fh = open(out, "w", newline="", encoding="utf-8") if out is not None else None
    writer = csv.writer(fh, lineterminator="\n") if fh else None
    try:
        if writer:
            writer.writerow(CSV_COLUMNS)
        if jobs > 1:
            pool = ProcessPoolExecutor(max_workers=jobs)
            stream = pool.map(_run_spec, grid)  # yields in grid order
        else:
            pool = None
            stream = map(_run_spec, grid)
        try:
            for r in stream:
                results.append(r)
                if writer:
                    writer.writerow(result_row(r))
                    fh.flush()
        finally:
            if pool is not None:
                pool.shutdown(cancel_futures=True)
    except BaseException:
        if writer:
            writer.writerow([INCOMPLETE_MARKER] + [""] * (len(CSV_COLUMNS) - 1))
        raise
    finally:
        if fh:
            fh.close()
    return results


__all__ = [
    "ABORTED",
    "CSV_COLUMNS",
    "DL_TRACKERS",
    "FAILURE",
    "INCOMPLETE_MARKER",
    "SUCCESS",
    "CellStats",
    "MetricsTable",
    "TrialResult",
    "aggregate",
    "campaign_grid",
    "read_results_csv",
    "render_table",
    "run_campaign",
    "run_trial",
    "success_table",
]
