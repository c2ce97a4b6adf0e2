"""CSV / JSON serialization of run traces and replicated suites.

Column order is fixed; creatives, DAs and TAs are numbered from 1.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Iterable, Sequence
from datetime import datetime, timezone
from pathlib import Path

from .audience import Partition
from .engine import RunTrace
from .simlab import quantiles, summarize

SWEEP_COLUMNS = [
    "group",
    "q",
    "policy",
    "rep",
    "seed",
    "batches",
    "stopped",
    "sample_size",
    "total_regret",
    "correct",
    "post_best_prob",
    "max_ppvr",
]


def trace_columns(R: int, J: int, K: int) -> list[str]:
    cols = ["t", "arrivals", "impressions", "max_pPVR"]
    cols += [f"pPVR_TA{k + 1}" for k in range(K)]
    cols += ["regret", "postBestProb"]
    for prefix in ("n", "s", "w"):
        cols += [f"{prefix}_C{r + 1}_DA{j + 1}" for r in range(R) for j in range(J)]
    return cols


def trace_rows(trace: RunTrace) -> Iterable[list]:
    for rec in trace.records:
        row = [rec.t, rec.arrivals, rec.impressions, rec.max_ppvr]
        row += [float(x) for x in rec.ppvr]
        row += [rec.regret, rec.post_best_prob]
        row += [int(x) for x in rec.n.ravel()]
        row += [int(x) for x in rec.s.ravel()]
        row += [float(x) for x in rec.w.ravel()]
        yield row


def write_trace_csv(trace: RunTrace, path: Path) -> None:
    first = trace.records[0]
    R, J = first.n.shape
    K = len(first.ppvr)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_columns(R, J, K))
        w.writerows(trace_rows(trace))


def trace_summary(trace: RunTrace) -> dict:
    rep = trace.final_report
    r, k = trace.true_best
    g = rep.global_best
    return {
        "policy": trace.policy.value,
        "seed": trace.seed,
        "stoppedAt": trace.stopped_at if trace.stopped_at is not None else "MaxedOut",
        "batches": trace.n_batches,
        "firstBelowThreshold": trace.first_below,
        "sampleSize": trace.sample_size,
        "totalRegret": trace.total_regret,
        "finalBest": [int(x) + 1 for x in rep.best_creative],
        "finalPPVR": [float(x) for x in rep.ppvr],
        "globalBest": {"creative": g[0] + 1, "ta": g[1] + 1},
        "trueBest": {"creative": r + 1, "ta": k + 1},
        "postBestProb": rep.post_best_prob,
        "correctIdentification": trace.correct_identification,
    }


def partition_summary(partition: Partition) -> list[dict]:
    return [
        {
            "da": da.index + 1,
            "members": [k + 1 for k in sorted(da.members)],
            "mass": da.mass,
            "condProb": [float(x) for x in partition.cond_prob[da.index]],
        }
        for da in partition.das
    ]


def sweep_row(group: str, q: float | None, rep: int, trace: RunTrace) -> list:
    return [
        group,
        "" if q is None else q,
        trace.policy.value,
        rep,
        trace.seed,
        trace.n_batches,
        int(not trace.maxed_out),
        trace.sample_size,
        trace.total_regret,
        int(trace.correct_identification),
        trace.final_report.post_best_prob,
        trace.final_report.max_ppvr,
    ]


def write_sweep_csv(blocks: Sequence[tuple[str, float | None, Sequence[RunTrace]]], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for group, q, traces in blocks:
            for i, tr in enumerate(traces):
                w.writerow(sweep_row(group, q, i, tr))


def group_summary(traces: Sequence[RunTrace]) -> dict:
    return summarize(traces).to_dict()


def batch_profile(traces: Sequence[RunTrace], every: int = 10) -> list[dict]:
    """Quantiles of per-batch metrics across replications at every ``every``-th batch."""
    n = min(t.n_batches for t in traces)
    rows = []
    for t in range(every, n + 1, every):
        recs = [tr.records[t - 1] for tr in traces]
        for metric, vals in (
            ("max_pPVR", [r.max_ppvr for r in recs]),
            ("regret", [r.regret for r in recs]),
            ("postBestProb", [r.post_best_prob for r in recs]),
        ):
            rows.append({"batch": t, "metric": metric, **quantiles(vals)})
    return rows


PROFILE_COLUMNS = ["batch", "metric", "min", "q1", "median", "q3", "max", "mean"]


def write_profile_csv(rows: Sequence[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, PROFILE_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def write_json(doc: dict, path: Path) -> None:
    doc = {**doc, "created": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
