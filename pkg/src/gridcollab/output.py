"""Result files: long-format step CSV, per-method summary and the comparison table.

Floats are written with ``repr`` (shortest round-trip form), so re-reading a
step CSV reproduces the in-memory records exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Mapping

from .coordination import ControlMethod
from .simulation import ScenarioResults, StepRecord, curtailment_report, format_time

STEP_COLUMNS = ["time", "clock", "agent", "bus", "v", "p_out", "q_out", "p_available",
                "alpha", "abs_alpha", "f_v", "active_loss", "reactive_loss"]


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def steps_csv(res: ScenarioResults) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STEP_COLUMNS)
    for r in res.steps:
        for j, aid in enumerate(res.agent_ids):
            w.writerow([r.time, format_time(r.time), aid, res.agent_buses[j], repr(r.v[j]),
                        repr(r.p_out[j]), repr(r.q_out[j]), repr(r.p_available[j]), repr(r.alpha[j]),
                        repr(abs(r.alpha[j])), repr(r.f_v[j]), repr(r.active_loss),
                        repr(r.reactive_loss)])
    return buf.getvalue()


def read_steps_csv(text: str) -> tuple[tuple[str, ...], list[StepRecord]]:
    """Parse a step CSV back into ``(agent_ids, records)``."""
    rows = list(csv.DictReader(io.StringIO(text)))
    agents: list[str] = []
    for row in rows:
        if row["agent"] in agents:
            break
        agents.append(row["agent"])
    m = len(agents)
    if m == 0 or len(rows) % m:
        raise ValueError("step CSV does not hold whole steps")
    records = []
    for k in range(0, len(rows), m):
        block = rows[k:k + m]
        if [r["agent"] for r in block] != agents:
            raise ValueError(f"row {k + 2}: agent order changed")
        col = lambda name: tuple(float(r[name]) for r in block)
        records.append(StepRecord(
            time=int(block[0]["time"]), v=col("v"), p_out=col("p_out"), q_out=col("q_out"),
            p_available=col("p_available"), alpha=col("alpha"), f_v=col("f_v"),
            active_loss=float(block[0]["active_loss"]), reactive_loss=float(block[0]["reactive_loss"]),
        ))
    return tuple(agents), records


def method_summary(res: ScenarioResults, baseline: ScenarioResults | None) -> dict:
    out = res.summary
    out["label"] = res.method.label
    out["abort_reason"] = res.abort_reason
    out["skipped_gradients"] = res.skipped_gradients
    if baseline is not None and baseline.complete and res.complete:
        for aid, pct in curtailment_report(res, baseline).items():
            out["agents"][aid]["curtailment_pct"] = pct
    return out


def comparison(summaries: Mapping[ControlMethod, dict]) -> dict:
    ranking = sorted(summaries, key=lambda m: summaries[m]["fv_sum_then_square"])
    return {
        "methods": {m.value: s for m, s in summaries.items()},
        "ranking_fv_sum_then_square": [m.value for m in ranking],
        "lowest_fv": ranking[0].value,
    }


def comparison_csv(summaries: Mapping[ControlMethod, dict]) -> str:
    agents = list(next(iter(summaries.values()))["agents"])
    cols = ["method", "label", "fv_sum_then_square", "fv_square_per_step_sum",
            "mean_active_loss_kw", "mean_reactive_loss_kvar"]
    for a in agents:
        cols += [f"curtailment_pct_{a}", f"mean_abs_alpha_{a}", f"mean_abs_deviation_{a}"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for m, s in summaries.items():
        row = [m.value, s["label"], repr(s["fv_sum_then_square"]), repr(s["fv_square_per_step_sum"]),
               repr(s["mean_active_loss_kw"]), repr(s["mean_reactive_loss_kvar"])]
        for a in agents:
            ag = s["agents"][a]
            pct = ag.get("curtailment_pct")
            row += ["" if pct is None else repr(pct), repr(ag["mean_abs_alpha"]),
                    repr(ag["mean_abs_deviation"])]
        w.writerow(row)
    return buf.getvalue()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_method(out_dir: Path, res: ScenarioResults, summary: dict) -> None:
    atomic_write(out_dir / f"steps_{res.method.value}.csv", steps_csv(res))
    atomic_write(out_dir / f"summary_{res.method.value}.json", dumps(summary))
