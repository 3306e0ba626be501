"""Per-round records and their CSV persistence."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

COLUMNS = ("round", "scheduled", "dropped", "round_time_s", "accuracy", "reward")


@dataclass
class RoundRecord:
    round_index: int
    scheduled_set: list
    round_time_s: float
    per_user_time_s: list
    per_user_energy_j: list
    accuracy: float
    reward: float
    dropped_users: list = field(default_factory=list)
    # diagnostics, not persisted
    rho: float | None = None
    grad_max_sq: float | None = None


def _fmt(x: float) -> str:
    return repr(float(x))


def _ids(ids) -> str:
    return ";".join(str(int(i)) for i in ids)


def format_round_records(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in sorted(records, key=lambda r: r.round_index):
        w.writerow([r.round_index, _ids(r.scheduled_set), _ids(r.dropped_users),
                    _fmt(r.round_time_s), _fmt(r.accuracy), _fmt(r.reward)])
    return buf.getvalue()


def write_round_records(records, path) -> None:
    path = Path(path)
    try:
        path.write_text(format_round_records(records))
    except OSError as exc:
        raise OSError(f"cannot write round records to {path}: {exc}") from exc


def read_round_records(path) -> list[dict]:
    """Parse a round-record CSV back into dicts with numeric fields restored."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            out.append({
                "round": int(row["round"]),
                "scheduled": [int(x) for x in row["scheduled"].split(";") if x],
                "dropped": [int(x) for x in row["dropped"].split(";") if x],
                "round_time_s": float(row["round_time_s"]),
                "accuracy": float(row["accuracy"]),
                "reward": float(row["reward"]),
            })
    return out
