"""Per-restart / per-iteration trace records and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields

TRACE_HEADER = ("phase", "r2", "psi", "gap", "grad_f", "grad_g", "matvec_B", "matvec_Bt", "exec_time")


@dataclass(frozen=True)
class TraceRecord:
    """Metrics after one restart (solver) or one iteration (baselines).

    ``psi`` and ``gap`` are optional and written as empty cells when absent.
    """

    phase: int
    r2: float | None
    psi: float | None
    gap: float | None
    grad_f: int
    grad_g: int
    matvec_B: int
    matvec_Bt: int
    exec_time: float

    @classmethod
    def from_ledger(cls, phase, ledger, model, r2=None, psi=None, gap=None):
        from .oracles import execution_time
        return cls(int(phase), r2, psi, gap, ledger.grad_f, ledger.grad_g, ledger.matvec_B,
                   ledger.matvec_Bt, float(execution_time(ledger, model)))

    @property
    def counts(self):
        return (self.grad_f, self.grad_g, self.matvec_B, self.matvec_Bt)


def format_float(v):
    """17 significant digits: enough to round-trip every double."""
    return "" if v is None else format(float(v), ".17g")


def _cell(name, v):
    if name in ("phase", "grad_f", "grad_g", "matvec_B", "matvec_Bt"):
        return str(int(v))
    return format_float(v)


def write_trace_csv(records, stream=None):
    """Write ``records`` with the fixed header; returns the text when ``stream`` is None."""
    out = io.StringIO() if stream is None else stream
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for rec in records:
        w.writerow([_cell(name, v) for name, v in zip(TRACE_HEADER, astuple(rec))])
    return out.getvalue() if stream is None else None


def read_trace_csv(stream):
    """Parse a trace written by :func:`write_trace_csv`."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    header = tuple(next(reader))
    if header != TRACE_HEADER:
        raise ValueError(f"unexpected trace header {header}")
    records = []
    for row in reader:
        if not row:
            continue
        vals = {}
        for f, cell in zip(fields(TraceRecord), row):
            if f.name in ("phase", "grad_f", "grad_g", "matvec_B", "matvec_Bt"):
                vals[f.name] = int(cell)
            else:
                vals[f.name] = None if cell == "" else float(cell)
        records.append(TraceRecord(**vals))
    return records
