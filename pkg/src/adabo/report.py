"""Worst-case relative improvement (WCRI) and table/plot-data emission.

For a set of ensembles the worst-case aggregate of quartile ``k`` is the
pointwise maximum over ensembles of their ``k``-th quartile incumbent curve.
WCRI compares a challenger set to a reference set as
``1 - median_i(w_k(challenger)_i / w_k(reference)_i)`` in percent. Curves are
shifted by the objective's lower bound first, so objectives with negative
minima still give positive ratios.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .bench import RunEnsemble, quartile_curves
from .optimizer import Variant
from .selection import SelectionStrategy

__all__ = [
    "IllDefinedRatioError",
    "WcriReport",
    "worst_case_aggregate",
    "wcri",
    "wcri_report",
    "emit_table",
    "parse_table",
    "emit_history_plotdata",
]

QUARTILES = range(5)
TABLE_HEADER = ("objective", "model_init", "adaptivity", "sel", "Q0", "Q1", "Q2", "Q3", "Q4")
_INIT_ORDER = {"No GPi": 0, "GPi": 1}
_ADA_ORDER = {"No Ada": 0, "Ada": 1, "iAda": 2}
_SEL_ORDER = {"-": 0, "Sel_Cat": 1, "Sel_U": 2}


class IllDefinedRatioError(ValueError):
    """The reference aggregate is not strictly positive."""


@dataclass(frozen=True)
class WcriReport:
    values: tuple[float, ...]
    reference: str
    challenger: str
    offset: float = 0.0


def worst_case_aggregate(ensembles: list[RunEnsemble], k: int, offset: float = 0.0) -> np.ndarray:
    """Pointwise maximum of the ``k``-th quartile curves, minus ``offset``."""
    if k not in QUARTILES:
        raise ValueError(f"quartile index must be 0..4, got {k}")
    if not ensembles:
        raise ValueError("need at least one ensemble")
    curves = [quartile_curves(e)[k] for e in ensembles]
    lengths = {c.size for c in curves}
    if len(lengths) != 1:
        raise ValueError(f"ensembles disagree on the number of iterations: {sorted(lengths)}")
    return np.max(np.vstack(curves), axis=0) - offset


def _wcri_from_curves(w_ref: np.ndarray, w_new: np.ndarray) -> float:
    if np.any(w_ref <= 0):
        raise IllDefinedRatioError("reference worst-case curve must be strictly positive; declare a lower-bound offset")
    if w_ref.shape != w_new.shape:
        raise ValueError("reference and challenger cover different iterations")
    return float(100.0 * (1.0 - np.median(w_new / w_ref)))


def wcri(reference: list[RunEnsemble], challenger: list[RunEnsemble], k: int, offset: float = 0.0) -> float:
    """WCRI of quartile ``k`` in percent.

    Raises
    ------
    IllDefinedRatioError
        If the shifted reference aggregate is zero or negative anywhere.
    """
    return _wcri_from_curves(worst_case_aggregate(reference, k, offset), worst_case_aggregate(challenger, k, offset))


def _set_name(ensembles) -> str:
    return "+".join(e.label for e in ensembles)


def wcri_report(reference: list[RunEnsemble], challenger: list[RunEnsemble], offset: float = 0.0) -> WcriReport:
    values = tuple(wcri(reference, challenger, k, offset) for k in QUARTILES)
    return WcriReport(values, _set_name(reference), _set_name(challenger), offset)


def _row_key(objective: str, variant, selection):
    variant = Variant.parse(variant)
    sel = SelectionStrategy.parse(selection).label if variant.adaptive and selection is not None else "-"
    return objective, variant.init_label, variant.adaptivity_label, sel


def emit_table(reports: dict, delimiter: str = ",") -> str:
    """Delimited WCRI table, one row per ``(objective, variant, selection)`` key.

    Rows are ordered by objective, then model initialisation (No GPi before
    GPi), adaptivity (No Ada, Ada, iAda) and selection (Sel_Cat, Sel_U).
    Values are percentages to one decimal.
    """
    if not reports:
        raise ValueError("no reports to tabulate")
    rows = []
    for (objective, variant, selection), rep in reports.items():
        key = _row_key(objective, variant, selection)
        rows.append((key, rep))
    rows.sort(key=lambda r: (r[0][0], _INIT_ORDER[r[0][1]], _ADA_ORDER[r[0][2]], _SEL_ORDER[r[0][3]]))
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for key, rep in rows:
        # adding 0.0 turns a rounded -0.0 into 0.0
        w.writerow(list(key) + [f"{round(v, 1) + 0.0:.1f}" for v in rep.values])
    return buf.getvalue()


def parse_table(text: str, delimiter: str = ",") -> dict:
    """``{(objective, model_init, adaptivity, sel): (Q0, ..., Q4)}`` from :func:`emit_table` output."""
    rows = list(csv.reader(io.StringIO(text), delimiter=delimiter))
    if not rows or tuple(rows[0]) != TABLE_HEADER:
        raise ValueError("missing or malformed table header")
    return {tuple(r[:4]): tuple(float(v) for v in r[4:]) for r in rows[1:]}


def emit_history_plotdata(ensembles: list[RunEnsemble], delimiter: str = ",") -> str:
    """Quartile curves per ensemble and iteration, with GPi-event markers.

    The ``gpi_event`` column is 1 at iterations where any run of a GPi
    ensemble reselected its model, 0 otherwise, and empty for ensembles
    that never run model selection.
    """
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(["ensemble", "objective", "iteration", "q0", "q1", "q2", "q3", "q4", "gpi_event"])
    for e in ensembles:
        q = quartile_curves(e)
        gpi = e.config.variant.uses_gpi
        events = set()
        for h in e.histories:
            events.update(h.gpi_iterations)
        for i in range(q.shape[1]):
            marker = (1 if i + 1 in events else 0) if gpi else ""
            w.writerow([e.label, e.objective, i + 1] + [repr(float(v)) for v in q[:, i]] + [marker])
    return buf.getvalue()
