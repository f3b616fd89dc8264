"""Result records shared by the solvers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Method(str, enum.Enum):
    NE = "NE"
    NE_FALLBACK = "NE-fallback"
    QR = "QR"
    SEMINORMAL_CORRECTED = "SemiNormalCorrected"
    RANK_REVEALING = "RankRevealing"

    def __str__(self):
        return self.value


@dataclass
class ConditionReport:
    kappa_C: float | None = None
    kappa_Cs: float | None = None
    kappa_Rc: float | None = None
    kappa_Vr: float | None = None
    kappa_Sc: float | None = None
    diag_range: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "kappa_C": _num(self.kappa_C),
            "kappa_Cs": _num(self.kappa_Cs),
            "kappa_Rc": _num(self.kappa_Rc),
            "kappa_Vr": _num(self.kappa_Vr),
            "kappa_Sc": _num(self.kappa_Sc),
            "diag_range": None if self.diag_range is None else [_num(v) for v in self.diag_range],
        }


@dataclass
class SolveReport:
    alpha: np.ndarray
    method: Method
    residual: float
    objective: float
    condition: ConditionReport = field(default_factory=ConditionReport)
    rank: int | None = None
    corrections: int = 0
    branch: str | None = None
    branch_log: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        alpha = np.asarray(self.alpha, dtype=complex)
        out = {
            "alpha": [[float(a.real), float(a.imag)] for a in alpha],
            "residual": _num(self.residual),
            "objective": _num(self.objective),
            "method": str(self.method),
            "kappa_Cs": _num(self.condition.kappa_Cs),
            "kappa_Rc": _num(self.condition.kappa_Rc),
            "kappa_Sc": _num(self.condition.kappa_Sc),
            "rank": self.rank,
            "branch_log": list(self.branch_log),
        }
        out["branch"] = self.branch
        out["corrections"] = self.corrections
        out["condition"] = self.condition.to_dict()
        out["timings"] = dict(self.timings)
        return out


def _num(v):
    """JSON-safe float: infinities become strings, NaN becomes None."""
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return None
    return v
