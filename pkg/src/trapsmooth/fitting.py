"""Log-log least-squares fits used by every scaling-law check."""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class ScalingFit:
    samples: Tuple[Tuple[float, float], ...]
    slope: float
    intercept: float
    max_rel_residual: float

    @property
    def constant(self) -> float:
        """exp(intercept): the fitted prefactor c in value ~ c * param**slope."""
        return float(np.exp(self.intercept))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["samples"] = [list(s) for s in self.samples]
        return d


def fit_exponent(params: Sequence[float], values: Sequence[float] = None) -> ScalingFit:
    """OLS fit of log(value) = slope * log(param) + intercept.

    Accepts either two sequences or a single sequence of (param, value) pairs.
    """
    if values is None:
        pairs: List[Tuple[float, float]] = [(float(p), float(v)) for p, v in params]
    else:
        if len(params) != len(values):
            raise ValueError("params and values differ in length")
        pairs = [(float(p), float(v)) for p, v in zip(params, values)]
    if len(pairs) < 4:
        raise ValueError(f"need at least 4 samples for an exponent fit, got {len(pairs)}")
    p = np.array([a for a, _ in pairs])
    v = np.array([b for _, b in pairs])
    if np.any(~(p > 0)) or np.any(~(v > 0)) or not np.all(np.isfinite(v)):
        raise ValueError("exponent fits need strictly positive, finite samples")
    X = np.log(p)
    Y = np.log(v)
    xm, ym = X.mean(), Y.mean()
    slope = float(np.sum((X - xm) * (Y - ym)) / np.sum((X - xm) ** 2))
    intercept = float(ym - slope * xm)
    resid = Y - (slope * X + intercept)
    return ScalingFit(tuple(pairs), slope, intercept, float(np.max(np.abs(np.expm1(resid)))))
