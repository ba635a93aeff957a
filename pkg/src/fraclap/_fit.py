"""Least-squares line fits with a confidence half-width."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    halfwidth: float
    n: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "halfwidth": self.halfwidth, "n": self.n}


def linear_fit(x, y, confidence: float = 0.95) -> LineFit:
    """Fit y = slope*x + intercept; half-width of the slope's two-sided interval."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points for a line fit")
    if x.size == 2:
        slope = (y[1] - y[0]) / (x[1] - x[0])
        return LineFit(float(slope), float(y[0] - slope * x[0]), float("inf"), 2)
    res = stats.linregress(x, y)
    t = stats.t.ppf(0.5 + 0.5 * confidence, x.size - 2)
    return LineFit(float(res.slope), float(res.intercept), float(t * res.stderr), int(x.size))
