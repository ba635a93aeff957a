"""Closed-form exponent calculators.

These are small, pure functions used by the numerical probes to decide what
slope or exponent a measurement should be compared with.  Every Gamma value in
the package goes through :func:`gamma` so that the normalisation constant, the
reflection value and the Pohozaev prefactor share one implementation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "ExponentRecord",
    "gamma",
    "gamma_reflection",
    "gaussian_decay_exponent",
    "young_triple_valid",
    "semigroup_decay_exponent",
    "epsilon_window",
    "embedding_map",
    "check_identities",
]


def gamma(x: float) -> float:
    """Gamma function (CPython's Lanczos implementation, ~15 significant digits)."""
    return math.gamma(x)


def _check_order(s: float) -> None:
    if not (0.0 < s < 1.0):
        raise ValueError(f"order s must lie in (0,1), got {s!r}")


@dataclass(frozen=True)
class ExponentRecord:
    """A computed exponent together with its inputs, for diagnostics output."""

    label: str
    inputs: dict = field(default_factory=dict)
    value: float = 0.0
    admissible: bool = True

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError("exponent must be finite")

    def to_dict(self) -> dict:
        return {"label": self.label, "inputs": dict(self.inputs),
                "value": self.value, "admissible": self.admissible}


def gamma_reflection(s: float) -> float:
    """Return Gamma(-s) for s in (0,1), computed as -Gamma(1-s)/s."""
    _check_order(s)
    return -gamma(1.0 - s) / s


def gaussian_decay_exponent(N: int, p: float, k: int = 0) -> float:
    """Exponent e with ||D^k G(t)||_{L^p} <= C t^e for the heat kernel in R^N."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if k < 0:
        raise ValueError("derivative order must be >= 0")
    return -0.5 * N * (1.0 - 1.0 / p) - 0.5 * k


def young_triple_valid(q1: float, q2: float, q3: float, tol: float = 1e-12) -> bool:
    """True iff 1/q1 + 1/q2 = 1/q3 + 1, the Young convolution relation.

    ``math.inf`` is accepted for any exponent.
    """
    for q in (q1, q2, q3):
        if q < 1:
            raise ValueError("Young exponents must be >= 1")
    return abs(1.0 / q1 + 1.0 / q2 - 1.0 / q3 - 1.0) <= tol


def semigroup_decay_exponent(N: int, s: float, r: float, m: float) -> float:
    """Small-time exponent of the L^r -> L^m norm of the Dirichlet semigroup.

    Returns -N/(2s) * (1/r - 1/m); ``m`` may be ``math.inf``.
    """
    _check_order(s)
    if r < 1:
        raise ValueError("r must be >= 1")
    if r > m:
        raise ValueError(f"need r <= m, got r={r!r}, m={m!r}")
    return -N / (2.0 * s) * (1.0 / r - 1.0 / m)


def epsilon_window(N: int, s: float) -> tuple[float, float]:
    """Open interval of admissible epsilon for the heat-route estimate (N >= 3).

    The result is [0,1] intersected with ((4-4s)/(N+2-2s), (4+4s)/(N+2+2s)),
    returned as the pair of endpoints.
    """
    if N < 3:
        raise ValueError("the epsilon window is only defined for N >= 3")
    _check_order(s)
    lo = max(0.0, (4.0 - 4.0 * s) / (N + 2.0 - 2.0 * s))
    hi = min(1.0, (4.0 + 4.0 * s) / (N + 2.0 + 2.0 * s))
    if not lo < hi:  # cannot happen for valid input; kept as a guard
        raise ArithmeticError(f"empty epsilon window for N={N}, s={s}")
    return (lo, hi)


def embedding_map(N: int, s: float, p: float) -> dict:
    """Classify the integrability/continuity of the solution for data f in L^p.

    Returns a dict with key ``kind`` in {"holder", "Lq-all", "Linf", "Lq-range",
    "below-threshold"} plus the relevant exponents.  The split is:

    * N < 2s: the energy space embeds in C^{0, s - N/2};
    * N = 2s: every L^q with q < infinity;
    * N > 2s and p < 2N/(N+2s): data not in the dual of the energy space;
    * N > 2s and p > N/(2s): bounded solutions;
    * otherwise L^q for p <= q < Np/(N - 2sp).
    """
    _check_order(s)
    if N < 1 or p <= 1:
        raise ValueError("need N >= 1 and p > 1")
    two_s = 2.0 * s
    if N < two_s:
        return {"kind": "holder", "exponent": s - N / 2.0}
    if N == two_s:
        return {"kind": "Lq-all", "q_min": 1.0, "q_max": math.inf}
    if p < 2.0 * N / (N + two_s):
        return {"kind": "below-threshold", "p_min": 2.0 * N / (N + two_s)}
    if p > N / two_s:
        return {"kind": "Linf"}
    denom = N - two_s * p
    q_max = math.inf if denom <= 0 else N * p / denom
    return {"kind": "Lq-range", "q_min": float(p), "q_max": q_max}


def check_identities() -> dict:
    """Evaluate the anchored exponent identities; maps a label to pass/fail."""
    out = {}
    for N in (1, 2, 3):
        out[f"gaussian_L2_N{N}"] = gaussian_decay_exponent(N, 2) == -N / 4.0
        out[f"gaussian_L2_grad_N{N}"] = gaussian_decay_exponent(N, 2, 1) == -N / 4.0 - 0.5
        out[f"gaussian_L1_N{N}"] = gaussian_decay_exponent(N, 1) == 0.0
    out["young_1_2_2"] = young_triple_valid(1, 2, 2)
    out["young_2_2_2_rejected"] = not young_triple_valid(2, 2, 2)
    out["young_lemma_triples"] = all(young_triple_valid(2 * p / (2 + p), 2, p)
                                     for p in (2, 3, 4, 6, 8, 16))
    out["ultra_1_half"] = semigroup_decay_exponent(1, 0.5, 1, math.inf) == -1.0
    out["ultra_diagonal"] = semigroup_decay_exponent(3, 0.5, 2, 2) == 0.0
    out["ultra_integrable"] = all(semigroup_decay_exponent(3, 0.5, p, math.inf) > -1
                                  for p in (3.5, 4, 8))
    out["reflection_half"] = abs(gamma_reflection(0.5) + 2 * math.sqrt(math.pi)) < 1e-12
    out["reflection_identity"] = all(abs(s * gamma_reflection(s) + gamma(1 - s)) < 1e-12
                                     for s in (0.1, 0.25, 0.5, 0.75, 0.9))
    windows = []
    for N in (3, 4, 5):
        for k in range(1, 10):
            lo, hi = epsilon_window(N, k / 10)
            windows.append(lo < hi)
    out["epsilon_windows_nonempty"] = all(windows)
    out["embedding_3_half_4"] = embedding_map(3, 0.5, 4)["kind"] == "Linf"
    e = embedding_map(3, 0.5, 2)
    out["embedding_3_half_2"] = e["kind"] == "Lq-range" and e["q_min"] == 2 and e["q_max"] == 6
    e = embedding_map(1, 0.75, 2)
    out["embedding_1_34_2"] = e["kind"] == "holder" and e["exponent"] == 0.25
    return out
