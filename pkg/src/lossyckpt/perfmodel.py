"""Closed-form checkpoint/restart overhead models and the lossy-vs-traditional decision rule.

All functions are pure and work in one consistent time unit (seconds in the
CLI and the worked examples). Failure arrivals are Poisson with rate ``lam``;
the models are renewal-process approximations valid while
``sqrt(2*lam*t_ckp) + lam*t_rc (+ lam*n_prime*t_it) < 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

from .errors import ParameterError, SaturatedModelError

SURFACE_CSV_HEADER = ["lambda_per_unit", "t_ckp", "overhead_ratio", "saturated"]


def overhead_term(t_ckp: float, lam: float) -> float:
    """f(t, lam) = sqrt(2*lam*t) + lam*t, the per-unit-time checkpoint+rollback load."""
    if t_ckp < 0 or lam < 0:
        raise ParameterError("t_ckp and lam must be non-negative")
    return math.sqrt(2.0 * lam * t_ckp) + lam * t_ckp


def young_interval(t_f: float, t_ckp: float) -> float:
    """Optimal checkpoint interval sqrt(2 * t_f * t_ckp) in time units."""
    if t_f <= 0 or t_ckp <= 0:
        raise ParameterError("t_f and t_ckp must be positive")
    return math.sqrt(2.0 * t_f * t_ckp)


def young_k(t_f: float, t_ckp: float, t_it: float) -> int:
    """Checkpoint-every-k-iterations setting from the optimal interval, at least 1."""
    if t_it <= 0:
        raise ParameterError("t_it must be positive")
    return max(1, round(young_interval(t_f, t_ckp) / t_it))


def _denominator(load: float) -> float:
    denom = 1.0 - load
    if denom <= 0.0:
        raise SaturatedModelError(f"model saturated: overhead load {load:.6g} >= 1")
    return denom


def expected_total_time_traditional(n_iterations: float, t_it: float, lam: float,
                                    t_ckp: float, t_rc: Optional[float] = None) -> float:
    """Expected wall time N*T_it / (1 - sqrt(2*lam*T_ckp) - lam*T_rc); T_rc defaults to T_ckp."""
    if n_iterations <= 0 or t_it <= 0 or t_ckp <= 0 or lam < 0:
        raise ParameterError("n_iterations, t_it, t_ckp must be positive and lam >= 0")
    t_rc = t_ckp if t_rc is None else t_rc
    load = math.sqrt(2.0 * lam * t_ckp) + lam * t_rc
    return n_iterations * t_it / _denominator(load)


def overhead_traditional(n_iterations: float, t_it: float, lam: float,
                         t_ckp: float, t_rc: Optional[float] = None) -> float:
    """Expected fault-tolerance overhead time: total minus N*T_it productive time."""
    return expected_total_time_traditional(n_iterations, t_it, lam, t_ckp, t_rc) \
        - n_iterations * t_it


def overhead_ratio_traditional(lam: float, t_ckp: float, t_rc: Optional[float] = None) -> float:
    """Overhead divided by productive time; depends only on lam and the checkpoint time."""
    if t_ckp <= 0 or lam < 0:
        raise ParameterError("t_ckp must be positive and lam >= 0")
    t_rc = t_ckp if t_rc is None else t_rc
    load = math.sqrt(2.0 * lam * t_ckp) + lam * t_rc
    return load / _denominator(load)


def expected_total_time_lossy(n_iterations: float, t_it: float, lam: float,
                              t_ckp_lossy: float, n_prime: float,
                              t_rc_lossy: Optional[float] = None) -> float:
    """Expected wall time under lossy checkpointing; each recovery delays n_prime iterations."""
    if n_iterations <= 0 or t_it <= 0 or t_ckp_lossy <= 0 or lam < 0:
        raise ParameterError("n_iterations, t_it, t_ckp_lossy must be positive and lam >= 0")
    t_rc_lossy = t_ckp_lossy if t_rc_lossy is None else t_rc_lossy
    load = math.sqrt(2.0 * lam * t_ckp_lossy) + lam * t_rc_lossy + lam * n_prime * t_it
    return n_iterations * t_it / _denominator(load)


def overhead_lossy(n_iterations: float, t_it: float, lam: float,
                   t_ckp_lossy: float, n_prime: float,
                   t_rc_lossy: Optional[float] = None) -> float:
    """Expected lossy-checkpointing overhead time (compression cost folded into t_ckp_lossy)."""
    return expected_total_time_lossy(n_iterations, t_it, lam, t_ckp_lossy, n_prime,
                                     t_rc_lossy) - n_iterations * t_it


def n_prime_bound(lam: float, t_it: float, t_ckp_trad: float, t_ckp_lossy: float) -> float:
    """Largest per-recovery iteration delay at which lossy checkpointing still wins.

    (f(t_ckp_trad, lam) - f(t_ckp_lossy, lam)) / (lam * t_it). Returns +inf at
    lam = 0, where lossy checkpointing at least ties for any finite delay.
    """
    if t_it <= 0 or t_ckp_trad <= 0 or t_ckp_lossy <= 0 or lam < 0:
        raise ParameterError("times must be positive and lam >= 0")
    if lam == 0.0:
        return math.inf
    return (overhead_term(t_ckp_trad, lam) - overhead_term(t_ckp_lossy, lam)) / (lam * t_it)


def lossy_worthwhile(n_prime: float, lam: float, t_it: float,
                     t_ckp_trad: float, t_ckp_lossy: float) -> bool:
    """Decision predicate: lossy checkpointing improves expected time."""
    return n_prime <= n_prime_bound(lam, t_it, t_ckp_trad, t_ckp_lossy)


@dataclass(frozen=True)
class PerfModelParams:
    """Parameter bundle for the overhead models (one consistent time unit)."""

    lam: float
    t_it: float
    t_ckp_trad: float
    t_ckp_lossy: Optional[float] = None
    t_rc: Optional[float] = None
    n_iterations: Optional[float] = None
    n_prime: Optional[float] = None

    def __post_init__(self):
        if self.lam < 0 or self.t_it <= 0 or self.t_ckp_trad <= 0:
            raise ParameterError("lam must be >= 0; t_it and t_ckp_trad must be positive")
        if self.t_ckp_lossy is not None and self.t_ckp_lossy <= 0:
            raise ParameterError("t_ckp_lossy must be positive when given")

    @property
    def saturated(self) -> bool:
        load = overhead_term(self.t_ckp_trad, self.lam)
        if self.t_rc is not None:
            load = math.sqrt(2.0 * self.lam * self.t_ckp_trad) + self.lam * self.t_rc
        if self.n_prime is not None and self.t_ckp_lossy is not None:
            load = max(load, overhead_term(self.t_ckp_lossy, self.lam)
                       + self.lam * self.n_prime * self.t_it)
        return load >= 1.0

    def overhead_ratio(self) -> float:
        return overhead_ratio_traditional(self.lam, self.t_ckp_trad, self.t_rc)

    def bound(self) -> float:
        if self.t_ckp_lossy is None:
            raise ParameterError("t_ckp_lossy required for the decision bound")
        return n_prime_bound(self.lam, self.t_it, self.t_ckp_trad, self.t_ckp_lossy)


def sweep_overhead_surface(lambda_grid, t_ckp_grid):
    """Tabulate the traditional overhead ratio on a (lam, t_ckp) grid.

    Returns a list of (lam, t_ckp, ratio, saturated) rows; saturated cells carry
    ratio = nan and are flagged rather than raising.
    """
    lambda_grid = list(lambda_grid)
    t_ckp_grid = list(t_ckp_grid)
    if not lambda_grid or not t_ckp_grid:
        raise ParameterError("grids must be non-empty")
    rows = []
    for lam in lambda_grid:
        for t_ckp in t_ckp_grid:
            if lam < 0 or t_ckp < 0:
                raise ParameterError("grid values must be non-negative")
            if t_ckp == 0.0 or lam == 0.0:
                ratio, saturated = 0.0, False
            else:
                try:
                    ratio, saturated = overhead_ratio_traditional(lam, t_ckp), False
                except SaturatedModelError:
                    ratio, saturated = math.nan, True
            rows.append((lam, t_ckp, ratio, saturated))
    return rows


def write_overhead_surface_csv(fh, rows) -> None:
    """Write sweep rows with the stable header lambda_per_unit,t_ckp,overhead_ratio,saturated."""
    writer = csv.writer(fh)
    writer.writerow(SURFACE_CSV_HEADER)
    for lam, t_ckp, ratio, saturated in rows:
        writer.writerow([repr(float(lam)), repr(float(t_ckp)),
                         "nan" if math.isnan(ratio) else repr(float(ratio)),
                         "true" if saturated else "false"])
