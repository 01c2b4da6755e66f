"""Wage-group inference: quintiles, quadratic fits, flag tests, classes.

The quadratic model regresses a zone's mean commute on its mean wage
and squared wage; the flag test regresses a wage group's zone share on
an above-benchmark-commute indicator with zone-size weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

QUINTILE_LABELS = ["0-20", "20-40", "40-60", "60-80", "80-100"]


class DegenerateDesignError(ValueError):
    """Raised when a regression design matrix is singular."""


class UntestableError(ValueError):
    """Raised when a hypothesis test has no variation to work with."""


@dataclass(frozen=True)
class QuintileAssignment:
    group_of: dict[str, int]          # zone_id -> 0..4
    cutoffs: tuple[float, ...]        # max mean wage per group

    def label_of(self, zone_id: str) -> str:
        return QUINTILE_LABELS[self.group_of[zone_id]]


@dataclass(frozen=True)
class RegressionResult:
    coefficients: tuple[float, ...]
    std_errors: tuple[float, ...]
    t_stats: tuple[float, ...]
    p_values: tuple[float, ...]
    r_squared: float
    f_stat: float
    n_obs: int
    df_resid: int


@dataclass(frozen=True)
class FlagTestRow:
    group_label: str
    pct_below: float        # intercept a
    pct_above: float        # a + b
    difference: float       # slope b
    t_stat: float
    p_value: float
    stars: str
    n_obs: int


def student_t_p_value(t: float, df: int) -> float:
    """Two-tailed p via the regularized incomplete beta function."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def _rank_groups(keyed, n_groups: int) -> dict[str, int]:
    """Rank-based equal-frequency grouping: rank r -> floor(g*r/n)."""
    n = len(keyed)
    out = {}
    for r, (_, zid) in enumerate(sorted(keyed)):
        out[zid] = min(n_groups * r // n, n_groups - 1)
    return out


def quintile_group(zones) -> QuintileAssignment:
    """Split zones into five wage-rank groups of near-equal size."""
    keyed = [(z.mean_wage, z.zone_id) for z in zones]
    if len(keyed) < 5:
        raise UntestableError("need at least 5 zones for wage quintiles")
    group_of = _rank_groups(keyed, 5)
    cutoffs = [max(w for w, zid in keyed if group_of[zid] == g)
               for g in range(5)]
    return QuintileAssignment(group_of=group_of, cutoffs=tuple(cutoffs))


def tercile_group(values_by_zone: dict[str, float]) -> dict[str, int]:
    keyed = [(v, zid) for zid, v in values_by_zone.items()]
    if len(keyed) < 3:
        raise UntestableError("need at least 3 zones for terciles")
    return _rank_groups(keyed, 3)


def quadratic_fit(y_by_zone: dict[str, float],
                  wage_by_zone: dict[str, float]) -> RegressionResult:
    """OLS of zone metric on [1, wage, wage^2].

    Wages are centered and rescaled internally for conditioning; the
    reported coefficients are mapped back to the raw-wage basis.
    """
    ids = sorted(set(y_by_zone) & set(wage_by_zone))
    y = np.array([y_by_zone[z] for z in ids], dtype=float)
    w = np.array([wage_by_zone[z] for z in ids], dtype=float)
    n = len(ids)
    if n < 4:
        raise UntestableError(f"need >= 4 observations, got {n}")
    mu = float(w.mean())
    scale = float(w.std()) or 1.0
    ws = (w - mu) / scale
    cols = [np.ones(n), ws, ws * ws]

    # normal equations accumulated with compensated summation
    xtx = np.empty((3, 3))
    xty = np.empty(3)
    for a in range(3):
        for b in range(3):
            xtx[a, b] = math.fsum(cols[a] * cols[b])
        xty[a] = math.fsum(cols[a] * y)
    try:
        beta_s = np.linalg.solve(xtx, xty)
        xtx_inv = np.linalg.inv(xtx)
    except np.linalg.LinAlgError as exc:
        raise DegenerateDesignError(f"singular design: {exc}") from exc
    if np.linalg.cond(xtx) > 1e12:
        raise DegenerateDesignError("design matrix is numerically singular")

    fitted = beta_s[0] + beta_s[1] * ws + beta_s[2] * ws * ws
    resid = y - fitted
    sse = math.fsum(resid * resid)
    sst = math.fsum((y - y.mean()) ** 2)
    df = n - 3
    sigma2 = sse / df
    cov_s = sigma2 * xtx_inv

    # map centered-basis coefficients and covariance back to raw wages
    back = np.array([[1.0, -mu / scale, mu * mu / (scale * scale)],
                     [0.0, 1.0 / scale, -2.0 * mu / (scale * scale)],
                     [0.0, 0.0, 1.0 / (scale * scale)]])
    beta = back @ beta_s
    cov = back @ cov_s @ back.T

    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    t_stats = []
    p_values = []
    for k in range(3):
        if se[k] > 0:
            t = beta[k] / se[k]
        else:
            t = 0.0 if beta[k] == 0 else math.inf * np.sign(beta[k])
        t_stats.append(float(t))
        p_values.append(student_t_p_value(t, df))
    r2 = 1.0 - sse / sst if sst > 0 else 0.0
    f_stat = (r2 / 2.0) / ((1.0 - r2) / df) if 0 <= r2 < 1 else math.inf
    return RegressionResult(
        coefficients=tuple(float(b) for b in beta),
        std_errors=tuple(float(s) for s in se),
        t_stats=tuple(t_stats), p_values=tuple(p_values),
        r_squared=float(r2), f_stat=float(f_stat), n_obs=n, df_resid=df)


def weighted_benchmark(metric_by_zone: dict[str, float],
                       weight_by_zone: dict[str, float]) -> float:
    """Weight-weighted mean commute over all zones (the flag benchmark)."""
    ids = [z for z in metric_by_zone if weight_by_zone.get(z, 0) > 0]
    wsum = math.fsum(weight_by_zone[z] for z in ids)
    if wsum <= 0:
        raise UntestableError("no positive weights for benchmark")
    return math.fsum(metric_by_zone[z] * weight_by_zone[z] for z in ids) / wsum


def flag_test(metric_by_zone: dict[str, float],
              share_by_zone: dict[str, float],
              weight_by_zone: dict[str, float],
              group_label: str = "") -> FlagTestRow:
    """WLS of a wage-group share on the above-benchmark-commute flag.

    The intercept is the weighted mean share in below-benchmark zones,
    the slope the above-minus-below difference; its t uses the WLS
    variance with n-2 degrees of freedom.
    """
    ids = sorted(z for z in share_by_zone
                 if z in metric_by_zone and weight_by_zone.get(z, 0) > 0)
    if len(ids) < 3:
        raise UntestableError("need at least 3 weighted zones")
    benchmark = weighted_benchmark(
        {z: metric_by_zone[z] for z in ids},
        {z: weight_by_zone[z] for z in ids})
    flags = {z: 1 if metric_by_zone[z] > benchmark else 0 for z in ids}
    w0 = math.fsum(weight_by_zone[z] for z in ids if flags[z] == 0)
    w1 = math.fsum(weight_by_zone[z] for z in ids if flags[z] == 1)
    if w0 == 0 or w1 == 0:
        raise UntestableError(
            f"all zones on one side of the benchmark ({benchmark!r})")
    a = math.fsum(weight_by_zone[z] * share_by_zone[z]
                  for z in ids if flags[z] == 0) / w0
    mean1 = math.fsum(weight_by_zone[z] * share_by_zone[z]
                      for z in ids if flags[z] == 1) / w1
    b = mean1 - a
    n = len(ids)
    df = n - 2
    sse = math.fsum(weight_by_zone[z] *
                    (share_by_zone[z] - (a if flags[z] == 0 else mean1)) ** 2
                    for z in ids)
    if df <= 0:
        raise UntestableError("not enough observations for a t test")
    sigma2 = sse / df
    if sigma2 > 0:
        t = b / math.sqrt(sigma2 * (1.0 / w0 + 1.0 / w1))
    else:
        t = 0.0 if b == 0 else math.copysign(math.inf, b)
    p = student_t_p_value(t, df) if not math.isinf(t) else 0.0
    if t == 0.0 and b == 0:
        p = 1.0
    return FlagTestRow(group_label=group_label, pct_below=a, pct_above=mean1,
                       difference=b, t_stat=t, p_value=p,
                       stars=significance_stars(p), n_obs=n)


def bivariate_classify(distance_by_zone: dict[str, float],
                       quintiles: QuintileAssignment) -> dict[str, str]:
    """Cross distance terciles with wage quintiles into D{1-3}W{1-5}."""
    ids = {z for z in distance_by_zone if z in quintiles.group_of}
    terciles = tercile_group({z: distance_by_zone[z] for z in ids})
    return {z: f"D{terciles[z] + 1}W{quintiles.group_of[z] + 1}"
            for z in sorted(ids)}
