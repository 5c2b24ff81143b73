"""Marginal exposure-effect estimation for clustered binary outcomes.

Solves the classical generalized estimating equations and their
doubly-robust augmented form for the two-parameter identity-link model
``E[Y_ij | A_i] = beta0 + betaA * A_i``, so ``betaA`` is the risk
difference between exposed and unexposed clusters. The augmented
estimating function reweights outcome-model residuals by inverse
propensity and adds the model-vs-marginal discrepancy under both arms;
it stays consistent when either nuisance model is correct. Variances
come from the empirical sandwich over per-cluster contributions.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError, EstimationError, PositivityError
from .features import FeatureMatrix
from .glm import RegressionFit, fit_linear, fit_logistic, stepwise_select
from .graph import Network

Working = Literal["independence", "exchangeable"]

_VAR_FLOOR = 0.001 * 0.999
_B_CLIP = (0.001, 0.999)
_PS_BOUNDS = (0.01, 0.99)
PARAM_NAMES = ("intercept", "exposure")


# ---------------------------------------------------------------------------
# Data containers


@dataclass
class ClusteredData:
    """Per-cluster inputs for the estimating equations.

    ``b0``/``b1`` are outcome-model predictions under each arm and ``g``
    the propensity scores; both may be omitted for the classical solve.
    """

    y: list[np.ndarray]
    a: np.ndarray
    b0: list[np.ndarray] | None = None
    b1: list[np.ndarray] | None = None
    g: np.ndarray | None = None
    cluster_ids: np.ndarray | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.int64)
        m = len(self.y)
        if self.a.shape != (m,):
            raise ConfigError("exposure vector length must equal the cluster count")
        if not np.all((self.a == 0) | (self.a == 1)):
            raise ConfigError("exposure must be binary")
        self.y = [np.asarray(v, dtype=np.float64) for v in self.y]
        if self.cluster_ids is None:
            self.cluster_ids = np.arange(m)
        for arrs in (self.b0, self.b1):
            if arrs is not None:
                if len(arrs) != m:
                    raise ConfigError("outcome-model predictions must cover every cluster")
                for ci, (v, yv) in enumerate(zip(arrs, self.y)):
                    v = np.asarray(v, dtype=np.float64)
                    if v.shape != yv.shape:
                        raise ConfigError(f"prediction length mismatch in cluster {ci}")
                    if v.min() < 0 or v.max() > 1:
                        raise ConfigError("outcome-model predictions must be clamped to [0, 1]")
        if self.g is not None:
            self.g = np.asarray(self.g, dtype=np.float64)
            if self.g.shape != (m,):
                raise ConfigError("propensity vector length must equal the cluster count")
            if np.any(self.g <= 0) or np.any(self.g >= 1):
                raise ConfigError("propensity scores must lie strictly inside (0, 1)")

    @property
    def m(self) -> int:
        return len(self.y)

    @property
    def n_total(self) -> int:
        return int(sum(v.size for v in self.y))


@dataclass
class GeeFit:
    """Solved effect estimate with its sandwich covariance."""

    beta: np.ndarray
    covariance: np.ndarray
    converged: bool
    iterations: int
    working: str
    alpha: float | None
    phi: float
    kind: str
    n_clusters: int
    max_score: float = 0.0
    params: tuple[str, str] = PARAM_NAMES

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    @property
    def wald(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.beta / self.se

    @property
    def pvalues(self) -> np.ndarray:
        return 2 * stats.norm.sf(np.abs(self.wald))

    def report_rows(self) -> list[dict]:
        return [
            {
                "parameter": self.params[k],
                "estimate": float(self.beta[k]),
                "std_error": float(self.se[k]),
                "wald": float(self.wald[k]),
                "p_value": float(self.pvalues[k]),
            }
            for k in range(len(self.beta))
        ]


# ---------------------------------------------------------------------------
# Working-correlation helpers

# Within a cluster the identity-link mean is constant, so V_i reduces to
# phi * s_a^2 * C(alpha) and every D'V^{-1}x collapses to a scaled sum:
# 1'C(alpha)^{-1} x = sum(x) / (1 + (n-1) alpha).


def _arm_variances(beta: np.ndarray) -> np.ndarray:
    mu = np.array([beta[0], beta[0] + beta[1]])
    return np.clip(mu * (1 - mu), _VAR_FLOOR, None)


def _moment_estimates(
    data: ClusteredData, beta: np.ndarray, working: Working
) -> tuple[float, float]:
    s2 = _arm_variances(beta)
    n_total = data.n_total
    rss = 0.0
    for yv, a in zip(data.y, data.a):
        mu = beta[0] + beta[1] * a
        rss += float(np.sum((yv - mu) ** 2)) / s2[a]
    phi = rss / max(n_total - 2, 1)
    if working == "independence":
        return phi, 0.0
    num = 0.0
    pairs = 0.0
    for yv, a in zip(data.y, data.a):
        n = yv.size
        if n < 2:
            continue
        z = (yv - (beta[0] + beta[1] * a)) / np.sqrt(s2[a] * phi)
        zsum = float(z.sum())
        num += (zsum * zsum - float(z @ z)) / 2.0
        pairs += n * (n - 1) / 2.0
    alpha = num / max(pairs - 2, 1.0)
    alpha = float(np.clip(alpha, -0.99, 0.99))
    return phi, alpha


def _cluster_weight(n: int, s2: float, phi: float, alpha: float) -> float:
    return 1.0 / (phi * s2 * (1.0 + (n - 1) * alpha))


# ---------------------------------------------------------------------------
# Classical GEE


def solve_classical_gee(
    data: ClusteredData,
    working: Working = "independence",
    tol: float = 1e-10,
    max_iter: int = 100,
) -> GeeFit:
    """Fixed-point solve of the classical estimating equations.

    Given (alpha, phi) the identity-link equations are linear in beta;
    the nuisance moments are re-estimated between solves until beta moves
    by less than ``tol``.
    """
    _require_both_arms(data)
    sums = np.array([float(v.sum()) for v in data.y])
    sizes = np.array([v.size for v in data.y])
    beta = _init_beta(data, sums, sizes)
    phi, alpha = 1.0, 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        phi, alpha = _moment_estimates(data, beta, working)
        s2 = _arm_variances(beta)
        w = np.array(
            [_cluster_weight(n, s2[a], phi, alpha) for n, a in zip(sizes, data.a)]
        )
        m11 = float(np.sum(w * sizes))
        m12 = float(np.sum(w * sizes * data.a))
        mat = np.array([[m11, m12], [m12, m12]])
        rhs = np.array([float(np.sum(w * sums)), float(np.sum(w * sums * data.a))])
        new_beta = _solve2(mat, rhs)
        delta = np.max(np.abs(new_beta - beta))
        beta = new_beta
        if delta < tol:
            converged = True
            break

    _soft_range_check(beta)
    cov, max_score = _classical_sandwich(data, beta, working, phi, alpha)
    return GeeFit(
        beta, cov, converged, it, working, alpha if working == "exchangeable" else None,
        phi, "classical", data.m, max_score,
    )


def _classical_sandwich(
    data: ClusteredData, beta: np.ndarray, working: Working, phi: float, alpha: float
) -> tuple[np.ndarray, float]:
    s2 = _arm_variances(beta)
    bread = np.zeros((2, 2))
    meat = np.zeros((2, 2))
    score = np.zeros(2)
    for yv, a in zip(data.y, data.a):
        n = yv.size
        w = _cluster_weight(n, s2[a], phi, alpha)
        d = np.array([1.0, float(a)])
        resid_sum = float(yv.sum()) - n * (beta[0] + beta[1] * a)
        u = w * resid_sum * d
        bread += w * n * np.outer(d, d)
        meat += np.outer(u, u)
        score += u
    cov = _bread_inverse_sandwich(bread, meat, data.m)
    return cov, float(np.max(np.abs(score)))


# ---------------------------------------------------------------------------
# Doubly-robust augmented GEE


def solve_augmented_gee(
    data: ClusteredData,
    working: Working = "independence",
    tol: float = 1e-10,
    max_iter: int = 100,
    second_term_variance: Literal["arm", "observed"] = "arm",
) -> GeeFit:
    """Solve the augmented estimating equations with inverse-propensity weights.

    Outcome-model predictions for both arms and propensity scores must be
    present for every cluster. Propensities outside (0.01, 0.99) abort
    with the offending cluster ids rather than being silently truncated:
    weights that extreme signal a positivity violation.
    """
    if data.b0 is None or data.b1 is None or data.g is None:
        raise ConfigError("augmented solve needs outcome-model predictions and propensities")
    _require_both_arms(data)
    bad = np.flatnonzero((data.g < _PS_BOUNDS[0]) | (data.g > _PS_BOUNDS[1]))
    if bad.size:
        ids = [int(data.cluster_ids[i]) for i in bad]
        raise PositivityError(
            f"propensity scores outside {_PS_BOUNDS} for clusters {ids}", ids
        )

    sums = np.array([float(v.sum()) for v in data.y])
    sizes = np.array([v.size for v in data.y])
    sb = np.stack(
        [
            np.array([float(v.sum()) for v in data.b0]),
            np.array([float(v.sum()) for v in data.b1]),
        ]
    )  # (2, m) sums of predictions per arm
    sb_obs = np.where(data.a == 1, sb[1], sb[0])
    gw = data.a / data.g + (1 - data.a) / (1 - data.g)

    beta = _init_beta(data, sums, sizes)
    phi, alpha = 1.0, 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        phi, alpha = _moment_estimates(data, beta, working)
        s2 = _arm_variances(beta)
        mat = np.zeros((2, 2))
        rhs = np.zeros(2)
        for i in range(data.m):
            n = int(sizes[i])
            a_i = int(data.a[i])
            s2_obs = s2[a_i]
            for arm in (0, 1):
                s2_arm = s2[arm] if second_term_variance == "arm" else s2_obs
                w_arm = _cluster_weight(n, s2_arm, phi, alpha)
                d = np.array([1.0, float(arm)])
                mat += w_arm * n * np.outer(d, d)
                rhs += w_arm * sb[arm, i] * d
            w_obs = _cluster_weight(n, s2_obs, phi, alpha)
            d_obs = np.array([1.0, float(a_i)])
            rhs += gw[i] * w_obs * (sums[i] - sb_obs[i]) * d_obs
        new_beta = _solve2(mat, rhs)
        delta = np.max(np.abs(new_beta - beta))
        beta = new_beta
        if delta < tol:
            converged = True
            break

    _soft_range_check(beta)
    cov, max_score = _augmented_sandwich(
        data, beta, working, phi, alpha, sums, sizes, sb, sb_obs, gw, second_term_variance
    )
    return GeeFit(
        beta, cov, converged, it, working,
        alpha if working == "exchangeable" else None, phi, "augmented", data.m, max_score,
    )


def _augmented_sandwich(
    data, beta, working, phi, alpha, sums, sizes, sb, sb_obs, gw, second_term_variance
) -> tuple[np.ndarray, float]:
    s2 = _arm_variances(beta)
    bread = np.zeros((2, 2))
    meat = np.zeros((2, 2))
    score = np.zeros(2)
    for i in range(data.m):
        n = int(sizes[i])
        a_i = int(data.a[i])
        u = np.zeros(2)
        d_obs = np.array([1.0, float(a_i)])
        w_obs = _cluster_weight(n, s2[a_i], phi, alpha)
        u += gw[i] * w_obs * (sums[i] - sb_obs[i]) * d_obs
        for arm in (0, 1):
            s2_arm = s2[arm] if second_term_variance == "arm" else s2[a_i]
            w_arm = _cluster_weight(n, s2_arm, phi, alpha)
            d = np.array([1.0, float(arm)])
            mu_arm = beta[0] + beta[1] * arm
            u += w_arm * (sb[arm, i] - n * mu_arm) * d
            bread += w_arm * n * np.outer(d, d)
        meat += np.outer(u, u)
        score += u
    cov = _bread_inverse_sandwich(bread, meat, data.m)
    return cov, float(np.max(np.abs(score)))


# ---------------------------------------------------------------------------
# Shared solver plumbing


def _require_both_arms(data: ClusteredData) -> None:
    if data.m < 2:
        raise EstimationError("need at least two clusters")
    if data.a.min() == data.a.max():
        raise EstimationError("both exposure arms must be present")


def _init_beta(data: ClusteredData, sums: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    n1 = float(sizes[data.a == 1].sum())
    n0 = float(sizes[data.a == 0].sum())
    mu1 = float(sums[data.a == 1].sum()) / n1
    mu0 = float(sums[data.a == 0].sum()) / n0
    return np.array([mu0, mu1 - mu0])


def _solve2(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    if abs(det) < 1e-300 or not np.isfinite(det):
        raise EstimationError("degenerate design in estimating equations")
    inv = np.array([[mat[1, 1], -mat[0, 1]], [-mat[1, 0], mat[0, 0]]]) / det
    return inv @ rhs


def _bread_inverse_sandwich(bread: np.ndarray, meat: np.ndarray, m: int) -> np.ndarray:
    det = bread[0, 0] * bread[1, 1] - bread[0, 1] * bread[1, 0]
    if abs(det) < 1e-300 or not np.isfinite(det):
        raise EstimationError("singular bread matrix; degenerate design")
    binv = np.array([[bread[1, 1], -bread[0, 1]], [-bread[1, 0], bread[0, 0]]]) / det
    if m <= 2:
        warnings.warn(
            f"sandwich covariance with only {m} clusters is rank-deficient noise",
            stacklevel=3,
        )
    return binv @ meat @ binv.T


def _soft_range_check(beta: np.ndarray) -> None:
    if not (0 <= beta[0] <= 1) or not (0 <= beta[0] + beta[1] <= 1):
        warnings.warn(
            f"fitted arm means outside [0, 1]: beta0={beta[0]:.4f}, "
            f"beta0+betaA={beta[0] + beta[1]:.4f}",
            stacklevel=3,
        )


def sandwich_covariance(fit: GeeFit, data: ClusteredData) -> np.ndarray:
    """Recompute the sandwich covariance of a solved fit from its data."""
    if fit.kind == "classical":
        cov, _ = _classical_sandwich(data, fit.beta, fit.working, fit.phi, fit.alpha or 0.0)
        return cov
    if fit.kind == "augmented":
        sums = np.array([float(v.sum()) for v in data.y])
        sizes = np.array([v.size for v in data.y])
        sb = np.stack(
            [
                np.array([float(v.sum()) for v in data.b0]),
                np.array([float(v.sum()) for v in data.b1]),
            ]
        )
        sb_obs = np.where(data.a == 1, sb[1], sb[0])
        gw = data.a / data.g + (1 - data.a) / (1 - data.g)
        cov, _ = _augmented_sandwich(
            data, fit.beta, fit.working, fit.phi, fit.alpha or 0.0,
            sums, sizes, sb, sb_obs, gw, "arm",
        )
        return cov
    raise ConfigError(f"no sandwich recomputation for kind {fit.kind!r}")


# ---------------------------------------------------------------------------
# Strategy layer


_TOKEN_RE = re.compile(r"^(sum|mean)\((?P<name>[^()]+)\)$|^(?P<plain>[^()]+)$")


@dataclass(frozen=True)
class Strategy:
    """One adjustment strategy for :func:`estimate_effect`.

    ``om_covariates`` name node-level feature columns (``sum(col)`` /
    ``mean(col)`` broadcast a cluster aggregate). ``ps_covariates``
    default to the same columns aggregated to cluster means. With
    ``stepwise`` both nuisance models are selected bidirectionally from
    the candidate set instead of fitted on the exact set.
    """

    kind: Literal["crude", "gee", "dr"]
    om_covariates: tuple[str, ...] = ()
    ps_covariates: tuple[str, ...] | None = None
    stepwise: bool = False
    ps_stepwise: bool | None = None  # None: follow ``stepwise``
    ps_from_column: str | None = None  # use a cluster-level column directly as g
    criterion: str = "aic"
    name: str = ""

    def label(self) -> str:
        return self.name or self.kind

    @property
    def select_ps(self) -> bool:
        return self.stepwise if self.ps_stepwise is None else self.ps_stepwise


@dataclass
class EffectEstimate:
    """Fit plus the nuisance models behind it."""

    strategy: Strategy
    fit: GeeFit
    om_exposed: RegressionFit | None = None
    om_unexposed: RegressionFit | None = None
    ps: RegressionFit | None = None

    @property
    def beta(self) -> np.ndarray:
        return self.fit.beta


def _parse_token(token: str) -> tuple[str, str | None]:
    m = _TOKEN_RE.match(token)
    if not m:
        raise ConfigError(f"bad covariate token {token!r}")
    if m.group("plain") is not None:
        return m.group("plain"), None
    return m.group("name"), token.split("(")[0]


def _node_column(feat: FeatureMatrix, token: str) -> np.ndarray:
    name, agg = _parse_token(token)
    col = feat.column(name)
    if agg == "sum":
        return np.full(feat.n, float(col.sum()))
    if agg == "mean":
        return np.full(feat.n, float(col.mean()))
    return col.astype(np.float64)


def _cluster_value(feat: FeatureMatrix, token: str) -> float:
    name, agg = _parse_token(token)
    col = feat.column(name)
    if agg == "sum":
        return float(col.sum())
    # Node-level columns enter the cluster-level propensity model as means.
    return float(col.mean())


def _om_designs(features: Sequence[FeatureMatrix], tokens: tuple[str, ...]) -> list[np.ndarray]:
    return [
        np.column_stack([_node_column(f, t) for t in tokens]) if tokens else np.zeros((f.n, 0))
        for f in features
    ]


def _ps_design(features: Sequence[FeatureMatrix], tokens: tuple[str, ...]) -> np.ndarray:
    if not tokens:
        return np.zeros((len(features), 0))
    return np.array([[_cluster_value(f, t) for t in tokens] for f in features])


def estimate_effect(
    nets: Sequence[Network],
    outcomes: Sequence[np.ndarray],
    exposure: np.ndarray,
    features: Sequence[FeatureMatrix] | None,
    strategy: Strategy,
    working: Working = "independence",
) -> EffectEstimate:
    """Estimate the exposure effect under one adjustment strategy.

    ``crude`` is the pooled difference in means with a cluster-robust
    variance, ``gee`` the classical solve, and ``dr`` fits per-arm
    outcome models plus a cluster-level propensity model on the
    strategy's covariates before the augmented solve.
    """
    y = [np.asarray(v, dtype=np.float64) for v in outcomes]
    a = np.asarray(exposure, dtype=np.int64)
    cluster_ids = np.array([net.cluster_id for net in nets])
    if strategy.kind == "crude":
        return EffectEstimate(strategy, _crude_fit(y, a))
    if strategy.kind == "gee":
        data = ClusteredData(y, a, cluster_ids=cluster_ids)
        return EffectEstimate(strategy, solve_classical_gee(data, working))
    if strategy.kind != "dr":
        raise ConfigError(f"unknown strategy kind {strategy.kind!r}")
    if features is None:
        raise ConfigError("dr strategies need feature matrices")

    om_tokens = strategy.om_covariates
    ps_tokens = strategy.ps_covariates if strategy.ps_covariates is not None else om_tokens
    om_x = _om_designs(features, om_tokens)
    arm_fits: dict[int, RegressionFit] = {}
    for arm in (0, 1):
        rows = [i for i in range(len(nets)) if a[i] == arm]
        if not rows:
            raise EstimationError("both exposure arms must be present")
        X = np.vstack([om_x[i] for i in rows]) if om_tokens else None
        yy = np.concatenate([y[i] for i in rows])
        if om_tokens and strategy.stepwise:
            arm_fits[arm] = stepwise_select(
                X, yy, names=om_tokens, model_kind="linear", criterion=strategy.criterion
            )
        else:
            arm_fits[arm] = fit_linear(X, yy, names=om_tokens)

    def _predict(fit: RegressionFit, ci: int) -> np.ndarray:
        sel = fit.selected
        sub = (
            np.column_stack([_node_column(features[ci], t) for t in sel]) if sel else None
        )
        pred = fit.predict(sub, nrows=features[ci].n)
        return np.clip(pred, _B_CLIP[0], _B_CLIP[1])

    b0 = [_predict(arm_fits[0], i) for i in range(len(nets))]
    b1 = [_predict(arm_fits[1], i) for i in range(len(nets))]

    if strategy.ps_from_column is not None:
        g = np.array([_cluster_value(f, strategy.ps_from_column) for f in features])
        data = ClusteredData(y, a, b0=b0, b1=b1, g=g, cluster_ids=cluster_ids)
        fit = solve_augmented_gee(data, working)
        return EffectEstimate(strategy, fit, arm_fits[1], arm_fits[0], None)

    ps_x = _ps_design(features, ps_tokens)
    if ps_tokens and strategy.select_ps:
        # Candidate propensity models whose fitted scores leave the
        # positivity band are inadmissible rather than errors later on.
        in_bounds = lambda fit: (
            fit.fitted.min() >= _PS_BOUNDS[0] and fit.fitted.max() <= _PS_BOUNDS[1]
        )
        ps_fit = stepwise_select(
            ps_x, a.astype(float), names=ps_tokens, model_kind="logistic",
            criterion=strategy.criterion, constraint=in_bounds,
        )
        sel = ps_fit.selected
        idx = [ps_tokens.index(t) for t in sel]
        g = ps_fit.predict(ps_x[:, idx] if idx else None, nrows=len(nets))
    elif ps_tokens:
        ps_fit = fit_logistic(ps_x, a.astype(float), names=ps_tokens)
        g = ps_fit.fitted
    else:
        ps_fit = fit_logistic(None, a.astype(float), names=())
        g = ps_fit.fitted

    data = ClusteredData(y, a, b0=b0, b1=b1, g=np.asarray(g), cluster_ids=cluster_ids)
    fit = solve_augmented_gee(data, working)
    return EffectEstimate(strategy, fit, arm_fits[1], arm_fits[0], ps_fit)


def _crude_fit(y: list[np.ndarray], a: np.ndarray) -> GeeFit:
    if a.min() == a.max():
        raise EstimationError("both exposure arms must be present")
    sums = np.array([float(v.sum()) for v in y])
    sizes = np.array([v.size for v in y])
    mu = {}
    var = {}
    for arm in (0, 1):
        mask = a == arm
        n_arm = float(sizes[mask].sum())
        mu[arm] = float(sums[mask].sum()) / n_arm
        resid = sums[mask] - sizes[mask] * mu[arm]
        var[arm] = float(np.sum(resid**2)) / n_arm**2
    beta = np.array([mu[0], mu[1] - mu[0]])
    cov = np.array([[var[0], -var[0]], [-var[0], var[0] + var[1]]])
    return GeeFit(
        beta, cov, True, 0, "none", None, 1.0, "crude", len(y),
    )
