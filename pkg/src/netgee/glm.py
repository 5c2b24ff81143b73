"""Nuisance-model regression engines.

Ordinary least squares for the per-arm linear-probability outcome models,
iteratively reweighted least squares for the logistic propensity model,
and bidirectional stepwise covariate selection driven by an information
criterion. These are deliberately small, self-contained solvers so the
estimating-equation layer above them has no black boxes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import linalg, stats
from scipy.special import expit

from .errors import ConfigError, EstimationError, SeparationError

ModelKind = Literal["linear", "logistic"]


@dataclass
class RegressionFit:
    """Coefficients and diagnostics for one fitted nuisance model."""

    model_kind: ModelKind
    names: tuple[str, ...]  # includes "intercept" first when fitted with one
    coefficients: np.ndarray
    standard_errors: np.ndarray
    fitted: np.ndarray
    selected: tuple[str, ...]
    nobs: int
    aic: float
    converged: bool = True

    @property
    def tvalues(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coefficients / self.standard_errors

    @property
    def pvalues(self) -> np.ndarray:
        t = np.abs(self.tvalues)
        if self.model_kind == "linear":
            df = max(self.nobs - len(self.names), 1)
            return 2 * stats.t.sf(t, df)
        return 2 * stats.norm.sf(t)

    def predict(self, X: np.ndarray | None, nrows: int | None = None) -> np.ndarray:
        """Predictions for rows whose columns match ``names`` minus the intercept."""
        design = _design(X, add_intercept="intercept" in self.names, nrows=nrows)
        eta = design @ self.coefficients
        return expit(eta) if self.model_kind == "logistic" else eta


def _design(X: np.ndarray | None, add_intercept: bool, nrows: int | None = None) -> np.ndarray:
    if X is None:
        if nrows is None:
            raise ConfigError("intercept-only design needs the number of rows")
        X = np.zeros((nrows, 0))
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if add_intercept:
        X = np.hstack([np.ones((X.shape[0], 1)), X])
    return X


def _qr_rank_deficient(design: np.ndarray) -> bool:
    if design.shape[1] == 0:
        return False
    r = np.linalg.qr(design, mode="r")
    d = np.abs(np.diag(r))
    return bool(d.min() <= d.max() * 1e-10) if d.size else False


def _drop_aliased(design: np.ndarray, names: list[str]) -> tuple[np.ndarray, list[str], list[str]]:
    """Greedy in-order removal of columns that do not increase rank."""
    n, p = design.shape
    if p <= n and not _qr_rank_deficient(design):
        return design, names, []
    kept: list[int] = []
    for j in range(p):
        cand = design[:, kept + [j]]
        if np.linalg.matrix_rank(cand) > len(kept):
            kept.append(j)
    dropped = [names[j] for j in range(p) if j not in kept]
    if dropped:
        warnings.warn(f"dropping aliased columns: {dropped}", stacklevel=3)
    return design[:, kept], [names[j] for j in kept], dropped


def _resolve_names(X: np.ndarray | None, names: Sequence[str] | None) -> list[str]:
    if X is None:
        return []
    X = np.asarray(X)
    p = 1 if X.ndim == 1 else X.shape[1]
    if names is None:
        return [f"x{j + 1}" for j in range(p)]
    if len(names) != p:
        raise ConfigError("names length must match the number of columns")
    return list(names)


def fit_linear(
    X: np.ndarray | None,
    y: np.ndarray,
    names: Sequence[str] | None = None,
    add_intercept: bool = True,
) -> RegressionFit:
    """Ordinary least squares with classical standard errors.

    Rank-deficient designs lose aliased columns (keeping the earliest) with
    a warning, mirroring common stepwise practice.
    """
    y = np.asarray(y, dtype=np.float64)
    colnames = _resolve_names(X, names)
    design = _design(X, add_intercept, nrows=y.size)
    if design.shape[0] != y.size:
        raise ConfigError("response length must match the design")
    full_names = (["intercept"] if add_intercept else []) + colnames
    if design.shape[0] < design.shape[1]:
        raise EstimationError("more columns than rows")
    design, full_names, _ = _drop_aliased(design, full_names)

    q, r = np.linalg.qr(design)
    coef = linalg.solve_triangular(r, q.T @ y)
    fitted = design @ coef
    resid = y - fitted
    n, p = design.shape
    dof = max(n - p, 1)
    sigma2 = float(resid @ resid) / dof
    rinv = linalg.solve_triangular(r, np.eye(p))
    cov = sigma2 * (rinv @ rinv.T)
    se = np.sqrt(np.diag(cov))
    rss = float(resid @ resid)
    aic = n * math.log(max(rss, 1e-300) / n) + 2 * p
    selected = tuple(nm for nm in full_names if nm != "intercept")
    return RegressionFit("linear", tuple(full_names), coef, se, fitted, selected, n, aic)


def fit_logistic(
    X: np.ndarray | None,
    y: np.ndarray,
    names: Sequence[str] | None = None,
    add_intercept: bool = True,
    max_iter: int = 50,
    tol: float = 1e-8,
) -> RegressionFit:
    """Maximum-likelihood logistic regression via Newton/IRLS.

    Converged when the score's max-norm drops below ``tol``. Diverging
    coefficients (complete or quasi-separation) raise
    :class:`SeparationError`; remove or reduce covariates in that case.
    """
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise EstimationError("logistic response must be binary 0/1")
    if y.min() == y.max():
        raise EstimationError("both outcome classes must be present")
    colnames = _resolve_names(X, names)
    design = _design(X, add_intercept, nrows=y.size)
    if design.shape[0] != y.size:
        raise ConfigError("response length must match the design")
    full_names = (["intercept"] if add_intercept else []) + colnames
    design, full_names, _ = _drop_aliased(design, full_names)

    def _nll(b: np.ndarray) -> float:
        eta = design @ b
        # log(1 + exp(eta)) - y*eta, computed stably
        return float(np.sum(np.logaddexp(0.0, eta) - y * eta))

    n, p = design.shape
    beta = np.zeros(p)
    converged = False
    nll = _nll(beta)
    for _ in range(max_iter):
        eta = design @ beta
        mu = expit(eta)
        score = design.T @ (y - mu)
        if np.max(np.abs(score)) < tol:
            converged = True
            break
        w = np.clip(mu * (1 - mu), 1e-10, None)
        h = design.T @ (design * w[:, None])
        try:
            delta = np.linalg.solve(h, score)
        except np.linalg.LinAlgError as exc:
            raise SeparationError(f"singular information matrix: {exc}") from exc
        stepsize = 1.0
        for _ in range(6):  # halve overshooting Newton steps
            cand = beta + stepsize * delta
            cand_nll = _nll(cand)
            if cand_nll <= nll + 1e-12:
                break
            stepsize /= 2
        beta = beta + stepsize * delta
        nll = _nll(beta)
        if np.max(np.abs(design @ beta)) > 30:
            raise SeparationError(
                "coefficients diverging; classes appear separated, remove covariates"
            )
    if not converged and np.max(np.abs(design @ beta)) > 30:
        raise SeparationError(
            "coefficients diverging; classes appear separated, remove covariates"
        )

    eta = design @ beta
    mu = expit(eta)
    w = np.clip(mu * (1 - mu), 1e-10, None)
    h = design.T @ (design * w[:, None])
    cov = np.linalg.inv(h)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore"):
        ll = float(y @ np.log(np.clip(mu, 1e-300, None)))
        ll += float((1 - y) @ np.log(np.clip(1 - mu, 1e-300, None)))
    aic = -2 * ll + 2 * p
    selected = tuple(nm for nm in full_names if nm != "intercept")
    return RegressionFit(
        "logistic", tuple(full_names), beta, se, mu, selected, n, aic, converged
    )


# ---------------------------------------------------------------------------
# Stepwise selection


def _linear_criterion_factory(X: np.ndarray, y: np.ndarray, criterion: str):
    """RSS for sub-designs from one Gram matrix, so each candidate is O(p^3)."""
    n = y.size
    design = _design(X, add_intercept=True)
    g = design.T @ design
    gy = design.T @ y
    yy = float(y @ y)
    penalty = math.log(n) if criterion == "bic" else 2.0

    def crit(cols: tuple[int, ...]) -> float:
        idx = np.array((0,) + tuple(c + 1 for c in cols), dtype=np.int64)
        gi = g[np.ix_(idx, idx)]
        gyi = gy[idx]
        try:
            c, low = linalg.cho_factor(gi)
        except linalg.LinAlgError:
            return math.inf
        coef = linalg.cho_solve((c, low), gyi)
        rss = max(yy - float(gyi @ coef), 1e-300)
        return n * math.log(rss / n) + penalty * idx.size

    return crit


def _logistic_criterion_factory(X: np.ndarray, y: np.ndarray, criterion: str, constraint):
    n = y.size
    penalty = math.log(n) if criterion == "bic" else 2.0

    def crit(cols: tuple[int, ...]) -> float:
        sub = X[:, list(cols)] if cols else None
        try:
            fit = fit_logistic(sub, y)
        except (SeparationError, EstimationError):
            return math.inf
        if constraint is not None and not constraint(fit):
            return math.inf
        ll = -(fit.aic - 2 * len(fit.names)) / 2
        return -2 * ll + penalty * len(fit.names)

    return crit


def stepwise_select(
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str] | None = None,
    model_kind: ModelKind = "linear",
    criterion: str = "aic",
    constraint=None,
) -> RegressionFit:
    """Bidirectional search from the intercept-only model.

    At each round the best single addition or deletion is taken when it
    lowers the criterion; exact ties go to the smaller model. The search is
    deterministic given the column order. A ``constraint`` predicate on
    candidate logistic fits marks violating models inadmissible (used to
    keep selected propensity models inside positivity bounds).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    colnames = _resolve_names(X, names)
    if X.shape[1] < 1:
        raise ConfigError("need at least one candidate covariate")
    if criterion not in ("aic", "bic"):
        raise ConfigError(f"unknown criterion {criterion!r}")

    crit_of = (
        _linear_criterion_factory(X, y, criterion)
        if model_kind == "linear"
        else _logistic_criterion_factory(X, y, criterion, constraint)
    )
    current: tuple[int, ...] = ()
    current_crit = crit_of(current)
    p = X.shape[1]
    visited = {current}
    while True:
        candidates: list[tuple[float, int, tuple[int, ...]]] = [
            (current_crit, len(current), current)
        ]
        for j in range(p):
            if j in current:
                model = tuple(c for c in current if c != j)
            else:
                model = tuple(sorted(current + (j,)))
            candidates.append((crit_of(model), len(model), model))
        candidates.sort(key=lambda t: (t[0], t[1], t[2]))
        best_crit, _, best = candidates[0]
        if best == current or best in visited:
            break
        current, current_crit = best, best_crit
        visited.add(current)

    sub = X[:, list(current)] if current else None
    sub_names = [colnames[j] for j in current]
    if model_kind == "linear":
        return fit_linear(sub, y, names=sub_names)
    return fit_logistic(sub, y, names=sub_names)
