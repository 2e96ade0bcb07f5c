"""Penalized regression engine.

Coordinate-descent lasso for the weighted linear objective and the logistic
objective, the plug-in penalty level with data-driven loadings, unpenalized
post-selection refits, and a K-fold cross-validation alternative.

Conventions used throughout:

* the weighted-linear objective is  mean_i w_i^2 (y_i - x_i.theta)^2
  + (lam/n) * sum_j loading_j |theta_j|  -- note the weights enter squared;
* the logistic objective is  mean_i [log(1+exp(eta_i)) - y_i eta_i]
  + (lam/n) * sum_j loading_j |theta_j|;
* the intercept is always present and never penalized unless
  fit_intercept=False;
* `unpenalized` columns take no penalty but are not counted in the support.
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import RankDeficiencyError
from .glm import PROB_EPS, CoefficientVector, link, solve_spd

_OBJ_SLACK = 1e-12  # relative slack when comparing recorded objective values


def soft_threshold(z: float, t: float) -> float:
    """Soft-thresholding: sign(z) * max(|z| - t, 0), exactly 0 in the dead zone."""
    z = float(z)
    t = float(t)
    if not (math.isfinite(z) and math.isfinite(t)):
        raise ValueError("arguments must be finite")
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@dataclass(frozen=True)
class PenaltyConfig:
    """How the penalty level is chosen.

    method "plugin" uses c * sqrt(n) * PhiInv(1 - gamma / (2 p)); gamma=None
    means the default 0.1 / log(n). method "cv" selects the level by K-fold
    cross-validation on a geometric grid below the smallest all-zero level.
    """

    method: str = "plugin"
    c: float = 1.1
    gamma: float | None = None
    cv_folds: int = 10
    cv_grid: int = 30
    cv_min_ratio: float = 1e-3
    one_se: bool = False
    loading_refinements: int = 1

    def __post_init__(self):
        if self.method not in ("plugin", "cv"):
            raise ValueError(f"unknown penalty method {self.method!r}")
        if not math.isfinite(self.c) or self.c < 0:
            raise ValueError("c must be a nonnegative real")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if self.cv_grid < 2 or not 0.0 < self.cv_min_ratio < 1.0:
            raise ValueError("bad cross-validation grid settings")
        if self.loading_refinements < 0:
            raise ValueError("loading_refinements must be nonnegative")
        if self.method == "plugin" and self.c < 1.0:
            _warnings.warn(
                "plug-in penalty constant c below 1.0 voids its theoretical guarantee",
                UserWarning,
                stacklevel=2,
            )


def plugin_lambda(n: int, p: int, config: PenaltyConfig | None = None,
                  *, c: float | None = None, gamma: float | None = None) -> float:
    """Plug-in penalty level c * sqrt(n) * PhiInv(1 - gamma / (2 p)).

    `c` and `gamma` override the config when given; gamma defaults to
    0.1 / log(n), which requires n >= 2.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    if config is None:
        config = PenaltyConfig()
    cc = config.c if c is None else float(c)
    gg = config.gamma if gamma is None else float(gamma)
    if gg is None:
        if n < 2:
            raise ValueError("gamma must be given explicitly when n < 2")
        gg = 0.1 / math.log(n)
    if not 0.0 < gg < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if cc < 0 or not math.isfinite(cc):
        raise ValueError("c must be a nonnegative real")
    return cc * math.sqrt(n) * float(norm.ppf(1.0 - gg / (2.0 * p)))


@dataclass(frozen=True)
class LassoFit:
    """Solution of one penalized problem.

    `support` lists the penalized coordinates with nonzero coefficients;
    unpenalized columns (and the intercept) are never part of it.
    `objective_path` holds the penalized objective after every recorded sweep
    and is nonincreasing.
    """

    intercept: float
    coef: np.ndarray
    support: tuple[int, ...]
    penalty: float
    loadings: np.ndarray
    iterations: int
    converged: bool
    objective: float
    objective_path: np.ndarray
    warnings: tuple[str, ...] = ()
    treatment_index: int | None = None

    @property
    def coefficients(self) -> CoefficientVector:
        if self.treatment_index is None:
            return CoefficientVector(self.intercept, None, self.coef)
        t = self.treatment_index
        return CoefficientVector(
            self.intercept, float(self.coef[t]), np.delete(self.coef, t)
        )


def _validate_common(X, y, lam, loadings, unpenalized):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or y.ndim != 1:
        raise ValueError("X must be (n, p) and y length n")
    if y.size == 0:
        raise ValueError("empty data")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("X and y must be finite")
    if not math.isfinite(lam) or lam < 0:
        raise ValueError("penalty level must be a nonnegative real")
    p = X.shape[1]
    if loadings is None:
        loadings = np.ones(p)
    else:
        loadings = np.asarray(loadings, dtype=float)
        if loadings.shape != (p,) or not np.all(np.isfinite(loadings)) or np.any(loadings <= 0):
            raise ValueError("loadings must be a positive vector of length p")
    unpen = np.zeros(p, dtype=bool)
    for j in unpenalized:
        jj = int(j)
        if not 0 <= jj < p:
            raise ValueError(f"unpenalized index {jj} out of range")
        unpen[jj] = True
    return X, y, float(lam), loadings, unpen


def _sweep(Xf, XWf, Wvec, sumW, r, coef, intercept, col_sq, thr, penal, idx, fit_intercept):
    """One coordinate pass over `idx`; mutates r and coef in place."""
    max_d = 0.0
    if fit_intercept and sumW > 0.0:
        dc = float(r @ Wvec) / sumW
        if dc != 0.0:
            intercept += dc
            r -= dc
            max_d = abs(dc)
    for j in idx:
        cj = col_sq[j]
        if cj <= 0.0:
            continue
        rho = float(r @ XWf[:, j]) + cj * coef[j]
        if penal[j]:
            t = thr[j]
            if rho > t:
                new = (rho - t) / cj
            elif rho < -t:
                new = (rho + t) / cj
            else:
                new = 0.0
        else:
            new = rho / cj
        d = new - coef[j]
        if d != 0.0:
            coef[j] = new
            r -= Xf[:, j] * d
            ad = abs(d)
            if ad > max_d:
                max_d = ad
    return intercept, max_d


def _cd_solve(Xf, XWf, Wvec, r, coef, intercept, col_sq, thr, penal, fit_intercept,
              tol, budget, record):
    """Full sweep + active-set cycling until the sup-norm change drops below tol.

    Returns (intercept, sweeps_used, converged). `record`, when given, is
    called after every sweep to append an objective value.
    """
    p = coef.size
    full = np.arange(p)
    sumW = float(Wvec.sum())
    sweeps = 0
    converged = False
    while sweeps < budget:
        intercept, md = _sweep(Xf, XWf, Wvec, sumW, r, coef, intercept,
                               col_sq, thr, penal, full, fit_intercept)
        sweeps += 1
        if record is not None:
            record()
        if md < tol:
            converged = True
            break
        while sweeps < budget:
            active = np.flatnonzero((coef != 0.0) | ~penal)
            if active.size == 0:
                break
            intercept, md = _sweep(Xf, XWf, Wvec, sumW, r, coef, intercept,
                                   col_sq, thr, penal, active, fit_intercept)
            sweeps += 1
            if record is not None:
                record()
            if md < tol:
                break
    return intercept, sweeps, converged


def lasso_wls(X, y, w, lam, loadings=None, *, fit_intercept: bool = True,
              unpenalized=(), tol: float = 1e-8, max_sweeps: int = 10_000,
              treatment_index: int | None = None) -> LassoFit:
    """Weighted-linear lasso by cyclic coordinate descent with active-set cycling.

    Minimizes mean_i w_i^2 (y_i - c - x_i.theta)^2 + (lam/n) sum_j loading_j
    |theta_j|. Stops when the largest coefficient change in a sweep falls
    below `tol` or after `max_sweeps` sweeps (then converged=False and a
    warning is attached). Zero-variance columns keep coefficient 0.
    """
    X, y, lam, loadings, unpen = _validate_common(X, y, lam, loadings, unpenalized)
    w = np.asarray(w, dtype=float)
    if w.shape != y.shape or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("w must be a nonnegative vector matching y")
    n, p = X.shape
    W = w * w
    Xf = np.asfortranarray(X)
    XWf = np.asfortranarray(X * W[:, None])
    col_sq = W @ (X * X)
    penal = ~unpen
    thr = np.where(penal, lam * loadings / 2.0, 0.0)

    coef = np.zeros(p)
    intercept = 0.0
    r = y.copy()
    pen_load = np.where(penal, loadings, 0.0)

    def objective() -> float:
        return float(W @ (r * r)) / n + (lam / n) * float(pen_load @ np.abs(coef))

    path = [objective()]
    intercept, sweeps, converged = _cd_solve(
        Xf, XWf, W, r, coef, intercept, col_sq, thr, penal, fit_intercept,
        tol, max_sweeps, lambda: path.append(objective()),
    )
    notes: tuple[str, ...] = ()
    if not converged:
        notes = (f"weighted lasso stopped at the sweep cap ({max_sweeps}) before reaching tol={tol:g}",)
    support = tuple(int(j) for j in np.flatnonzero(coef) if penal[j])
    return LassoFit(
        intercept=float(intercept),
        coef=coef,
        support=support,
        penalty=lam,
        loadings=loadings,
        iterations=sweeps,
        converged=converged,
        objective=path[-1],
        objective_path=np.asarray(path),
        warnings=notes,
        treatment_index=treatment_index,
    )


def lasso_logistic(X, y, lam, loadings=None, *, unpenalized=(), fit_intercept: bool = True,
                   tol: float = 1e-8, max_sweeps: int = 10_000, max_outer: int = 200,
                   treatment_index: int | None = None) -> LassoFit:
    """Penalized logistic regression by iteratively reweighted coordinate descent.

    Each outer pass builds the curvature-weighted quadratic at the current
    fit and solves it by coordinate descent. If a pass ever increases the
    penalized objective, it is redone from the previous iterate with the
    global curvature bound 0.25, which majorizes the logistic loss along
    every coordinate, so the recorded objective sequence is nonincreasing.
    """
    X, y, lam, loadings, unpen = _validate_common(X, y, lam, loadings, unpenalized)
    uniq = np.unique(y)
    if not np.isin(uniq, (0.0, 1.0)).all():
        raise ValueError("outcome must be binary 0/1 for the logistic objective")
    n, p = X.shape
    Xf = np.asfortranarray(X)
    Xsq = X * X
    penal = ~unpen
    thr = np.where(penal, lam * loadings, 0.0)  # quadratic carries a 1/2 factor
    pen_load = np.where(penal, loadings, 0.0)

    coef = np.zeros(p)
    ybar = float(np.mean(y))
    intercept = float(np.log((ybar + PROB_EPS) / (1.0 - ybar + PROB_EPS))) if fit_intercept else 0.0
    eta = np.full(n, intercept) + X @ coef

    def objective() -> float:
        return float(np.mean(np.logaddexp(0.0, eta) - y * eta)) \
            + (lam / n) * float(pen_load @ np.abs(coef))

    path = [objective()]
    notes: list[str] = []
    sep_warned = False
    total_sweeps = 0
    converged = False

    for _ in range(max_outer):
        prev_intercept = intercept
        prev_coef = coef.copy()
        prev_obj = path[-1]
        p_hat = np.clip(1.0 / (1.0 + np.exp(-np.clip(eta, -700, 700))), PROB_EPS, 1.0 - PROB_EPS)

        def quad_pass(om, inner_cap):
            nonlocal intercept, total_sweeps, eta
            r = (y - p_hat) / om
            XWf = np.asfortranarray(X * om[:, None])
            col_sq = om @ Xsq
            budget = min(inner_cap, max(1, max_sweeps - total_sweeps))
            intercept, used, _ = _cd_solve(
                Xf, XWf, om, r, coef, intercept, col_sq, thr, penal,
                fit_intercept, tol, budget, None,
            )
            total_sweeps += used
            eta = intercept + X @ coef

        quad_pass(p_hat * (1.0 - p_hat), 50)
        new_obj = objective()
        if new_obj > prev_obj + _OBJ_SLACK * (1.0 + abs(prev_obj)):
            # Newton quadratic overshot: retry from the previous iterate with
            # the provable 0.25 majorizer.
            intercept = prev_intercept
            coef[:] = prev_coef
            eta = intercept + X @ coef
            quad_pass(np.full(n, 0.25), 50)
            new_obj = objective()
            if new_obj > prev_obj + _OBJ_SLACK * (1.0 + abs(prev_obj)):
                # No descent available beyond rounding noise: stay put.
                intercept = prev_intercept
                coef[:] = prev_coef
                eta = intercept + X @ coef
                new_obj = prev_obj
                converged = True
        path.append(new_obj)
        if not sep_warned and float(np.max(np.abs(eta))) > 30.0:
            notes.append(
                "possible separation: |eta| exceeded 30 while the loss kept shrinking; "
                "coefficients remain bounded by the penalty"
            )
            sep_warned = True
        delta = max(
            abs(intercept - prev_intercept),
            float(np.max(np.abs(coef - prev_coef))) if p else 0.0,
        )
        if delta < tol:
            converged = True
        if converged:
            break
        if total_sweeps >= max_sweeps:
            notes.append(
                f"logistic lasso stopped at the sweep cap ({max_sweeps}) before reaching tol={tol:g}"
            )
            break

    support = tuple(int(j) for j in np.flatnonzero(coef) if penal[j])
    return LassoFit(
        intercept=float(intercept),
        coef=coef,
        support=support,
        penalty=lam,
        loadings=loadings,
        iterations=total_sweeps,
        converged=converged,
        objective=path[-1],
        objective_path=np.asarray(path),
        warnings=tuple(notes),
        treatment_index=treatment_index,
    )


def _floor_loadings(g: np.ndarray) -> np.ndarray:
    top = float(np.max(g)) if g.size else 0.0
    if top <= 0.0:
        return np.ones_like(g)
    return np.maximum(g, 1e-10 * top)


def wls_lasso_loadings(X, y, w, lam, *, refinements: int = 1, fit_intercept: bool = True,
                       unpenalized=(), tol: float = 1e-8) -> np.ndarray:
    """Heteroskedasticity-matched loadings sqrt(mean[w^2 x_j^2 u^2]) for lasso_wls.

    The initial u is the weighted intercept-only residual, which makes the
    pilot loading a weighted column norm times the response scale; each
    refinement refits and recomputes u from the pilot's residuals.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    W = w * w
    n = y.size
    sumW = float(W.sum())
    ybar = float(W @ y) / sumW if (fit_intercept and sumW > 0) else 0.0
    u = w * (y - ybar)
    col = np.sqrt(W @ (X * X) / n)
    g = _floor_loadings(col * math.sqrt(float(np.mean(u * u))))
    for _ in range(refinements):
        fit = lasso_wls(X, y, w, lam, g, fit_intercept=fit_intercept,
                        unpenalized=unpenalized, tol=tol)
        u = w * (y - fit.intercept - X @ fit.coef)
        g = _floor_loadings(np.sqrt((W * u * u) @ (X * X) / n))
    return g


def logistic_lasso_loadings(X, y, lam, *, refinements: int = 1, unpenalized=(),
                            fit_intercept: bool = True, tol: float = 1e-8) -> np.ndarray:
    """Score-matched loadings sqrt(mean[(y - p_hat)^2 x_j^2]) for lasso_logistic.

    The pilot uses the intercept-only residual (y - ybar); refinements use
    the fitted probabilities from a pilot penalized fit.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    u2 = (y - float(np.mean(y))) ** 2
    g = _floor_loadings(np.sqrt(u2 @ (X * X) / n))
    for _ in range(refinements):
        fit = lasso_logistic(X, y, lam, g, unpenalized=unpenalized,
                             fit_intercept=fit_intercept, tol=tol)
        p_hat = link(fit.intercept + X @ fit.coef)
        u2 = (y - p_hat) ** 2
        g = _floor_loadings(np.sqrt(u2 @ (X * X) / n))
    return g


def lambda_max_wls(X, y, w, loadings, *, fit_intercept: bool = True) -> float:
    """Smallest penalty that zeroes every penalized coordinate of lasso_wls.

    With an intercept the response is first centered at its weighted mean;
    the level is max_j |2 sum_i w_i^2 y_i x_ij| / loading_j on the centered
    response.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    loadings = np.asarray(loadings, dtype=float)
    W = w * w
    sumW = float(W.sum())
    yc = y - (float(W @ y) / sumW if (fit_intercept and sumW > 0) else 0.0)
    score = 2.0 * ((W * yc) @ X)
    return float(np.max(np.abs(score) / loadings))


def _lambda_max_logistic(X, y, loadings, fit_intercept):
    yc = y - (float(np.mean(y)) if fit_intercept else 0.5)
    score = yc @ X  # n * mean[(y - ybar) x_j]
    return float(np.max(np.abs(score) / loadings))


def cv_lambda(X, y, family: str, *, w=None, loadings=None,
              config: PenaltyConfig | None = None, unpenalized=(),
              fit_intercept: bool = True, seed: int = 0) -> float:
    """K-fold cross-validated penalty level on a geometric grid.

    Folds come from a counter-based generator seeded by `seed`, so the split
    is reproducible across platforms and job counts. Held-out loss is the
    family deviance (weighted squared error for "linear", mean logistic loss
    for "logistic"); the minimizer is returned, or the largest level within
    one standard error of it when config.one_se is set.
    """
    if family not in ("linear", "logistic"):
        raise ValueError(f"unknown family {family!r}")
    if config is None:
        config = PenaltyConfig(method="cv")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if w is None:
        w = np.ones(n)
    w = np.asarray(w, dtype=float)
    if loadings is None:
        pilot = plugin_lambda(n, p, PenaltyConfig())
        if family == "linear":
            loadings = wls_lasso_loadings(X, y, w, pilot, fit_intercept=fit_intercept,
                                          unpenalized=unpenalized,
                                          refinements=config.loading_refinements)
        else:
            loadings = logistic_lasso_loadings(X, y, pilot, fit_intercept=fit_intercept,
                                               unpenalized=unpenalized,
                                               refinements=config.loading_refinements)
    loadings = np.asarray(loadings, dtype=float)
    if family == "linear":
        top = lambda_max_wls(X, y, w, loadings, fit_intercept=fit_intercept)
    else:
        top = _lambda_max_logistic(X, y, loadings, fit_intercept)
    if top <= 0:
        return 0.0
    grid = np.geomspace(top, top * config.cv_min_ratio, config.cv_grid)

    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    perm = rng.permutation(n)
    folds = np.array_split(perm, config.cv_folds)
    losses = np.zeros((config.cv_folds, grid.size))
    for fi, test_idx in enumerate(folds):
        mask = np.ones(n, dtype=bool)
        mask[test_idx] = False
        Xtr, ytr, wtr = X[mask], y[mask], w[mask]
        Xte, yte, wte = X[test_idx], y[test_idx], w[test_idx]
        for gi, lam in enumerate(grid):
            if family == "linear":
                fit = lasso_wls(Xtr, ytr, wtr, float(lam), loadings,
                                fit_intercept=fit_intercept, unpenalized=unpenalized)
                resid = yte - fit.intercept - Xte @ fit.coef
                losses[fi, gi] = float(np.mean((wte * resid) ** 2))
            else:
                fit = lasso_logistic(Xtr, ytr, float(lam), loadings,
                                     fit_intercept=fit_intercept, unpenalized=unpenalized)
                eta = fit.intercept + Xte @ fit.coef
                losses[fi, gi] = float(np.mean(np.logaddexp(0.0, eta) - yte * eta))
    mean_loss = losses.mean(axis=0)
    best = int(np.argmin(mean_loss))
    if config.one_se:
        se = float(losses[:, best].std(ddof=1) / math.sqrt(config.cv_folds))
        ok = np.flatnonzero(mean_loss <= mean_loss[best] + se)
        best = int(ok[0])  # grid descends, so the first qualifying entry is the largest
    return float(grid[best])


@dataclass(frozen=True)
class RefitResult:
    """Unpenalized refit restricted to {intercept} | support | kept columns.

    `coef` is full length with exact zeros off the refit columns. `cov` is
    the classical covariance of [intercept?, columns in `cols` order];
    `cov_sandwich` its heteroskedasticity-robust counterpart (logistic only).
    """

    intercept: float
    coef: np.ndarray
    cols: tuple[int, ...]
    objective: float
    has_intercept: bool
    cov: np.ndarray | None = None
    cov_sandwich: np.ndarray | None = None
    warnings: tuple[str, ...] = ()


def _logit_mle(Z, y, *, names=None, tol: float = 1e-10, max_iter: int = 100):
    """Newton-Raphson logistic MLE with step halving; raises on a deficient Hessian."""
    n, k = Z.shape
    coef = np.zeros(k)
    eta = Z @ coef
    notes: list[str] = []

    def total_loss(e):
        return float(np.sum(np.logaddexp(0.0, e) - y * e))

    f0 = total_loss(eta)
    H = None
    for _ in range(max_iter):
        prob = np.clip(1.0 / (1.0 + np.exp(-np.clip(eta, -700, 700))), PROB_EPS, 1.0 - PROB_EPS)
        om = prob * (1.0 - prob)
        score = Z.T @ (y - prob)
        H = Z.T @ (Z * om[:, None])
        step, _ = solve_spd(H, score, names=names)
        t = 1.0
        while True:
            new_coef = coef + t * step
            new_eta = Z @ new_coef
            f1 = total_loss(new_eta)
            if f1 <= f0 + 1e-12 * (1.0 + abs(f0)) or t < 1e-10:
                break
            t *= 0.5
        moved = t * float(np.max(np.abs(step))) if k else 0.0
        coef, eta, f0 = new_coef, new_eta, f1
        if moved < tol:
            break
    else:
        notes.append("logistic refit reached its iteration cap before converging")
    if float(np.max(np.abs(eta))) > 30.0:
        notes.append("possible separation in the logistic refit: |eta| exceeded 30")
    prob = np.clip(1.0 / (1.0 + np.exp(-np.clip(eta, -700, 700))), PROB_EPS, 1.0 - PROB_EPS)
    om = prob * (1.0 - prob)
    H = Z.T @ (Z * om[:, None])
    eye = np.eye(k)
    Hinv, _ = solve_spd(H, eye, names=names)
    B = Z.T @ (Z * ((y - prob) ** 2)[:, None])
    cov_sand = Hinv @ B @ Hinv
    return coef, Hinv, cov_sand, float(f0 / n), tuple(notes)


def post_refit(X, y, fit_or_support, family: str, *, w=None, keep=(),
               fit_intercept: bool = True, names=None) -> RefitResult:
    """Unpenalized refit on the selected columns.

    `fit_or_support` is either a LassoFit (its support is used) or an index
    collection. `keep` columns are always included. family is "logistic"
    (MLE by Newton-Raphson) or "linear" (weighted least squares; `w` are
    plain row weights multiplying squared residuals). Rank deficiency among
    the refit columns raises RankDeficiencyError naming them.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if family not in ("logistic", "linear"):
        raise ValueError(f"unknown family {family!r}")
    support = fit_or_support.support if isinstance(fit_or_support, LassoFit) else tuple(fit_or_support)
    cols = sorted({int(j) for j in support} | {int(j) for j in keep})
    for j in cols:
        if not 0 <= j < p:
            raise ValueError(f"refit column {j} out of range")
    k = len(cols) + (1 if fit_intercept else 0)
    if n < k:
        raise ValueError(f"refit needs at least {k} rows, have {n}")
    sub_names = [names[j] if names is not None else str(j) for j in cols]
    Z = X[:, cols] if cols else np.empty((n, 0))
    if fit_intercept:
        Z = np.column_stack([np.ones(n), Z])
        sub_names = ["(intercept)"] + sub_names

    if family == "logistic":
        uniq = np.unique(y)
        if not np.isin(uniq, (0.0, 1.0)).all():
            raise ValueError("outcome must be binary 0/1 for a logistic refit")
        sol, cov, cov_sand, loss, notes = _logit_mle(Z, y, names=sub_names)
    else:
        ww = np.ones(n) if w is None else np.asarray(w, dtype=float)
        sol = np.zeros(Z.shape[1])
        if Z.shape[1]:
            from .glm import wls_fit  # local import to avoid a cycle at module load
            sol = wls_fit(Z, y, ww, names=sub_names)
        resid = y - Z @ sol
        loss = float(np.mean(ww * resid * resid))
        cov = cov_sand = None
        notes = ()

    if fit_intercept:
        intercept = float(sol[0]) if sol.size else 0.0
        body = sol[1:]
    else:
        intercept = 0.0
        body = sol
    coef = np.zeros(p)
    coef[cols] = body
    return RefitResult(
        intercept=intercept,
        coef=coef,
        cols=tuple(cols),
        objective=loss,
        has_intercept=fit_intercept,
        cov=cov,
        cov_sandwich=cov_sand,
        warnings=tuple(notes),
    )
