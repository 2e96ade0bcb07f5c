"""Treatment-effect inference that is robust to imperfect model selection.

Two estimators share this module. `dml_logit` runs the three-step
instrumental scoring procedure for a binary outcome: a penalized logistic
fit of the outcome on treatment and controls (then refit) fixes the nuisance
index and produces observation weights; a penalized weighted regression of
the treatment on the controls (then refit) turns the treatment residual into
an orthogonalized instrument; the final step minimizes a self-normalized
score statistic in the treatment coefficient alone over a shrinking interval
around the first-step value. `dml_linear` is the double-selection analogue
for a continuous outcome: two penalized selections (outcome side and
treatment side), one unpenalized refit on the union, heteroskedasticity
robust standard errors.

`naive_logit` / `naive_linear` are the single-selection comparators (one
penalized selection with the treatment kept unpenalized, then a plain
refit). They are included to quantify what the orthogonalized procedures
buy; their confidence intervals are not selection-robust.

`dml_multi` fits each declared treatment in turn, moving the remaining
treatments into the control pool, optionally across worker threads. Results
are deterministic for a fixed seed regardless of the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import (
    DegenerateMomentError,
    DegenerateOutcomeError,
    DegenerateTreatmentError,
    WeakInstrumentError,
)
from .glm import link, link_deriv, solve_spd
from .lasso import (
    PenaltyConfig,
    cv_lambda,
    lasso_logistic,
    lasso_wls,
    logistic_lasso_loadings,
    plugin_lambda,
    post_refit,
    wls_lasso_loadings,
)

_SCALINGS = ("sqrt-sigma", "sigma")


@dataclass(frozen=True)
class DmlConfig:
    """Estimator settings shared by the fitting entry points.

    level is the significance level (0.05 gives 95% intervals). The
    instrument scaling divides the step-2 residual by sqrt(sigma_i) by
    default; "sigma" selects the v_i/sigma_i variant. search_width rescales
    the step-3 search interval, whose base radius is
    max(1/log n, 10 * pilot standard error).
    """

    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    level: float = 0.05
    instrument_scaling: str = "sqrt-sigma"
    penalize_treatment: bool = False
    search_width: float = 1.0
    grid_points: int = 401
    refine_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if self.instrument_scaling not in _SCALINGS:
            raise ValueError(f"instrument_scaling must be one of {_SCALINGS}")
        if self.search_width <= 0:
            raise ValueError("search_width must be positive")
        if self.grid_points < 3:
            raise ValueError("grid_points must be at least 3")
        if self.refine_tol <= 0:
            raise ValueError("refine_tol must be positive")

    def fingerprint(self) -> str:
        pen = self.penalty
        if pen.method == "plugin":
            pen_txt = f"plugin(c={pen.c:g})"
        else:
            pen_txt = f"cv(folds={pen.cv_folds},one_se={str(pen.one_se).lower()})"
        return (
            f"instrument={self.instrument_scaling};penalty={pen_txt};"
            f"grid={self.grid_points};level={self.level:g}"
        )


@dataclass(eq=False, frozen=True)
class NuisanceArtifacts:
    """Per-observation intermediates of the three-step logit procedure.

    Invariants: sigma2_hat lies in (0, 0.25] elementwise and
    f_hat = w_hat / sqrt(sigma2_hat).
    """

    eta_tilde: np.ndarray
    w_hat: np.ndarray
    sigma2_hat: np.ndarray
    f_hat: np.ndarray
    v_hat: np.ndarray
    z_hat: np.ndarray
    alpha_tilde: float
    intercept_tilde: float
    beta_tilde: np.ndarray
    theta_tilde: np.ndarray
    theta_intercept: float

    def __post_init__(self):
        if np.any(self.sigma2_hat <= 0.0) or np.any(self.sigma2_hat > 0.25):
            raise ValueError("sigma2_hat must lie in (0, 0.25]")
        if not np.allclose(self.f_hat * np.sqrt(self.sigma2_hat), self.w_hat,
                           rtol=1e-9, atol=1e-300):
            raise ValueError("f_hat must equal w_hat / sqrt(sigma2_hat)")
        for name in ("eta_tilde", "w_hat", "sigma2_hat", "f_hat", "v_hat",
                     "z_hat", "beta_tilde", "theta_tilde"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(eq=False, frozen=True)
class DmlEstimate:
    """One treatment coefficient with its inference and audit trail."""

    treatment: str
    family: str
    method: str
    n: int
    alpha: float
    std_error: float
    ci_low: float
    ci_high: float
    p_value: float
    level: float
    step1_support: tuple[str, ...]
    step2_support: tuple[str, ...]
    warnings: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)
    artifacts: NuisanceArtifacts | None = None


@dataclass(frozen=True)
class FitFailure:
    """Recorded in place of an estimate when one treatment's fit errors out."""

    treatment: str
    error: str
    message: str


def iv_logit_objective(alpha: float, y, d, eta_tilde, z) -> float:
    """Self-normalized squared score |mean[(y - G)z]|^2 / mean[(y - G)^2 z^2].

    Nonnegative; zero exactly when the numerator moment vanishes. Invariant
    under rescaling z by any nonzero constant. Raises when the denominator
    moment is numerically zero.
    """
    g = link(float(alpha) * d + eta_tilde)
    resid = y - g
    rz = resid * z
    num = float(np.mean(rz))
    den = float(np.mean(rz * rz))
    if not den > 1e-300:
        raise DegenerateMomentError(
            "denominator moment mean[(y - G)^2 z^2] is numerically zero"
        )
    return num * num / den


def _golden_min(fn, lo: float, hi: float, tol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def _as_fit_inputs(y, d, X):
    y = np.ascontiguousarray(y, dtype=float)
    d = np.ascontiguousarray(d, dtype=float)
    X = np.ascontiguousarray(X, dtype=float)
    if y.ndim != 1 or d.shape != y.shape:
        raise ValueError("y and d must be equal-length vectors")
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be a matrix with one row per observation")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(d)) and np.all(np.isfinite(X))):
        raise ValueError("inputs must be finite")
    return y, d, X


def _check_degenerate(y, d, family: str) -> None:
    if np.all(d == d[0]):
        raise DegenerateTreatmentError("treatment column is constant")
    if np.all(y == y[0]):
        raise DegenerateOutcomeError("outcome column is constant")
    if family == "logit" and not np.isin(np.unique(y), (0.0, 1.0)).all():
        raise ValueError("outcome must be binary 0/1 for the logit family")


def _names_for(X, names):
    if names is None:
        return tuple(f"x{j}" for j in range(X.shape[1]))
    names = tuple(str(s) for s in names)
    if len(names) != X.shape[1]:
        raise ValueError("names must match the number of control columns")
    return names


def _inference(alpha: float, se: float, level: float):
    q = float(norm.ppf(1.0 - level / 2.0))
    ci_low = alpha - q * se
    ci_high = alpha + q * se
    if se > 0:
        p = 2.0 * float(norm.sf(abs(alpha) / se))
    else:
        p = 1.0 if alpha == 0 else 0.0
    return q, ci_low, ci_high, p


def _pick_lambda(lam_pilot, loadings, Z, y, family, w, penalty, unpen, seed):
    if penalty.method == "plugin":
        return lam_pilot
    return cv_lambda(Z, y, family, w=w, loadings=loadings, config=penalty,
                     unpenalized=unpen, fit_intercept=True, seed=seed)


def dml_logit(y, d, X, *, names=None, treatment: str = "d",
              config: DmlConfig | None = None) -> DmlEstimate:
    """Three-step instrumental scoring for one binary-outcome treatment effect.

    Step 1 fits a penalized logistic regression of y on (d, X) and refits the
    selected columns without penalty, fixing the index eta_i and the weights
    w_i = G'(.), sigma2_i = G(.)(1 - G(.)), f_i = w_i / sqrt(sigma2_i).
    Step 2 fits a penalized weighted regression of d on X with weights f_i,
    refits, and forms the instrument from the weighted residual
    v_i = f_i (d_i - c - x_i.theta). Step 3 minimizes the self-normalized
    score over an interval centered at the step-1 coefficient and reads the
    standard error off the sandwich of the scoring moment.
    """
    cfg = config or DmlConfig()
    y, d, X = _as_fit_inputs(y, d, X)
    _check_degenerate(y, d, "logit")
    names = _names_for(X, names)
    n, p = X.shape
    penalty = cfg.penalty
    notes: list[str] = []

    # Step 1: outcome-side selection and refit.
    Z = np.column_stack([d, X])
    unpen1 = () if cfg.penalize_treatment else (0,)
    p_pen1 = p + (1 if cfg.penalize_treatment else 0)
    lam1_pilot = plugin_lambda(n, max(p_pen1, 1), penalty)
    load1 = logistic_lasso_loadings(Z, y, lam1_pilot,
                                    refinements=penalty.loading_refinements,
                                    unpenalized=unpen1)
    lam1 = _pick_lambda(lam1_pilot, load1, Z, y, "logistic", None, penalty,
                        unpen1, cfg.seed)
    fit1 = lasso_logistic(Z, y, lam1, load1, unpenalized=unpen1,
                          treatment_index=0)
    notes.extend(fit1.warnings)
    refit1 = post_refit(Z, y, fit1, "logistic", keep=(0,),
                        names=(treatment,) + names)
    notes.extend(refit1.warnings)
    alpha_tilde = float(refit1.coef[0])
    beta_tilde = refit1.coef[1:]
    eta_tilde = refit1.intercept + X @ beta_tilde
    step1_support = tuple(names[j - 1] for j in fit1.support)

    m = alpha_tilde * d + eta_tilde
    g1 = link(m)
    w_hat = link_deriv(m)
    sigma2 = g1 * (1.0 - g1)
    sigma = np.sqrt(sigma2)
    f_hat = w_hat / sigma

    # Pilot standard error for the search radius, from the refit sandwich.
    # Column 0 of Z is always first among the refit columns, so the
    # treatment sits right after the intercept in the covariance.
    se0 = float(np.sqrt(max(refit1.cov_sandwich[1, 1], 0.0)))

    # Step 2: treatment-side selection with weights f_hat.
    lam2_pilot = plugin_lambda(n, max(p, 1), penalty)
    load2 = wls_lasso_loadings(X, d, f_hat, lam2_pilot,
                               refinements=penalty.loading_refinements)
    lam2 = _pick_lambda(lam2_pilot, load2, X, d, "linear", f_hat, penalty,
                        (), cfg.seed)
    fit2 = lasso_wls(X, d, f_hat, lam2, load2)
    notes.extend(fit2.warnings)
    refit2 = post_refit(X, d, fit2, "linear", w=f_hat * f_hat, names=names)
    theta_tilde = refit2.coef
    resid2 = d - refit2.intercept - X @ theta_tilde
    v_hat = f_hat * resid2
    step2_support = tuple(names[j] for j in fit2.support)

    ref_scale = float(np.mean((f_hat * d) ** 2))
    if float(np.mean(v_hat * v_hat)) <= 1e-10 * max(ref_scale, 1e-300):
        z_dbg = v_hat / np.sqrt(sigma)
        raise WeakInstrumentError(float(np.mean(z_dbg * z_dbg)))

    if cfg.instrument_scaling == "sqrt-sigma":
        z_hat = v_hat / np.sqrt(sigma)
    else:
        z_hat = v_hat / sigma

    # Step 3: score minimization over a shrinking interval around alpha_tilde.
    radius = cfg.search_width * max(1.0 / math.log(n) if n > 1 else 1.0, 10.0 * se0)
    lo, hi = alpha_tilde - radius, alpha_tilde + radius

    def score(a: float) -> float:
        return iv_logit_objective(a, y, d, eta_tilde, z_hat)

    grid = np.linspace(lo, hi, cfg.grid_points)
    values = np.array([score(a) for a in grid])
    i_best = int(np.argmin(values))
    boundary_hit = i_best in (0, cfg.grid_points - 1)
    if boundary_hit:
        notes.append(
            "score minimizer sits on the search boundary; the interval may be misplaced"
        )
    bl = grid[max(i_best - 1, 0)]
    bh = grid[min(i_best + 1, cfg.grid_points - 1)]
    refined = _golden_min(score, bl, bh, cfg.refine_tol)
    candidates = [(float(values[i_best]), float(grid[i_best])), (score(refined), float(refined))]
    obj_check, alpha_check = min(candidates)
    grid_gap = obj_check - float(values.min())

    g3 = link(alpha_check * d + eta_tilde)
    resid3 = y - g3
    den = float(np.mean((resid3 * z_hat) ** 2))
    jac = float(np.mean(link_deriv(alpha_check * d + eta_tilde) * d * z_hat))
    if not den > 1e-300 or jac == 0.0:
        raise DegenerateMomentError(
            "variance moments of the scoring step are numerically degenerate"
        )
    sigma_n = math.sqrt(den) / abs(jac)
    se = sigma_n / math.sqrt(n)
    q, ci_low, ci_high, p_value = _inference(alpha_check, se, cfg.level)

    artifacts = NuisanceArtifacts(
        eta_tilde=eta_tilde, w_hat=w_hat, sigma2_hat=sigma2, f_hat=f_hat,
        v_hat=v_hat, z_hat=z_hat, alpha_tilde=alpha_tilde,
        intercept_tilde=float(refit1.intercept), beta_tilde=beta_tilde,
        theta_tilde=theta_tilde, theta_intercept=float(refit2.intercept),
    )
    orth_cols = refit2.cols
    orth_max = 0.0
    for j in orth_cols:
        xj = X[:, j]
        denom = math.sqrt(float(np.mean(v_hat * v_hat)) * float(np.mean((f_hat * xj) ** 2)))
        if denom > 0:
            orth_max = max(orth_max, abs(float(np.mean(v_hat * f_hat * xj))) / denom)
    diagnostics = {
        "lambda_step1": float(lam1),
        "lambda_step2": float(lam2),
        "search_lo": float(lo),
        "search_hi": float(hi),
        "search_radius": float(radius),
        "se_pilot": se0,
        "alpha_tilde": alpha_tilde,
        "objective_value": float(obj_check),
        "grid_gap": float(grid_gap),
        "boundary_hit": bool(boundary_hit),
        "weight_identity_err": float(np.max(np.abs(f_hat * f_hat * sigma2 - w_hat * w_hat))),
        "step2_orth_max": float(orth_max),
        "mean_z2": float(np.mean(z_hat * z_hat)),
        "ci_width_err": abs((ci_high - ci_low) - 2.0 * q * se),
        "w_hat_min": float(w_hat.min()),
        "w_hat_max": float(w_hat.max()),
        "w_hat_mean": float(w_hat.mean()),
    }
    return DmlEstimate(
        treatment=treatment, family="logit", method="dml", n=n,
        alpha=float(alpha_check), std_error=se, ci_low=ci_low, ci_high=ci_high,
        p_value=p_value, level=cfg.level,
        step1_support=step1_support, step2_support=step2_support,
        warnings=tuple(dict.fromkeys(notes)), diagnostics=diagnostics,
        artifacts=artifacts,
    )


def _hc1_cov(Z, resid):
    n, k = Z.shape
    ginv, _ = solve_spd(Z.T @ Z, np.eye(k))
    meat = (Z * (resid * resid)[:, None]).T @ Z
    scale = n / (n - k) if n > k else 1.0
    return ginv @ meat @ ginv * scale


def dml_linear(y, d, X, *, names=None, treatment: str = "d",
               config: DmlConfig | None = None) -> DmlEstimate:
    """Double selection for a continuous outcome.

    One penalized regression of y on X and one of d on X pick the controls;
    the treatment coefficient comes from an unpenalized regression of y on
    the treatment plus the union of both supports, with HC1 sandwich
    standard errors.
    """
    cfg = config or DmlConfig()
    y, d, X = _as_fit_inputs(y, d, X)
    _check_degenerate(y, d, "linear")
    names = _names_for(X, names)
    n, p = X.shape
    penalty = cfg.penalty
    ones = np.ones(n)
    notes: list[str] = []

    lam_pilot = plugin_lambda(n, max(p, 1), penalty)
    load_y = wls_lasso_loadings(X, y, ones, lam_pilot,
                                refinements=penalty.loading_refinements)
    lam_y = _pick_lambda(lam_pilot, load_y, X, y, "linear", ones, penalty, (), cfg.seed)
    fit_y = lasso_wls(X, y, ones, lam_y, load_y)
    notes.extend(fit_y.warnings)

    load_d = wls_lasso_loadings(X, d, ones, lam_pilot,
                                refinements=penalty.loading_refinements)
    lam_d = _pick_lambda(lam_pilot, load_d, X, d, "linear", ones, penalty, (), cfg.seed)
    fit_d = lasso_wls(X, d, ones, lam_d, load_d)
    notes.extend(fit_d.warnings)

    union = sorted(set(fit_y.support) | set(fit_d.support))
    Z = np.column_stack([ones, d, X[:, union]]) if union else np.column_stack([ones, d])
    sub_names = ["(intercept)", treatment] + [names[j] for j in union]
    coef, _ = solve_spd(Z.T @ Z, Z.T @ y, names=sub_names)
    resid = y - Z @ coef
    cov = _hc1_cov(Z, resid)
    alpha = float(coef[1])
    se = float(np.sqrt(max(cov[1, 1], 0.0)))
    q, ci_low, ci_high, p_value = _inference(alpha, se, cfg.level)
    diagnostics = {
        "lambda_outcome": float(lam_y),
        "lambda_treatment": float(lam_d),
        "union_size": len(union),
        "ci_width_err": abs((ci_high - ci_low) - 2.0 * q * se),
    }
    return DmlEstimate(
        treatment=treatment, family="linear", method="dml", n=n, alpha=alpha,
        std_error=se, ci_low=ci_low, ci_high=ci_high, p_value=p_value,
        level=cfg.level,
        step1_support=tuple(names[j] for j in fit_y.support),
        step2_support=tuple(names[j] for j in fit_d.support),
        warnings=tuple(dict.fromkeys(notes)), diagnostics=diagnostics,
    )


def naive_logit(y, d, X, *, names=None, treatment: str = "d",
                config: DmlConfig | None = None) -> DmlEstimate:
    """Single selection then an unpenalized logistic refit.

    The treatment stays unpenalized so it is always retained, but controls
    are chosen by one outcome regression only, and the reported standard
    error is the conventional observed-information one. Kept as the
    benchmark that the orthogonalized procedure is measured against.
    """
    cfg = config or DmlConfig()
    y, d, X = _as_fit_inputs(y, d, X)
    _check_degenerate(y, d, "logit")
    names = _names_for(X, names)
    n, p = X.shape
    penalty = cfg.penalty
    notes: list[str] = []

    Z = np.column_stack([d, X])
    lam_pilot = plugin_lambda(n, max(p, 1), penalty)
    load = logistic_lasso_loadings(Z, y, lam_pilot,
                                   refinements=penalty.loading_refinements,
                                   unpenalized=(0,))
    lam = _pick_lambda(lam_pilot, load, Z, y, "logistic", None, penalty, (0,), cfg.seed)
    fit = lasso_logistic(Z, y, lam, load, unpenalized=(0,), treatment_index=0)
    notes.extend(fit.warnings)
    refit = post_refit(Z, y, fit, "logistic", keep=(0,), names=(treatment,) + names)
    notes.extend(refit.warnings)
    alpha = float(refit.coef[0])
    se = float(np.sqrt(max(refit.cov[1, 1], 0.0)))
    q, ci_low, ci_high, p_value = _inference(alpha, se, cfg.level)
    support = tuple(names[j - 1] for j in fit.support)
    diagnostics = {
        "lambda": float(lam),
        "ci_width_err": abs((ci_high - ci_low) - 2.0 * q * se),
    }
    return DmlEstimate(
        treatment=treatment, family="logit", method="naive", n=n, alpha=alpha,
        std_error=se, ci_low=ci_low, ci_high=ci_high, p_value=p_value,
        level=cfg.level, step1_support=support, step2_support=(),
        warnings=tuple(dict.fromkeys(notes)), diagnostics=diagnostics,
    )


def naive_linear(y, d, X, *, names=None, treatment: str = "d",
                 config: DmlConfig | None = None) -> DmlEstimate:
    """Single selection then ordinary least squares with HC1 errors."""
    cfg = config or DmlConfig()
    y, d, X = _as_fit_inputs(y, d, X)
    _check_degenerate(y, d, "linear")
    names = _names_for(X, names)
    n, p = X.shape
    penalty = cfg.penalty
    ones = np.ones(n)
    notes: list[str] = []

    Z = np.column_stack([d, X])
    lam_pilot = plugin_lambda(n, max(p, 1), penalty)
    load = wls_lasso_loadings(Z, y, ones, lam_pilot,
                              refinements=penalty.loading_refinements,
                              unpenalized=(0,))
    lam = _pick_lambda(lam_pilot, load, Z, y, "linear", ones, penalty, (0,), cfg.seed)
    fit = lasso_wls(Z, y, ones, lam, load, unpenalized=(0,), treatment_index=0)
    notes.extend(fit.warnings)
    cols = [0] + [j for j in fit.support]
    Zr = np.column_stack([ones, Z[:, cols]])
    sub_names = ["(intercept)", treatment] + [names[j - 1] for j in fit.support]
    coef, _ = solve_spd(Zr.T @ Zr, Zr.T @ y, names=sub_names)
    resid = y - Zr @ coef
    cov = _hc1_cov(Zr, resid)
    alpha = float(coef[1])
    se = float(np.sqrt(max(cov[1, 1], 0.0)))
    q, ci_low, ci_high, p_value = _inference(alpha, se, cfg.level)
    support = tuple(names[j - 1] for j in fit.support)
    diagnostics = {
        "lambda": float(lam),
        "ci_width_err": abs((ci_high - ci_low) - 2.0 * q * se),
    }
    return DmlEstimate(
        treatment=treatment, family="linear", method="naive", n=n, alpha=alpha,
        std_error=se, ci_low=ci_low, ci_high=ci_high, p_value=p_value,
        level=cfg.level, step1_support=support, step2_support=(),
        warnings=tuple(dict.fromkeys(notes)), diagnostics=diagnostics,
    )


_FITTERS = {
    ("logit", "dml"): dml_logit,
    ("logit", "naive"): naive_logit,
    ("linear", "dml"): dml_linear,
    ("linear", "naive"): naive_linear,
}


def dml_multi(dataset, *, family: str = "logit", method: str = "dml",
              treatments=None, config: DmlConfig | None = None,
              fail_fast: bool = False, jobs: int = 1):
    """Fit every requested treatment of a Dataset, one coefficient per row.

    For each treatment the remaining treatment columns join the controls, so
    single-treatment fits are a special case. Failures become FitFailure
    records unless fail_fast is set. jobs > 1 fans the per-treatment fits
    out to threads; the result order and values do not depend on jobs.
    """
    fitter = _FITTERS.get((family, method))
    if fitter is None:
        raise ValueError(f"unknown family/method pair ({family!r}, {method!r})")
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    wanted = tuple(treatments) if treatments is not None else dataset.treatment_names
    if not wanted:
        raise ValueError("no treatment columns to fit")
    if len(set(wanted)) != len(wanted):
        raise ValueError("treatment list contains duplicates")
    all_names = dataset.column_names
    for t in wanted:
        dataset.index_of(t)

    def fit_one(t: str):
        ti = dataset.index_of(t)
        keep = [j for j in range(dataset.p) if j != ti]
        d = dataset.design[:, ti]
        X = dataset.design[:, keep]
        names = tuple(all_names[j] for j in keep)
        try:
            return fitter(dataset.y, d, X, names=names, treatment=t, config=config)
        except Exception as exc:
            if fail_fast:
                raise
            return FitFailure(treatment=t, error=type(exc).__name__, message=str(exc))

    if jobs == 1 or len(wanted) == 1:
        return tuple(fit_one(t) for t in wanted)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return tuple(pool.map(fit_one, wanted))
