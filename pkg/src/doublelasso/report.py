"""Plain-text rendering of fit results and coverage reports.

Three formats share one row model. "aligned" is the human table (fixed
decimals, padded columns), "tsv" is tab-delimited with full-precision
repr floats for machines, and "structured" is a round-trippable YAML
document. Warnings collected from the fitted rows are printed verbatim
exactly once each in the aligned and tsv renderings; rows keep a marker
column so the origin stays visible. p-values are per-treatment and no
multiple-testing adjustment is applied, which the output says explicitly.
"""

from __future__ import annotations

import yaml

from .dml import DmlEstimate, FitFailure

REPORT_VERSION = 1
MULTIPLICITY_NOTE = "p-values are per-treatment and unadjusted for multiple testing"
_FORMATS = ("aligned", "tsv", "structured")


def _check_format(fmt: str) -> None:
    if fmt not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {fmt!r}")


def percent_labels(level: float) -> tuple[str, str]:
    """Interval column headers for a significance level, e.g. 2.5% / 97.5%."""
    lo = 100.0 * (level / 2.0)
    hi = 100.0 * (1.0 - level / 2.0)
    return f"{lo:g}%", f"{hi:g}%"


def _aligned(headers, rows, aligns) -> list[str]:
    widths = [len(h) for h in headers]
    for row in rows:
        for j, cell in enumerate(row):
            widths[j] = max(widths[j], len(cell))
    out = []
    for row in [list(headers)] + [list(r) for r in rows]:
        cells = [
            cell.ljust(widths[j]) if aligns[j] == "<" else cell.rjust(widths[j])
            for j, cell in enumerate(row)
        ]
        out.append("  ".join(cells).rstrip())
    return out


def _ordered_unique(items) -> list[str]:
    return list(dict.fromkeys(items))


def render_fit_results(results, *, level: float, fmt: str = "aligned",
                       decimals: int = 3) -> str:
    """One row per treatment: Coefficient, p-value, interval bounds, SE.

    `results` is the dml_multi output (estimates and failures in request
    order). Aligned output appends the shared warnings and any failures
    below the table; tsv keeps machine full precision and carries the same
    extras as comment lines; structured is YAML.
    """
    _check_format(fmt)
    if decimals < 0:
        raise ValueError("decimals must be nonnegative")
    lo_lab, hi_lab = percent_labels(level)
    estimates = [r for r in results if isinstance(r, DmlEstimate)]
    failures = [r for r in results if isinstance(r, FitFailure)]
    all_warnings = _ordered_unique(w for e in estimates for w in e.warnings)

    if fmt == "structured":
        doc = {
            "version": REPORT_VERSION,
            "level": level,
            "note": MULTIPLICITY_NOTE,
            "rows": [
                {
                    "treatment": e.treatment,
                    "method": e.method,
                    "family": e.family,
                    "n": e.n,
                    "coefficient": float(e.alpha),
                    "std_error": float(e.std_error),
                    "p_value": float(e.p_value),
                    "ci_low": float(e.ci_low),
                    "ci_high": float(e.ci_high),
                    "support1": len(e.step1_support),
                    "support2": len(e.step2_support),
                    "warnings": list(e.warnings),
                }
                for e in estimates
            ],
            "failures": [
                {"treatment": f.treatment, "error": f.error, "message": f.message}
                for f in failures
            ],
        }
        return yaml.safe_dump(doc, sort_keys=False)

    def num(v: float) -> str:
        return repr(float(v)) if fmt == "tsv" else f"{v:.{decimals}f}"

    headers = ("Treatment", "Coefficient", "p-value", lo_lab, hi_lab,
               "Std. Error", "Support1", "Support2", "Warn")
    rows = [
        (
            e.treatment, num(e.alpha), num(e.p_value), num(e.ci_low),
            num(e.ci_high), num(e.std_error), str(len(e.step1_support)),
            str(len(e.step2_support)), "*" if e.warnings else "",
        )
        for e in estimates
    ]

    lines: list[str]
    if fmt == "tsv":
        lines = ["\t".join(headers)]
        lines += ["\t".join(r) for r in rows]
        lines.append(f"# note: {MULTIPLICITY_NOTE}")
        lines += [f"# warning: {w}" for w in all_warnings]
        lines += [f"# failed: {f.treatment}: {f.error}: {f.message}" for f in failures]
    else:
        aligns = ("<", ">", ">", ">", ">", ">", ">", ">", "<")
        lines = _aligned(headers, rows, aligns)
        lines.append("")
        lines.append(f"Note: {MULTIPLICITY_NOTE}.")
        if all_warnings:
            lines.append("Warnings:")
            lines += [f"  - {w}" for w in all_warnings]
        if failures:
            lines.append("Failures:")
            lines += [f"  - {f.treatment}: {f.error}: {f.message}" for f in failures]
    return "\n".join(lines) + "\n"


def render_coverage_reports(reports, *, fmt: str = "aligned",
                            decimals: int = 3) -> str:
    """One row per method: bias, spread, coverage, width, rejection rate."""
    _check_format(fmt)
    if decimals < 0:
        raise ValueError("decimals must be nonnegative")
    reports = list(reports)

    if fmt == "structured":
        from .simulate import coverage_reports_to_yaml

        return coverage_reports_to_yaml(reports)

    def num(v: float) -> str:
        return repr(float(v)) if fmt == "tsv" else f"{v:.{decimals}f}"

    headers = ("Method", "Reps", "OK", "Fail", "Mean Bias", "Median Bias",
               "SD", "Mean SE", "Coverage", "CI Width", "Reject")
    rows = [
        (
            r.method, str(r.reps), str(r.successes), str(r.failures),
            num(r.mean_bias), num(r.median_bias), num(r.sd), num(r.mean_se),
            num(r.coverage), num(r.mean_ci_width), num(r.rejection_rate),
        )
        for r in reports
    ]
    reasons = _ordered_unique(s for r in reports for s in r.failure_reasons)
    if fmt == "tsv":
        lines = ["\t".join(headers)]
        lines += ["\t".join(r) for r in rows]
        lines += [f"# failure: {s}" for s in reasons]
    else:
        aligns = ("<",) + (">",) * 10
        lines = _aligned(headers, rows, aligns)
        if reasons:
            lines.append("")
            lines.append("Failures:")
            lines += [f"  - {s}" for s in reasons]
    return "\n".join(lines) + "\n"
