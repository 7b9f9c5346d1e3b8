"""Report assembly and rendering.

One run produces one :class:`ReportBundle`: a nested key-value document
holding every estimate at full precision, serialized as deterministic JSON
(no timestamps, sorted keys), plus a fixed-width text rendering that prints
three decimals and renders an undefined standard error as ``(.)``. Every
number in the text table is present in the machine-readable document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .bounds import BoundsResult
from .diagnostics import MoverTestReport, SignCheckReport
from .estimands import REPORT_ORDER, ComplierShares, EstimateWithSE
from .regression import TestResult
from .verify import VerificationReport

UNDEFINED_SE = "(.)"


def fmt(value: float | None, decimals: int = 3) -> str:
    if value is None:
        return "."
    return f"{value + 0.0:.{decimals}f}"


def fmt_se(se: float | None, decimals: int = 3) -> str:
    if se is None:
        return UNDEFINED_SE
    return f"({se + 0.0:.{decimals}f})"


def cell(est: EstimateWithSE) -> dict:
    return {
        "value": float(est.value),
        "se": None if est.se is None else float(est.se),
        "ci_low": None if est.ci_low is None else float(est.ci_low),
        "ci_high": None if est.ci_high is None else float(est.ci_high),
        "n": est.n,
        "cluster_count": est.cluster_count,
        "definition": est.definition,
    }


def test_dict(test: TestResult | None) -> dict | None:
    if test is None:
        return None
    return {"statistic": float(test.statistic), "dof": test.dof,
            "p_value": float(test.p_value), "kind": test.kind}


@dataclass
class ReportBundle:
    """All outputs of one command, serializable and deterministic."""

    command: str
    metadata: dict
    estimates: dict | None = None
    shares: dict | None = None
    diagnostics: dict | None = None
    bounds: dict | None = None
    verification: dict | None = None
    simulation: dict | None = None
    warnings: list = field(default_factory=list)
    text: str = ""

    def to_dict(self) -> dict:
        payload = {"command": self.command, "metadata": self.metadata,
                   "warnings": list(self.warnings)}
        for key in ("estimates", "shares", "diagnostics", "bounds",
                    "verification", "simulation"):
            value = getattr(self, key)
            if value is not None:
                payload[key] = value
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def shares_dict(shares: ComplierShares) -> dict:
    return {
        "p_full": cell(shares.p_full),
        "p_dropout": cell(shares.p_dropout),
        "p_late_adopter": cell(shares.p_late_adopter),
        "warnings": list(shares.warnings),
    }


def mover_test_dict(report: MoverTestReport) -> dict:
    def pair(step):
        if step is None:
            return None
        return {"or_minus_d2": cell(step.or_minus_d2),
                "and_minus_d2": cell(step.and_minus_d2),
                "joint": test_dict(step.joint)}
    return {
        "level": report.level,
        "conclusion": report.conclusion,
        "method": report.method,
        "caveat": report.caveat,
        "degenerate": list(report.degenerate),
        "recommendation": report.recommendation,
        "step1": pair(report.step1),
        "step2": pair(report.step2),
    }


def sign_check_dict(report: SignCheckReport) -> dict:
    return {
        "level": report.level,
        "verdict": report.verdict,
        "or_minus_d2": cell(report.or_minus_d2),
        "and_minus_d2": cell(report.and_minus_d2),
        "one_sided_p": [None if p is None else float(p) for p in report.one_sided_p],
    }


def bounds_dict(result: BoundsResult) -> dict:
    payload = {
        "kind": result.kind,
        "lower": cell(result.lower),
        "upper": cell(result.upper),
        "assumptions": list(result.assumptions),
        "warnings": list(result.warnings),
        "flipped": result.flipped,
    }
    if result.ymin is not None:
        payload["ymin"] = float(result.ymin)
        payload["ymax"] = float(result.ymax)
    if result.maximizer is not None:
        payload["maximizer"] = result.maximizer
    return payload


def verification_dict(report: VerificationReport) -> dict:
    return {
        "tolerance": report.tolerance,
        "all_passed": report.all_passed,
        "clean": report.clean,
        "flags": list(report.flags),
        "checks": [
            {"name": c.name, "applicable": c.applicable, "passed": c.passed,
             "lhs": c.lhs, "rhs": c.rhs, "note": c.note}
            for c in report.checks
        ],
    }


# ---------------------------------------------------------------------------
# text rendering

_COL = 10
_LABELW = 16


def _row(label: str, entries) -> str:
    return label.ljust(_LABELW) + "".join(str(e).rjust(_COL) for e in entries)


def render_estimates(estimates: dict, shares: dict | None) -> str:
    order = [d.value for d in REPORT_ORDER]
    labels = {"d_sum": "D1+D2", "d1": "D1", "d2": "D2",
              "d_and": "D∧", "d_or": "D∨"}
    lines = []
    header = _row("", [labels[k] for k in order])
    lines.append(header)
    for section, title in (("first_stage", "first stage"), ("iv_estimand", "IV estimand")):
        cells = estimates[section]
        lines.append(_row(title, [fmt(cells[k]["value"]) for k in order]))
        lines.append(_row("", [fmt_se(cells[k]["se"]) for k in order]))
    rf = estimates["reduced_form"]
    lines.append(_row("reduced form", [fmt(rf["value"])]))
    lines.append(_row("", [fmt_se(rf["se"])]))
    if shares is not None:
        lines.append("")
        lines.append("complier shares (assume the double exclusion restriction):")
        for key, name in (("p_full", "P[C1,C2]"), ("p_dropout", "P[C1,N2]"),
                          ("p_late_adopter", "P[C1,A2]")):
            c = shares[key]
            lines.append(f"  {name}  {fmt(c['value'])} {fmt_se(c['se'])}"
                         f"   [{c['definition']} on Z]")
    return "\n".join(lines)


def _render_joint(name: str, joint: dict | None) -> str:
    if joint is None:
        return f"{name}: no testable contrast (all regressands constant)"
    return (f"{name}: chi2({joint['dof']}) = {fmt(joint['statistic'])}, "
            f"p = {joint['p_value']:.4g}")


def render_diagnostics(diagnostics: dict) -> str:
    mover = diagnostics["mover_test"]
    sign = diagnostics["double_exclusion"]
    lines = [f"mover test (level {mover['level']:g})"]
    step1 = mover["step1"]
    for key, label in (("or_minus_d2", "D∨−D2"),
                       ("and_minus_d2", "D∧−D2")):
        c = step1[key]
        lines.append(f"  {label:<12} {fmt(c['value'])} {fmt_se(c['se'])}")
    lines.append("  " + _render_joint("step 1 joint", step1["joint"]))
    if mover["step2"] is not None:
        step2 = mover["step2"]
        for key, label in (("or_minus_d2", "(D∨−D2)Y"),
                           ("and_minus_d2", "(D∧−D2)Y")):
            c = step2[key]
            lines.append(f"  {label:<12} {fmt(c['value'])} {fmt_se(c['se'])}")
        lines.append("  " + _render_joint("step 2 joint", step2["joint"]))
    lines.append(f"  conclusion: {mover['conclusion']}")
    if mover["degenerate"]:
        lines.append(f"  degenerate contrasts: {', '.join(mover['degenerate'])}"
                     " (joint dof reduced)")
    if mover["recommendation"]:
        lines.append(f"  {mover['recommendation']}")
    lines.append(f"  caveat: {mover['caveat']}")
    lines.append("")
    lines.append(f"double exclusion sign check (level {sign['level']:g})")
    for key, p in zip(("or_minus_d2", "and_minus_d2"), sign["one_sided_p"]):
        c = sign[key]
        ptxt = "p = ." if p is None else f"p = {p:.4g}"
        lines.append(f"  {c['definition']:<12} {fmt(c['value'])} {fmt_se(c['se'])}  "
                     f"one-sided {ptxt}")
    lines.append(f"  verdict: {sign['verdict']}")
    return "\n".join(lines)


def render_bounds(bounds: dict) -> str:
    lines = []
    for key, title in (("theorem1", "sharp LAFTE bounds"),
                       ("bounded_response", "bounded-response LAFTE bounds"),
                       ("tau", "weighted-average-effect (tau) bounds")):
        if key not in bounds:
            continue
        b = bounds[key]
        lo, hi = b["lower"], b["upper"]
        extra = ""
        if "ymin" in b:
            extra = f"  (ymin={b['ymin']:g}, ymax={b['ymax']:g})"
        if b.get("maximizer"):
            extra = f"  (largest first stage: {b['maximizer']})"
        lines.append(f"{title}{extra}")
        lines.append(f"  lower  {fmt(lo['value'])} {fmt_se(lo['se'])}   "
                     f"95% CI [{fmt(lo['ci_low'])}, {fmt(lo['ci_high'])}]")
        lines.append(f"  upper  {fmt(hi['value'])} {fmt_se(hi['se'])}   "
                     f"95% CI [{fmt(hi['ci_low'])}, {fmt(hi['ci_high'])}]")
        for w in b["warnings"]:
            lines.append(f"  warning: {w}")
        lines.append("")
    return "\n".join(lines).rstrip()


def render_verification(verification: dict) -> str:
    lines = [f"identity checks (tolerance {verification['tolerance']:g})"]
    for c in verification["checks"]:
        if not c["applicable"]:
            status = " n/a "
            detail = c["note"]
        else:
            status = "PASS " if c["passed"] else "FAIL "
            detail = f"lhs={c['lhs']:.12g} rhs={c['rhs']:.12g}"
            if c["note"]:
                detail += f"  ({c['note']})"
        lines.append(f"  [{status}] {c['name']:<42} {detail}")
    for flag in verification["flags"]:
        lines.append(f"  [FLAG ] {flag}")
    lines.append("all applicable checks passed"
                 if verification["all_passed"] else
                 f"{sum(1 for c in verification['checks'] if c['applicable'] and not c['passed'])}"
                 " check(s) failed")
    return "\n".join(lines)
