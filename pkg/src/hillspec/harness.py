"""End-to-end checks of the inverse-problem characterizations.

Each check measures residuals; verdicts are recomputed from those residuals
and the tolerance ladder below, so a report can be audited from its numbers
alone.  Verdicts are ``consistent``, ``violated`` or ``inconclusive``.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, ode
from .ode import DEFAULT_CONFIG, IntegratorConfig
from .potential import EXTENSION_MODES, ConditionReport, PotentialSpec, condition_report, construct_from_q2
from .spectra import (Eigenvalue, SearchRegion, SpectrumReport, default_region, find_eigenvalues,
                      normalize_half_neumann)

TOLERANCES = {
    "integration": 1e-10,
    "roots": 1e-8,
    "identities": 1e-6,
    "verdicts": 1e-5,
}
ZERO_MU = 1e-6

CONSISTENT, VIOLATED, INCONCLUSIVE = "consistent", "violated", "inconclusive"


def workers() -> int:
    try:
        return max(1, int(os.environ.get("HILLSPEC_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    n = min(workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def default_mu_grid() -> np.ndarray:
    """8 real points in [0, 100] and 8 points on |mu| = 20 at equal angles."""
    real = np.linspace(0.0, 100.0, 8).astype(complex)
    circle = 20.0 * np.exp(2j * np.pi * np.arange(8) / 8)
    return np.concatenate([real, circle])


# -- identity checks --------------------------------------------------------------

def identity_residual_B(q_normalized: PotentialSpec, mu_grid=None, cfg: IntegratorConfig = DEFAULT_CONFIG):
    """max |c'(x) + mu s(x)| over the mu-grid at x = 1/2 and x = 3/2."""
    mus = default_mu_grid() if mu_grid is None else np.atleast_1d(np.asarray(mu_grid, dtype=complex))
    half, three = ode.trajectory(q_normalized, mus, 0.0, [0.5, 1.5], cfg)
    return (float(np.max(np.abs(half.cp + mus * half.s))),
            float(np.max(np.abs(three.cp + mus * three.s))))


def identity_residual_sym(q: PotentialSpec, mu_grid=None, cfg: IntegratorConfig = DEFAULT_CONFIG):
    """max |c(x) - s'(x)| over the mu-grid at x = 1/2 and x = 3/2."""
    mus = default_mu_grid() if mu_grid is None else np.atleast_1d(np.asarray(mu_grid, dtype=complex))
    half, three = ode.trajectory(q, mus, 0.0, [0.5, 1.5], cfg)
    return (float(np.max(np.abs(half.c - half.sp))),
            float(np.max(np.abs(three.c - three.sp))))


@dataclass(frozen=True)
class FactorizationRow:
    mu: complex
    s_at_1: float
    premise_met: bool
    residual: float | None


def monodromy_factorization_check(q: PotentialSpec, cfg: IntegratorConfig = DEFAULT_CONFIG,
                                  region: SearchRegion | None = None, tol: float = TOLERANCES["identities"],
                                  n_x: int = 9, neumann: SpectrumReport | None = None) -> list[FactorizationRow]:
    """At zeros of c'(1) where also s(1) = 0: c(x+1) = c(1) c(x) and s(x+1) = s'(1) s(x)."""
    rep = neumann or find_eigenvalues(q, "N", region or default_region(q), cfg)
    xs = np.linspace(0.0, 1.0, n_x)
    rows = []
    for e in rep.eigenvalues:
        m1 = ode.monodromy(q, e.mu, cfg)
        s1 = abs(m1.s)
        if s1 >= tol:
            rows.append(FactorizationRow(e.mu, s1, False, None))
            continue
        states = ode.trajectory(q, e.mu, 0.0, list(xs) + list(xs[1:] + 1.0), cfg)
        lo = states[: len(xs)]
        hi = [m1] + states[len(xs):]
        res = 0.0
        for a, b in zip(lo, hi):
            res = max(res, abs(b.c - m1.c * a.c), abs(b.s - m1.sp * a.s))
        rows.append(FactorizationRow(e.mu, s1, True, float(res)))
    return rows


def product_identity_check(q: PotentialSpec, cfg: IntegratorConfig = DEFAULT_CONFIG,
                           rows: list[FactorizationRow] | None = None, **kwargs) -> list[tuple[complex, float, float]]:
    """(mu_n, |s'(1) c(1) - 1|, |s'(1) - c(1)|) at the qualifying zeros of c'(1)."""
    rows = monodromy_factorization_check(q, cfg, **kwargs) if rows is None else rows
    out = []
    for r in rows:
        if not r.premise_met:
            continue
        m = ode.monodromy(q, r.mu, cfg)
        out.append((r.mu, float(abs(m.sp * m.c - 1.0)), float(abs(m.sp - m.c))))
    return out


# -- spectra comparison -------------------------------------------------------------

@dataclass(frozen=True)
class SpectraMatch:
    tag_a: str
    tag_b: str
    distance: float
    count_a: int
    count_b: int
    complete: bool

    @property
    def cardinality_ok(self) -> bool:
        return self.count_a == self.count_b


def match_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Greedy closest-pair matching; +inf on a cardinality mismatch."""
    a, b = list(a), list(b)
    if len(a) != len(b):
        return math.inf
    worst = 0.0
    while a:
        d = np.abs(np.subtract.outer(np.array(a), np.array(b)))
        i, j = np.unravel_index(int(np.argmin(d)), d.shape)
        worst = max(worst, float(d[i, j]))
        a.pop(i)
        b.pop(j)
    return worst


def _drop_zero(mus: np.ndarray) -> np.ndarray:
    return mus[np.abs(mus) >= ZERO_MU]


def spectra_equal(q: PotentialSpec, tag_a: str, tag_b: str, region: SearchRegion | None = None,
                  exclude_zero: bool = False, cfg: IntegratorConfig = DEFAULT_CONFIG,
                  reports: tuple[SpectrumReport, SpectrumReport] | None = None) -> SpectraMatch:
    region = region or default_region(q)
    ra, rb = reports or _pmap(lambda t: find_eigenvalues(q, t, region, cfg), [tag_a, tag_b])
    a, b = ra.mus, rb.mus
    if exclude_zero:
        a, b = _drop_zero(a), _drop_zero(b)
    return SpectraMatch(tag_a, tag_b, match_distance(a, b), len(a), len(b), ra.complete and rb.complete)


# -- report ------------------------------------------------------------------------------

@dataclass
class Verdict:
    verdict: str
    explanation: str

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "explanation": self.explanation}


@dataclass
class VerificationReport:
    potential_id: str
    condition_report: ConditionReport
    normalized_condition_report: ConditionReport | None = None
    normalization_shift: complex = 0j
    identity_residuals: dict[str, float] = field(default_factory=dict)
    spectra_matches: dict[str, SpectraMatch] = field(default_factory=dict)
    doubleness_summary: list[dict] = field(default_factory=list)
    verdict_per_theorem: dict[str, Verdict] = field(default_factory=dict)
    header: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "header": self.header,
            "potential_id": self.potential_id,
            "condition_report": self.condition_report.to_dict(),
            "normalization": {
                "shift": _cplx(self.normalization_shift),
                "condition_report": (self.normalized_condition_report.to_dict()
                                     if self.normalized_condition_report else None),
            },
            "identities": dict(sorted(self.identity_residuals.items())),
            "spectra_matches": {
                k: {"tags": [m.tag_a, m.tag_b], "distance": _num(m.distance), "counts": [m.count_a, m.count_b],
                    "complete": m.complete}
                for k, m in sorted(self.spectra_matches.items())
            },
            "doubleness": self.doubleness_summary,
            "verdicts": {k: v.to_dict() for k, v in sorted(self.verdict_per_theorem.items())},
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)

    def summary(self) -> str:
        lines = [f"potential: {self.potential_id}"]
        c = self.condition_report
        lines.append(f"conditions ({c.norm_used}, tol {c.tolerance:.1e}): B={c.residual_B:.3e} "
                     f"BB={c.residual_BB:.3e} sym_half={c.residual_sym_half:.3e} sym_unit={c.residual_sym_unit:.3e}")
        if self.normalization_shift:
            lines.append(f"half-interval Neumann shift: {self.normalization_shift:.12g}")
        for k, v in sorted(self.identity_residuals.items()):
            lines.append(f"identity {k}: {v:.3e}")
        for k, m in sorted(self.spectra_matches.items()):
            lines.append(f"match {k}: distance {m.distance:.3e} ({m.count_a} vs {m.count_b})")
        for d in self.doubleness_summary:
            lines.append(f"  {d['tag']:>2} mu={d['mu'][0]:.10g}{d['mu'][1]:+.3e}i order={d['algebraic_order']} "
                         f"mult={d['geometric_multiplicity']} res={d['monodromy_residual']:.2e}"
                         + (" lowest" if d["is_lowest"] else ""))
        for k, v in sorted(self.verdict_per_theorem.items()):
            lines.append(f"{k}: {v.verdict} - {v.explanation}")
        return "\n".join(lines)


def _cplx(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _num(x: float):
    return x if math.isfinite(x) else "inf"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return _cplx(complex(obj))
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else "inf"
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def config_hash(q: PotentialSpec, region: SearchRegion, cfg: IntegratorConfig) -> str:
    blob = json.dumps({"q": q.to_dict(), "region": list(region.bounds), "cfg": vars(cfg)},
                      sort_keys=True, default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_header(q: PotentialSpec, region: SearchRegion, cfg: IntegratorConfig) -> dict:
    return {
        "tool": "hillspec",
        "version": __version__,
        "config_hash": config_hash(q, region, cfg),
        "tolerances": dict(TOLERANCES, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol),
    }


def _doubleness_rows(reports: list[SpectrumReport]) -> list[dict]:
    rows = []
    for rep in reports:
        for e in rep.eigenvalues:
            rows.append({
                "tag": e.tag,
                "mu": _cplx(e.mu),
                "algebraic_order": e.algebraic_order,
                "geometric_multiplicity": e.geometric_multiplicity,
                "monodromy_residual": e.monodromy_residual,
                "char_residual": e.char_residual,
                "cluster_width": e.cluster_width,
                "is_lowest": e.is_lowest,
            })
    return rows


def theorem_1_3_verdict(conditions_hold: bool, p: SpectrumReport, ap: SpectrumReport) -> Verdict:
    """Doubleness of all non-lowest P and all AP eigenvalues versus the conditions."""
    judged: list[Eigenvalue] = [e for e in p.eigenvalues if not e.is_lowest] + list(ap.eigenvalues)
    simple = [e for e in judged if e.geometric_multiplicity == 1]
    clear_simple = [e for e in simple if e.algebraic_order == 1]
    ambiguous = [e for e in simple if e.algebraic_order == 2]
    incomplete = not (p.complete and ap.complete)
    if conditions_hold:
        if clear_simple:
            return Verdict(VIOLATED, f"conditions hold but {len(clear_simple)} non-lowest eigenvalue(s) are "
                                     f"simple, first at mu={clear_simple[0].mu:.10g}")
        if ambiguous:
            return Verdict(VIOLATED, f"conditions hold but {len(ambiguous)} algebraically double eigenvalue(s) "
                                     f"have geometric multiplicity 1, first at mu={ambiguous[0].mu:.10g}")
        if incomplete:
            return Verdict(INCONCLUSIVE, "unresolved search boxes; doubleness not established")
        if not judged:
            return Verdict(INCONCLUSIVE, "no non-lowest P/AP eigenvalues in the search region")
        return Verdict(CONSISTENT, f"conditions hold and all {len(judged)} judged eigenvalues are double")
    if clear_simple:
        return Verdict(CONSISTENT, f"conditions fail and a simple eigenvalue exists at mu={clear_simple[0].mu:.10g}")
    if ambiguous or incomplete:
        return Verdict(INCONCLUSIVE, "conditions fail; only near-double or unresolved eigenvalues found")
    if not judged:
        return Verdict(INCONCLUSIVE, "no non-lowest P/AP eigenvalues in the search region")
    return Verdict(VIOLATED, f"conditions fail but all {len(judged)} judged eigenvalues are double")


def theorem_1_3_either_verdict(conditions_hold: bool, p: SpectrumReport, ap: SpectrumReport) -> Verdict:
    """The weaker reading: non-lowest P doubleness or AP doubleness, judged per side."""
    sides = {"P": [e for e in p.eigenvalues if not e.is_lowest], "AP": list(ap.eigenvalues)}
    complete = {"P": p.complete, "AP": ap.complete}
    simple = {t: [e for e in eigs if e.geometric_multiplicity == 1] for t, eigs in sides.items()}
    clear = {t: [e for e in v if e.algebraic_order == 1] for t, v in simple.items()}
    double_sides = [t for t in sides if sides[t] and complete[t] and not simple[t]]
    if conditions_hold:
        if double_sides:
            return Verdict(CONSISTENT, f"conditions hold and every judged {'/'.join(double_sides)} eigenvalue is double")
        if all(clear.values()) or all(simple.values()):
            return Verdict(VIOLATED, "conditions hold but both P and AP carry simple eigenvalues")
        return Verdict(INCONCLUSIVE, "unresolved search boxes or empty sides")
    if all(clear.values()):
        return Verdict(CONSISTENT, "conditions fail and both P and AP carry simple eigenvalues")
    if double_sides:
        return Verdict(VIOLATED, f"conditions fail but every judged {'/'.join(double_sides)} eigenvalue is double")
    return Verdict(INCONCLUSIVE, "conditions fail; only near-double or unresolved eigenvalues found")


def doubleness_report(q: PotentialSpec, region: SearchRegion | None = None, cfg: IntegratorConfig = DEFAULT_CONFIG,
                      potential_id: str | None = None) -> VerificationReport:
    """P/AP spectra with multiplicities and the doubleness verdict."""
    region = region or default_region(q)
    rep = _base_report(q, region, cfg, potential_id)
    p, ap = _pmap(lambda t: find_eigenvalues(q, t, region, cfg), ["P", "AP"])
    _add_doubleness(rep, q, region, cfg, p, ap)
    return rep


def doubleness_by_extension(q2, region: SearchRegion | None = None, cfg: IntegratorConfig = DEFAULT_CONFIG,
                            tail=None, grid_n: int = 256) -> dict[str, VerificationReport]:
    """Doubleness reports for the (B) potential built from q2 under every extension mode.

    explicit_tail is included only when tail data is given.
    """
    modes = [m for m in EXTENSION_MODES if m != "explicit_tail" or tail is not None]
    out = {}
    for mode in modes:
        q = construct_from_q2(q2, mode, grid_n, tail if mode == "explicit_tail" else None)
        out[mode] = doubleness_report(q, region, cfg, potential_id=mode)
    return out


def _base_report(q, region, cfg, potential_id) -> VerificationReport:
    return VerificationReport(potential_id=potential_id or q.describe(), condition_report=condition_report(q),
                              header=make_header(q, region, cfg))


def _add_doubleness(rep: VerificationReport, q, region, cfg, p: SpectrumReport, ap: SpectrumReport) -> None:
    if rep.normalized_condition_report is None:
        try:
            qn, shift = normalize_half_neumann(q, cfg)
        except Exception as exc:  # search failure is recorded, not raised
            rep.verdict_per_theorem["normalization"] = Verdict(INCONCLUSIVE, str(exc))
            qn, shift = q, 0j
        rep.normalization_shift = shift
        rep.normalized_condition_report = condition_report(qn)
    tol = rep.condition_report.tolerance
    holds_b = rep.normalized_condition_report.residual_B < tol
    holds_sym = rep.condition_report.residual_sym_half < tol
    rep.doubleness_summary = _doubleness_rows([p, ap])
    v = theorem_1_3_verdict(holds_b or holds_sym, p, ap)
    which = "B" if holds_b else ("half symmetry" if holds_sym else "neither condition")
    rep.verdict_per_theorem["theorem_1_3"] = Verdict(v.verdict, f"[{which}] {v.explanation}")
    w = theorem_1_3_either_verdict(holds_b or holds_sym, p, ap)
    rep.verdict_per_theorem["theorem_1_3_either"] = Verdict(w.verdict, f"[{which}] {w.explanation}")


def verify(q: PotentialSpec, region: SearchRegion | None = None, cfg: IntegratorConfig = DEFAULT_CONFIG,
           potential_id: str | None = None, mu_grid=None) -> VerificationReport:
    """Every check: conditions, identities, spectra matches, doubleness, verdicts."""
    region = region or default_region(q)
    rep = _base_report(q, region, cfg, potential_id)
    id_tol = TOLERANCES["identities"]
    v_tol = TOLERANCES["verdicts"]

    try:
        qn, shift = normalize_half_neumann(q, cfg)
    except Exception as exc:
        rep.verdict_per_theorem["normalization"] = Verdict(INCONCLUSIVE, str(exc))
        qn, shift = q, 0j
    rep.normalization_shift = shift
    rep.normalized_condition_report = condition_report(qn)

    tags = ["D", "N", "DN", "ND", "P", "AP"]
    reports = dict(zip(tags, _pmap(lambda t: find_eigenvalues(q, t, region, cfg), tags)))

    b_half, b_three = identity_residual_B(qn, mu_grid, cfg)
    s_half, s_three = identity_residual_sym(q, mu_grid, cfg)
    rep.identity_residuals.update({
        "B_half": b_half, "B_three_halves": b_three,
        "sym_half": s_half, "sym_three_halves": s_three,
    })
    rows = monodromy_factorization_check(q, cfg, neumann=reports["N"])
    met = [r for r in rows if r.premise_met]
    rep.identity_residuals["monodromy_factorization"] = max((r.residual for r in met), default=0.0)
    prods = product_identity_check(q, cfg, rows=rows)
    rep.identity_residuals["product"] = max((p[1] for p in prods), default=0.0)
    rep.identity_residuals["product_equal"] = max((p[2] for p in prods), default=0.0)

    tol = rep.condition_report.tolerance
    holds_b = rep.normalized_condition_report.residual_B < tol
    holds_sym = rep.condition_report.residual_sym_half < tol
    rep.verdict_per_theorem["identity_B"] = _identity_verdict(holds_b, max(b_half, b_three), id_tol, "(B)")
    rep.verdict_per_theorem["identity_sym"] = _identity_verdict(holds_sym, max(s_half, s_three), id_tol,
                                                                "half symmetry")

    m11 = spectra_equal(q, "DN", "ND", region, False, cfg, (reports["DN"], reports["ND"]))
    m12 = spectra_equal(q, "D", "N", region, True, cfg, (reports["D"], reports["N"]))
    rep.spectra_matches = {"DN_ND": m11, "D_N_nonzero": m12}
    zero_in_n = any(abs(e.mu) < ZERO_MU for e in reports["N"].eigenvalues)

    sym_unit = rep.condition_report.residual_sym_unit < tol
    rep.verdict_per_theorem["theorem_1_1"] = _iff_verdict(sym_unit, m11.distance < v_tol, m11.complete,
                                                          "q(x)=q(1-x)", "DN and ND spectra coincide")
    bb = rep.condition_report.residual_BB < tol
    rep.verdict_per_theorem["theorem_1_2"] = _iff_verdict(bb, m12.distance < v_tol and zero_in_n, m12.complete,
                                                          "(BB)", "D and N spectra coincide off zero with 0 in N")
    _add_doubleness(rep, q, region, cfg, reports["P"], reports["AP"])
    return rep


def _identity_verdict(premise: bool, residual: float, tol: float, name: str) -> Verdict:
    if not premise:
        return Verdict(CONSISTENT, f"{name} fails, identity inapplicable (residual {residual:.3e} is diagnostic)")
    if residual < tol:
        return Verdict(CONSISTENT, f"{name} holds and the identity residual {residual:.3e} < {tol:.0e}")
    return Verdict(VIOLATED, f"{name} holds but the identity residual {residual:.3e} >= {tol:.0e}")


def _iff_verdict(condition: bool, spectral: bool, complete: bool, cname: str, sname: str) -> Verdict:
    if not complete:
        return Verdict(INCONCLUSIVE, "unresolved search boxes")
    if condition == spectral:
        state = "hold" if condition else "fail"
        return Verdict(CONSISTENT, f"{cname} and '{sname}' both {state}")
    return Verdict(VIOLATED, f"{cname} {'holds' if condition else 'fails'} but '{sname}' "
                             f"{'holds' if spectral else 'fails'}")
