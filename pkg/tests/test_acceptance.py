"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import json
import math

import numpy as np
import pytest

from conftest import MU_VALUES, standard_family
from hillspec import cli, harness, kernel, ode, spectra
from hillspec import potential as pot
from hillspec.harness import match_distance
from hillspec.ode import IntegratorConfig
from hillspec.spectra import SearchRegion, find_eigenvalues

PI2 = math.pi ** 2


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def free_eigenvalues(tag: str, lo: float, hi: float) -> np.ndarray:
    """Free eigenvalues by tag in [lo, hi], listed once per algebraic order."""
    k = np.arange(0, 40)
    if tag == "D":
        mus = (k[1:] * math.pi) ** 2
    elif tag == "N":
        mus = (k * math.pi) ** 2
    elif tag == "P":
        mus = np.concatenate([[0.0], np.repeat((2 * k[1:] * math.pi) ** 2, 2)])
    else:
        mus = np.repeat(((2 * k + 1) * math.pi) ** 2, 2)
    return mus[(mus >= lo) & (mus <= hi)]


def expanded(rep) -> np.ndarray:
    return np.concatenate([[e.mu] * e.algebraic_order for e in rep.eigenvalues]) if rep.eigenvalues else np.array([])


def test_criterion_01_free_spectra(report):
    box = SearchRegion(-1.0, 170.0, -1.0, 1.0)
    q = pot.zero()
    p = find_eigenvalues(q, "P", box)
    ap = find_eigenvalues(q, "AP", box)
    err_p = match_distance(p.mus, np.array([0.0, 4 * PI2, 16 * PI2]))
    err_ap = match_distance(ap.mus, np.array([PI2, 9 * PI2]))
    orders = [e.algebraic_order for e in p.eigenvalues]
    mults = [e.geometric_multiplicity for e in p.eigenvalues]
    ap_mults = [e.geometric_multiplicity for e in ap.eigenvalues]
    ok = (err_p < 1e-8 and err_ap < 1e-8 and orders == [1, 2, 2] and mults == [1, 2, 2]
          and ap_mults == [2, 2] and p.complete and ap.complete)
    report(1, ok, f"P err {err_p:.1e} orders {orders} mult {mults}; AP err {err_ap:.1e} mult {ap_mults}")


def test_criterion_02_constant_potential(report):
    worst_delta, worst_eig = 0.0, 0.0
    rng = np.random.default_rng(7)
    grid = rng.uniform(-20, 300, 20) + 1j * rng.uniform(-30, 30, 20)
    for c0 in (3.0, 2.0 + 1.0j):
        q = pot.constant(c0)
        delta, _ = ode.discriminant(q, grid)
        worst_delta = max(worst_delta, float(np.max(np.abs(delta - 2 * np.cos(np.sqrt(grid - c0))))))
        box = SearchRegion(c0.real - 1.0, c0.real + 170.0, c0.imag - 1.0, c0.imag + 1.0)
        for tag in ("D", "N", "P", "AP"):
            got = expanded(find_eigenvalues(q, tag, box))
            worst_eig = max(worst_eig, match_distance(got, free_eigenvalues(tag, -1.0, 170.0) + c0))
    ok = worst_delta < 1e-8 and worst_eig < 1e-8
    report(2, ok, f"discriminant err {worst_delta:.1e}, eigenvalue err {worst_eig:.1e}")


def test_criterion_03_wronskian_and_composition(report):
    worst_w, worst_c = 0.0, 0.0
    for q in standard_family().values():
        full = ode.transfer(q, MU_VALUES, 0.0, 1.0)
        first = ode.transfer(q, MU_VALUES, 0.0, 0.5)
        second = ode.transfer(q, MU_VALUES, 0.5, 1.0)
        worst_w = max(worst_w, float(np.max(np.abs(full.wronskian - 1))))
        prod = np.einsum("ijm,jkm->ikm", second.matrix, first.matrix)
        worst_c = max(worst_c, float(np.max(np.abs(prod - full.matrix))))
    ok = worst_w < 1e-9 and worst_c < 1e-8
    report(3, ok, f"Wronskian {worst_w:.1e}, composition {worst_c:.1e} (6 potentials x 12 mu)")


def test_criterion_04_derivative(report):
    # five-point differences of a tightly integrated discriminant; the
    # variational derivative itself runs at the default tolerance
    tight = IntegratorConfig(rel_tol=1e-13, abs_tol=1e-15)
    h = 1e-3
    worst = 0.0
    for q in standard_family().values():
        st = ode.monodromy(q, MU_VALUES, with_mu_derivative=True)

        def delta(m):
            return ode.discriminant(q, m, tight)[0]
        fd = (8 * (delta(MU_VALUES + h) - delta(MU_VALUES - h))
              - (delta(MU_VALUES + 2 * h) - delta(MU_VALUES - 2 * h))) / (12 * h)
        worst = max(worst, float(np.max(np.abs(st.dtrace - fd) / np.abs(st.dtrace))))
    report(4, worst < 1e-4, f"max relative error {worst:.1e}")


def test_criterion_05_condition_machinery(report):
    built = [pot.construct_from_q2([16, -4]), pot.construct_from_q2(np.poly1d([1.0, -0.25]) ** 3, "reflect_about_half"),
             pot.construct_from_q2(lambda x: np.sin(4 * np.pi * x) + 1j * (x - 0.25))]
    res_b = max(pot.residual_condition_B(q) for q in built)
    trip = 0.0
    for q in standard_family().values():
        h, u = pot.decompose_half(q), pot.decompose_unit(q)
        v = q._closed(h.x)
        trip = max(trip, float(np.max(np.abs(h.q1 + h.q2 - v))), float(np.max(np.abs(h.q1 - h.q2 - v[::-1]))))
        w = q(u.x[:-1])
        trip = max(trip, float(np.max(np.abs(u.q1[:-1] + u.q2[:-1] - w))))
    cos, sin = pot.cos2pi(), pot.sin2pi()
    tol = pot.default_tolerance(cos)
    controls = {
        "cos sym_half": pot.residual_symmetry(cos, "half"),
        "cos B": pot.residual_condition_B(cos),
        "sin sym_unit": pot.residual_symmetry(sin, "unit"),
        "sin BB": pot.residual_condition_BB(sin),
    }
    margin = min(controls.values()) / tol
    ok = res_b < 1e-10 and trip < 1e-12 and margin >= 1e3
    report(5, ok, f"B residual {res_b:.1e}, round trip {trip:.1e}, control margin {margin:.1e}x tolerance")


def test_criterion_06_symmetry_identity(report):
    r_zero = harness.identity_residual_sym(pot.zero())[0]
    r_sin = harness.identity_residual_sym(pot.sin2pi())[0]
    r_cos = harness.identity_residual_sym(pot.cos2pi(), [1.0])[0]
    ok = r_zero < 1e-7 and r_sin < 1e-7 and r_cos > 1e-2
    report(6, ok, f"zero {r_zero:.1e}, sin {r_sin:.1e}, cos at mu=1 {r_cos:.1e}")


def test_criterion_07_b_identity_report(report):
    q = pot.construct_from_q2([16, -4], "half_period")
    rep = harness.verify(q, SearchRegion(-12.0, 60.0, -3.0, 3.0), potential_id="bfam")
    verdict = rep.verdict_per_theorem["identity_B"].verdict
    res = rep.identity_residuals["B_half"]
    zero_res = max(harness.identity_residual_B(pot.zero()))
    ok = verdict in (harness.CONSISTENT, harness.VIOLATED) and math.isfinite(res) and zero_res < 1e-10
    report(7, ok, f"bfam residual {res:.1e} verdict {verdict}; zero residual {zero_res:.1e}")


def test_criterion_08_spectra_matching(report):
    box = SearchRegion(-12.0, 170.0, -3.0, 3.0)
    m11 = harness.spectra_equal(pot.cos2pi(), "DN", "ND", box)
    q_bb = pot.polynomial(np.polyadd(np.polymul([2, -2, 0], [2, -2, 0]), [4, -2]), span="unit")
    qn, _ = spectra.normalize_unit_neumann(q_bb.shifted(5.0))
    m12 = harness.spectra_equal(qn, "D", "N", box, exclude_zero=True)
    neg11 = harness.spectra_equal(pot.sin2pi(), "DN", "ND", box)
    neg12 = harness.spectra_equal(pot.cos2pi(), "D", "N", box, exclude_zero=True)
    ok = (m11.distance < 1e-7 and m12.distance < 1e-7 and m11.complete and m12.complete
          and m11.count_a > 0 and m12.count_a > 0 and neg11.distance > 1e-7 and neg12.distance > 1e-7)
    report(8, ok, f"cos DN/ND {m11.distance:.1e}, BB D/N {m12.distance:.1e}; "
                  f"controls {neg11.distance:.1e}, {neg12.distance:.1e}")


def test_criterion_09_open_gap(report):
    rep = find_eigenvalues(pot.cos2pi(), "AP", SearchRegion(-1.0, 30.0, -1.0, 1.0))
    first = rep.eigenvalues[:2]
    orders = [e.algebraic_order for e in rep.eigenvalues]
    sep = abs(first[1].mu - first[0].mu) if len(first) == 2 else 0.0
    ok = len(rep.eigenvalues) == 2 and orders == [1, 1] and sep > 1e-2 and rep.complete
    report(9, ok, f"first AP pair orders {orders}, separation {sep:.3f}")


def test_criterion_10_kernel(report):
    one = pot.constant(1.0)
    mus = np.array([0.0, 10.0, 50.0, 5.0 + 5.0j])
    xs = [0.25, 0.5, 1.0]
    res = {n: kernel.representation_residual(one, kernel.solve_goursat(one, n), mus, xs) for n in (64, 128, 256)}
    orders = [math.log2(res[64] / res[128]), math.log2(res[128] / res[256])]
    K0 = kernel.solve_goursat(pot.zero(), 256)
    r0 = kernel.representation_residual(pot.zero(), K0, mus, xs, IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14))
    kmax = float(np.max(np.abs(K0.H)))
    ok = res[256] < 5e-4 and all(1.7 < o < 2.3 for o in orders) and kmax < 1e-12 and r0 < 1e-10
    report(10, ok, f"residual n=256 {res[256]:.1e}, orders {orders[0]:.2f}/{orders[1]:.2f}, "
                   f"|K| for q=0 {kmax:.1e}")


def test_criterion_11_determinism(report, tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(harness, "__version__", "pinned")
    src = tmp_path / "cos.json"
    pot.cos2pi().save(src)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.json"
        cli.main(["verify", "--potential", str(src), "--re", "-5..100", "--im", "-2..2", "-o", str(out)])
        outs.append(out.read_bytes())
    capsys.readouterr()
    ok = outs[0] == outs[1] and json.loads(outs[0])["header"]["version"] == "pinned"
    report(11, ok, f"{len(outs[0])} bytes, identical={outs[0] == outs[1]}")
