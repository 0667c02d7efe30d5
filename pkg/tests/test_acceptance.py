"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into RESULTS and repeated in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from wbdg import bellman as bm
from wbdg import conditions as cc
from wbdg import lab
from wbdg.cli import main as cli_main
from wbdg.dyadic import FiltrationTree
from wbdg.extrapolation import (FunctionSpaceDescriptor, extremizer, gaussian_field,
                                norming_check, pm1_field, verify_vector_bdg)
from wbdg.smooth_space import constant_relations, estimate_CH, estimate_Csm, make_space

import oracle_values as ov
from acceptance_helpers import fd_errors, homogeneity_errors, two_form_error

RESULTS = {}
P_GRID = (1.1, 1.25, 1.5, 1.75, 2.0)
SQ32 = 4 * math.sqrt(2)
PLAIN = bm.BellmanConstants(*bm.PLAIN_CONSTANTS)
MAXIMAL = bm.BellmanConstants(*bm.MAXIMAL_CONSTANTS)


def acceptance_spaces():
    out = [make_space("scalar", p=p) for p in P_GRID]
    out += [make_space("euclidean", p=p, dim=4) for p in P_GRID]
    out += [make_space("lq", q=3, dim=4), make_space("lq", q=4, dim=8),
            make_space("lq", p=1.5, q=1.5, dim=4)]
    return out


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def test_criterion_1_concavity_suite():
    t0 = time.perf_counter()
    worst = {}
    bad = []
    for sp in acceptance_spaces():
        for variant, k in (("plain", PLAIN), ("maximal", MAXIMAL)):
            rep = bm.concavity_scan(sp, variant, k, 1_000_000, seed=20240601)
            worst[variant] = min(worst.get(variant, math.inf), rep.min_relative_gap)
            if rep.violations:
                bad.append((str(sp), variant, rep.violations))
    for case in bm.CASES_MAX:
        rep = bm.concavity_scan(make_space("lq", q=3, dim=4), "maximal", MAXIMAL, 1_000_000,
                                seed=7, case=case)
        worst["case_" + case] = rep.min_relative_gap
        if rep.violations:
            bad.append(("lq(3,4)", case, rep.violations))
    dt = time.perf_counter() - t0
    report(1, not bad and dt <= 600,
           f"{len(acceptance_spaces())} spaces x 2 variants + 5 cases, 1e6 samples each, "
           f"violations={bad or 0}, worst relative gaps plain={worst['plain']:.3g} "
           f"maximal={worst['maximal']:.3g}, {dt:.1f}s")


def test_criterion_2_condition_curves():
    t0 = time.perf_counter()
    plain, maximal = cc.sweep("plain"), cc.sweep("maximal")
    tc, tc_at = plain.sup("cond0_tC")
    c0, c0_at = plain.sup("cond0_C")
    c, c_at = maximal.sup("cond_C")
    s0 = cc.cond_value("cond0_C", 2.0)
    s1 = cc.cond_value("cond_C", 2.0)
    dt = time.perf_counter() - t0
    ok = (abs(tc - SQ32) <= 1e-9 and tc_at == 2.0 and c0 <= 9 and c <= 21
          and abs(s0 - ov.COND0_C_2) <= 1e-5 and abs(s1 - ov.COND_C_2) <= 1e-5 and dt <= 1)
    report(2, ok,
           f"sup cond0_tC={tc:.12f} at p={tc_at}, sup cond0_C={c0:.6f} at p={c0_at:.4f}, "
           f"sup cond_C={c:.6f} at p={c_at}, cond0_C(2)={s0:.6f}, cond_C(2)={s1:.6f} "
           f"(printed literals {ov.PRINTED['COND0_C_2']}, {ov.PRINTED['COND_C_2']} use a rounded "
           f"4*sqrt(2)*ln2), {dt * 1e3:.0f}ms")


@pytest.mark.xfail(strict=True, reason="the printed spot literals were computed with "
                   "4*sqrt(2)*ln2 = 3.920952; the exact value is 3.9210326, 8.1e-5 higher")
def test_criterion_2_printed_spot_literals():
    assert abs(cc.cond_value("cond0_C", 2.0) - ov.PRINTED["COND0_C_2"]) <= 1e-5
    assert abs(cc.cond_value("cond_C", 2.0) - ov.PRINTED["COND_C_2"]) <= 1e-5


@pytest.fixture(scope="module")
def fleet():
    t0 = time.perf_counter()
    res = lab.run_fleet([make_space("scalar"), make_space("lq", q=3, dim=4)], [4, 8, 12],
                        lab.GENERATORS, trials=100, seed=2024, r_values=(2.0, 3.0, 4.0),
                        telescoping=True)
    res["seconds"] = time.perf_counter() - t0
    return res


def test_criterion_3_inequality_fleet(fleet):
    names = [n for n in fleet["violations"] if not n.startswith("telescoping")]
    bad = {n: fleet["violations"][n] for n in names if fleet["violations"][n]}
    expected = {"w_BDG", "w_BDG_CH", "w_non_maximal", "w_BDG_non_martingale"}
    expected |= {f"{c}_r={r}" for c in ("BDG_Lr", "sg_vs_S2") for r in (2, 3, 4)}
    ok = not bad and expected <= set(names) and fleet["instances"] == 1800 and fleet["seconds"] <= 300
    mr = fleet["max_ratio"]
    report(3, ok, f"{fleet['instances']} instances, violations={bad or 0}, max ratios "
                  f"maximal={mr['maximal']:.4f} non_maximal={mr['non_maximal']:.4f} "
                  f"non_martingale={mr['non_martingale']:.4f}, {fleet['seconds']:.1f}s "
                  f"(includes the telescoping checks)")


def test_criterion_4_telescoping(fleet):
    v = fleet["violations"]
    ok = v.get("telescoping_plain") == 0 and v.get("telescoping_maximal") == 0
    report(4, ok, f"{fleet['instances']} instances x 2 variants, failures plain="
                  f"{v.get('telescoping_plain')} maximal={v.get('telescoping_maximal')}")


def test_criterion_5_derivatives_and_homogeneity():
    spaces = [make_space("scalar"), make_space("lq", q=3, dim=4),
              make_space("lq", p=1.5, q=1.5, dim=4)]
    fd = 0.0
    hom = 0.0
    form = 0.0
    for i, sp in enumerate(spaces):
        for variant, k in (("plain", PLAIN), ("maximal", MAXIMAL)):
            fd = max(fd, *fd_errors(sp, variant, k, 10_000, seed=i))
            hom = max(hom, homogeneity_errors(sp, variant, k, 100_000, seed=10 + i))
        form = max(form, two_form_error(sp, MAXIMAL, 100_000, seed=20 + i))
    report(5, fd <= 1e-5 and hom <= 1e-10 and form <= 1e-10,
           f"finite-difference {fd:.2e} (<= 1e-5), homogeneity {hom:.2e}, two-form {form:.2e} "
           f"(<= 1e-10)")


def test_criterion_6_constant_relations():
    bad = []
    for sp in acceptance_spaces():
        csm = estimate_Csm(sp, 1_000_000, seed=6)
        ch = estimate_CH(sp, 1_000_000, seed=6)
        if csm > sp.C_sm * (1 + 1e-9) or ch > sp.C_H * (1 + 1e-9):
            bad.append((str(sp), csm, ch))
        if not all(constant_relations(sp).values()):
            bad.append((str(sp), "relations"))
    report(6, not bad, f"{len(acceptance_spaces())} spaces, 1e6 samples each, "
                       f"exceedances={bad or 0} (estimates compared at relative 1e-9)")


def test_criterion_7_extrapolation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    ident = 0.0
    norming_ok = True
    for q, d in ((2.0, 2), (3.0, 4), (1.5, 3)):
        sp = FunctionSpaceDescriptor(q, d)
        for i in range(100):
            f = np.abs(rng.standard_normal(d)) * 10 ** rng.uniform(-3, 3)
            r = rng.uniform(1.1, 4)
            h = extremizer(sp, f, r)
            nf = sp.norm(f)
            ident = max(ident, abs(sp.dual_norm(h) / nf ** (r - 1) - 1),
                        abs(sp.pairing(f, h) / nf ** r - 1))
            nc = norming_check(sp, rng.standard_normal(d), 10_000, seed=i)
            norming_ok &= (nc["sampled_sup"] <= nc["norm"] * (1 + 1e-12)
                           and abs(nc["extremizer_pairing"] / nc["norm"] - 1) <= 1e-12)
    tree = FiltrationTree(6)
    failures = 0
    worst = 0.0
    for q in (3.0, 2.0, 1.5):
        sp = FunctionSpaceDescriptor(q, 4)
        for r in (2.0, 2.5):
            for seed in range(20):
                make = pm1_field if seed % 2 == 0 else gaussian_field
                rep = verify_vector_bdg(tree, make(tree, 4, seed), r, sp)
                failures += not rep.satisfied
                worst = max(worst, rep.ratio / rep.bound)
    dt = time.perf_counter() - t0
    ok = ident <= 1e-12 and norming_ok and failures == 0 and dt <= 60
    report(7, ok, f"extremizer identities {ident:.1e}, norming ok={norming_ok}, chain+BDG failures "
                  f"{failures}/120, worst ratio/bound {worst:.4f}, {dt:.1f}s")


def test_criterion_8_negative_controls(capsys):
    weak = bm.BellmanConstants(1.0, SQ32)
    sc = make_space("scalar")
    vp = bm.concavity_scan(sc, "plain", weak, 10_000, seed=0).violations
    vm = bm.concavity_scan(sc, "maximal", weak, 10_000, seed=0).violations
    code = cli_main(["conditions", "--Ct", "1.0"])
    capsys.readouterr()
    report(8, vp > 0 and vm > 0 and code != 0,
           f"C=1 violations plain={vp} maximal={vm} in 1e4 samples; conditions --Ct 1.0 exit={code}")
