"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured quantity
and its runtime.  Run ``pytest -s tests/test_acceptance.py`` (or execute
this file directly) to see the lines.
"""

import json
import math
import time
import warnings

import numpy as np
import pytest

from conetrace._errors import TruncationWarning
from conetrace.cli import main
from conetrace.expansion import (
    CutoffFunction,
    ExpansionBasis,
    cutoff_moment,
    fit_heat_trace,
    residual_order,
    twisted_homogeneity_residual,
)
from conetrace.fuchs_algebra import build_cone_laplacian, conormal, fuchs_compose, random_operator
from conetrace.mellin import LogGrid, apply_direct, bump, op_mellin_apply
from conetrace.oracle import (
    Contour,
    ModelCone,
    dunford_heat_trace,
    eigenvalues_exact_cone,
    eigenvalues_fd,
    heat_trace_sum,
)
from conetrace.spectral import CrossSection, boundary_spectrum
from conetrace.weakly_parametric import resolvent_symbol, wp_coefficients, wp_remainder_order

LAMBDA_MIN_DISK = 5.783185962946785  # square of the first zero of J_0


def _report(number, ok, detail, start, budget):
    elapsed = time.perf_counter() - start
    within = elapsed <= budget
    status = "PASS" if ok and within else "FAIL"
    print(f"\n[criterion {number:2d}] {status} {detail} ({elapsed:.2f} s, budget {budget:g} s)")
    assert ok, detail
    assert within, f"runtime {elapsed:.2f} s exceeds {budget} s"


def test_criterion_01_conormal_composition():
    start = time.perf_counter()
    rng = np.random.default_rng(20240601)
    mus = np.array([CrossSection.circle(1.0).mode(j).mu for j in range(20)])
    worst = 0.0
    for _ in range(50):
        m1, m2 = (int(k) for k in rng.integers(1, 4, size=2))
        A1, A2 = random_operator(rng, m1), random_operator(rng, m2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            C = fuchs_compose(A2, A1)
        for mu in mus:
            lhs = conormal(C, mu).coefficients
            rhs = (conormal(A2, mu).shifted(m1) * conormal(A1, mu)).coefficients
            worst = max(worst, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))))
    _report(1, worst <= 1e-10, f"max relative error {worst:.2e}", start, 5)


def test_criterion_02_flat_cone_boundary_spectrum():
    start = time.perf_counter()
    worst_root = worst_rel = 0.0
    ok = True
    for c in (0.5, 1.0, 2.0):
        cs = CrossSection.circle(c)
        A = build_cone_laplacian(cs, sign="analyst")
        entries = boundary_spectrum(A, cs, (-3.2, 3.2))
        expected = sorted({s * j / c for j in range(0, 8) for s in (1, -1) if j / c <= 3.2})
        got = [e.z.real for e in entries]
        ok &= len(got) == len(expected)
        ok &= all(e.algebraic_multiplicity == 2 for e in entries)  # 0 is a double root of mode 0
        if len(got) == len(expected):
            worst_root = max(worst_root, float(np.max(np.abs(np.array(got) - expected))))
        for e in entries:
            # z is in the boundary spectrum iff (n-1) z - z^2 is a cross-section eigenvalue (n = 1)
            target = -cs.mode(e.mode_index).mu
            worst_rel = max(worst_rel, abs(-e.z**2 - target))
    ok &= worst_root <= 1e-10 and worst_rel <= 1e-10
    _report(2, ok, f"root error {worst_root:.2e}, relation residual {worst_rel:.2e}", start, 1)


def test_criterion_03_mellin_quantization():
    start = time.perf_counter()
    grid = LogGrid.from_radii(0.1, 10.0, 3072)
    L = math.log(10.0)
    A = build_cone_laplacian(1)
    bumps = [(0.0, 0.95), (0.05, 0.9), (-0.05, 0.9), (0.1, 0.85), (-0.1, 0.85)]
    sup_err = beta_spread = 0.0
    for center, hw in bumps:
        u = bump(grid, center * L, hw * L)
        direct = apply_direct(A, u, mu=4.0, half_stencil=8).values
        results = [op_mellin_apply(A, u, beta=b, mu=4.0).values for b in (-1.0, 0.0, 1.0)]
        sup_err = max(sup_err, max(float(np.max(np.abs(r - direct))) for r in results))
        beta_spread = max(beta_spread, max(float(np.max(np.abs(r - results[1]))) for r in results))
    ok = sup_err <= 1e-5 and beta_spread <= 2e-5
    _report(3, ok, f"sup error {sup_err:.2e}, beta spread {beta_spread:.2e}", start, 30)


def test_criterion_04_oracle_self_consistency():
    start = time.perf_counter()
    ok = True
    worst_ratio = 0.0
    for c in (0.5, 1.0, 1.5):
        model = ModelCone(CrossSection.circle(c))
        fd = eigenvalues_fd(model, 4096, 10)
        exact = eigenvalues_exact_cone(model, fd.lambdas[-1] * 1.01).expanded()[:fd.total_count]
        errs = np.repeat(fd.errors, fd.multiplicities)
        diff = np.abs(fd.expanded() - exact)
        ok &= bool(np.all(diff <= errs))
        worst_ratio = max(worst_ratio, float(np.max(diff / errs)))
    lam_min = eigenvalues_exact_cone(ModelCone(CrossSection.circle(1.0)), 10.0).lambdas[0]
    ok &= abs(lam_min - LAMBDA_MIN_DISK) <= 1e-8
    _report(4, ok, f"worst |FD - exact|/estimate {worst_ratio:.1e}, lambda_min error "
                   f"{abs(lam_min - LAMBDA_MIN_DISK):.1e}", start, 60)


def test_criterion_05_dunford_representation():
    start = time.perf_counter()
    eigs = eigenvalues_exact_cone(ModelCone(CrossSection.circle(1.0)), 4.5e4)
    worst = spread = 0.0
    for t in (0.05, 0.1, 0.5, 1.0):
        ref = heat_trace_sum(eigs, t).value
        vals = [dunford_heat_trace(eigs, Contour(phi, 0.5), t) for phi in (math.pi / 6, math.pi / 4, math.pi / 3)]
        worst = max(worst, max(abs(v - ref) for v in vals))
        spread = max(spread, max(vals) - min(vals))
    ok = worst <= 1e-9 and spread <= 1e-9
    _report(5, ok, f"max |contour - sum| {worst:.2e}, phi spread {spread:.2e}", start, 30)


def test_criterion_06_heat_trace_expansion():
    start = time.perf_counter()
    t = np.geomspace(1e-3, 0.05, 40)
    ok = True
    details = []
    for c in (0.5, 1.0, 1.5):
        samples = heat_trace_sum(eigenvalues_exact_cone(ModelCone(CrossSection.circle(c)), 4.5e4), t)
        fit = fit_heat_trace(samples, ExpansionBasis(2, 1, 5))
        e0 = abs(fit.coefficient(-1.0) / (c / 4) - 1)
        e1 = abs(fit.coefficient(-0.5) / (-math.sqrt(math.pi) * c / 4) - 1)
        ok &= e0 <= 0.01 and e1 <= 0.03
        for n_terms in (2, 3):
            res = residual_order(samples, fit, n_terms=n_terms)
            ok &= res.status == "ok" and abs(res.slope - res.expected) <= 0.2
            details.append(f"{res.slope - res.expected:+.3f}")
        details.insert(len(details) - 2, f"c={c}: rel {e0:.1e}/{e1:.1e}")
    _report(6, ok, "; ".join(details[i] + " slope offsets " + details[i + 1] + "," + details[i + 2]
                             for i in range(0, len(details), 3)), start, 180)


def test_criterion_07_cutoff_moments():
    start = time.perf_counter()
    omega = CutoffFunction()
    values = (0.0, 0.5, 1.0, 2.0)
    worst = 0.0
    logs = 0
    for j in values:
        for nu in values:
            for tau in (0.1, 0.25, 0.5, 0.999):
                m = cutoff_moment(omega, j, nu, tau)
                worst = max(worst, m.difference)
                logs += m.log_branch
    ok = worst <= 1e-10 and logs == 16
    _report(7, ok, f"max difference {worst:.2e} over 64 points ({logs} on the log branch)", start, 5)


def _line_kernel(lam, r, rp):
    k = np.sqrt(-complex(lam))
    return np.exp(-k * abs(r - rp)) / (2 * k)


def test_criterion_08_kernel_scaling():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    samples = [(-rng.uniform(0.5, 5) + 1j * rng.uniform(-3, 3), rng.uniform(0.05, 2), rng.uniform(0.05, 2))
               for _ in range(20)]
    good = twisted_homogeneity_residual(_line_kernel, -2.0, 2, samples).max_deviation
    bad = twisted_homogeneity_residual(_line_kernel, -1.0, 2, samples).max_deviation
    ok = good <= 1e-12 and bad > 1e-3
    _report(8, ok, f"deviation {good:.1e} at mu=-2, {bad:.2f} at mu=-1", start, 1)


def test_criterion_09_weakly_parametric():
    start = time.perf_counter()
    ok = True
    coef_err = 0.0
    offsets = []
    for power in (1, 2):
        sym = resolvent_symbol(power)
        tab = wp_coefficients(sym, 7, points=[((1.0,), 1.0), ((0.5,), 0.0), ((0.0, 1.5), 0.3)])
        for p, (xi, rho) in enumerate(tab.points):
            q = float(np.dot(xi, xi)) + rho**2
            oracle = [0.0 if k % 2 else (-(q ** (k // 2)) if power == 1 else (k // 2 + 1) * q ** (k // 2))
                      for k in range(7)]
            coef_err = max(coef_err, float(np.max(np.abs(tab.values[p] - oracle))))
        for N in (0, 2, 4, 6):
            res = wp_remainder_order(sym, tab, N)
            ok &= res.status == "measured" and abs(res.expected + (N + sym.shift) / sym.d) < 1e-12
            ok &= res.within(0.1)
            offsets.append(res.slope - res.expected)
    ok &= coef_err <= 1e-6
    _report(9, ok, f"coefficient error {coef_err:.1e}, max slope offset "
                   f"{max(abs(o) for o in offsets):.3f}", start, 30)


def test_criterion_10_determinism(tmp_path):
    start = time.perf_counter()
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"eigenvalues": {"mode": "exact", "lambda_max": 20000.0},
                                  "t_grid": {"min": 2e-3, "max": 0.05, "count": 12},
                                  "basis": {"K": 4}, "wp": {"K": 7, "N": [0, 2, 4, 6]}}))
    names = {"spectrum": ["spectrum.csv", "spectrum.json"], "ellipticity": ["ellipticity.json"],
             "wp": ["wp.csv", "wp.json"], "report": ["trace.csv", "fit.json", "report.json"]}
    ok = True
    compared = 0
    for run in ("a", "b"):
        for cmd in names:
            ok &= main([cmd, "--config", str(config), "--out", str(tmp_path / run)]) == 0
    for files in names.values():
        for name in files:
            ok &= (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
            compared += 1
    _report(10, ok, f"{compared} output files byte-identical across two runs", start, 120)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(pytest.main(["-q", "-s", __file__]))
