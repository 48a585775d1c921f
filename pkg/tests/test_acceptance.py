"""Acceptance suite: one test per quantitative criterion.

Each test prints a [PASS]/[FAIL] line with the measured numbers so the
whole verification can be read off a single run:

    pytest tests/test_acceptance.py -s

Criterion 5's final-value bound is known to fail at its stated tolerance
(see the assertion message in test_criterion_05b); the measured identity
residual carries an irreducible free-boundary transition-layer term of
size ~ sup(f) * h * Per(FB), a factor 2-4 above the stated bound at
h = 1/512. It is kept faithful to the stated tolerance rather than
loosened.
"""

import numpy as np
import pytest

from conftest import ladder_order

from obstakl.fields import Grid, ScalarField
from obstakl.freeboundary import (bv_norm, energy_E_eps, extract_free_boundary,
                                  growth_exponent_fit, hausdorff_box_count,
                                  nondegeneracy_check, perimeter_of_positivity,
                                  porosity_estimate, o_delta_measure,
                                  w22_quotient_energy)
from obstakl.operator import (AffineProfile, ConstantProfile, OperatorSpec,
                              StructuralConstants, divergence_of_flux,
                              verify_structural)
from obstakl.oracles import blowup_operator
from obstakl.solver import Solution, complementarity_report

LADDER = (64, 128, 256, 512)


def report(criterion, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    return ok


# ---------------------------------------------------------------------------
# 1. oracle convergence of the constrained solver

def test_criterion_01_oracle_convergence(lab):
    ok = True
    lines = []

    oracle, *_ = lab.problem_1d()
    errs, hs = [], []
    for n in LADDER:
        _, grid, _, _, _, sol = lab.vi_1d(n=n)
        exact = oracle.u(grid.axis_coords(0))
        errs.append(float(np.abs(sol.u.values - exact).max()))
        hs.append(1.0 / n)
    order = ladder_order(hs, errs)
    ok &= errs[-1] < errs[0] and order >= 0.85
    lines.append(f"1d p=2 errs={['%.2e' % e for e in errs]} order={order:.2f}")

    for p in (1.5, 2.0, 3.0):
        errs, hs = [], []
        for n in LADDER:
            oracle, grid, _, _, _, sol = lab.vi_radial(p=p, n=n)
            errs.append(float(np.abs(sol.u.values - oracle.sample(grid).values).max()))
            hs.append(1.0 / n)
        order = ladder_order(hs, errs)
        converged_exactly = max(errs) < 1e-10
        ok &= converged_exactly or (errs[-1] < errs[0] and order >= 0.85)
        lines.append(f"radial p={p} errs={['%.2e' % e for e in errs]} order={order:.2f}")

    assert report(1, ok, "; ".join(lines))


# ---------------------------------------------------------------------------
# 2. free boundary location on the 1D oracle

def test_criterion_02_free_boundary_location(lab):
    ok = True
    details = []
    for n in LADDER:
        oracle, grid, _, _, _, sol = lab.vi_1d(n=n)
        x = grid.axis_coords(0)
        active = np.nonzero(sol.active_mask)[0]
        h = grid.h[0]
        lo_err = abs(x[active.min()] - oracle.x_l)
        hi_err = abs(x[active.max()] - oracle.x_r)
        ok &= lo_err <= 2 * h + 1e-12 and hi_err <= 2 * h + 1e-12
        details.append(f"n={n}: ({lo_err / h:.2f}h, {hi_err / h:.2f}h)")
    assert report(2, ok, "free boundary offsets " + ", ".join(details))


# ---------------------------------------------------------------------------
# 3. growth exponent

def _fb_normal(grid, mask, pt, h):
    mesh = grid.node_mesh()
    ball = sum((mesh[k] - pt[k]) ** 2 for k in range(grid.dim)) <= (6 * h) ** 2
    pos = ball & ~mask
    act = ball & mask
    if not pos.any() or not act.any():
        return None
    cp = np.array([mesh[k][pos].mean() for k in range(grid.dim)])
    ca = np.array([mesh[k][act].mean() for k in range(grid.dim)])
    v = cp - ca
    nv = np.linalg.norm(v)
    return v / nv if nv > 0 else None


def test_criterion_03_growth_exponent(lab):
    ok = True
    lines = []

    # constant p in {1.5, 2, 3} at h = 1/512: fit at the radial contact point
    for p in (1.5, 2.0, 3.0):
        oracle, grid, _, _, _, sol = lab.vi_radial(p=p, n=512)
        h = grid.h[0]
        radii = [m * h for m in (8, 12, 16, 24, 32, 48)]
        expo, _ = growth_exponent_fit(sol, [0.0, 0.0], radii)
        q = p / (p - 1.0)
        rel = abs(expo - q) / q
        ok &= rel <= 0.05
        lines.append(f"p={p}: fit={expo:.3f} vs q={q:.3f} ({rel:.1%})")

    # variable exponent: tested points where the frozen-exponent model is
    # resolvable in the window (normal-projected drift of q below 6% of q)
    grid, spec, f, g, sol = lab.vi_2d("variable-p-demo", 512)
    fb = extract_free_boundary(sol)
    centers = fb.cell_centers()
    h = grid.h[0]
    radii = [m * h for m in (8, 12, 16, 24, 32)]
    r_max = max(radii)
    interior = [c for c in centers if grid.distance_to_boundary(c) >= 0.15]
    order = np.argsort([c[0] for c in interior])
    tested = 0
    for k in range(0, len(order), max(1, len(order) // 8)):
        pt = interior[order[k]]
        p_loc = float(spec.p(pt)[0])
        q_loc = p_loc / (p_loc - 1.0)
        normal = _fb_normal(grid, sol.active_mask, pt, h)
        if normal is None:
            continue
        grad_q = np.array([1.5, 0.0]) / (p_loc - 1.0) ** 2
        drift = abs(grad_q @ normal) * r_max * (1.0 + abs(np.log(2.0 * r_max)))
        if drift > 0.06 * q_loc:
            continue
        expo, _ = growth_exponent_fit(sol, pt, radii)
        rel = abs(expo - q_loc) / q_loc
        ok &= rel <= 0.10
        tested += 1
        lines.append(f"varp ({pt[0]:.2f},{pt[1]:.2f}): fit={expo:.3f} vs {q_loc:.3f} ({rel:.1%})")
    ok &= tested >= 3
    assert report(3, ok, "; ".join(lines))


# ---------------------------------------------------------------------------
# 4. nondegeneracy

def test_criterion_04_nondegeneracy(lab):
    oracle, grid, spec, f, _, sol = lab.vi_1d(n=512)
    h = grid.h[0]
    radii = [r for r in (8 * h, 12 * h, 16 * h, 0.05, 0.075, 0.1)]
    rep = nondegeneracy_check(sol, spec, f, [[oracle.x_l], [oracle.x_r]], radii)
    ok = 0.4 <= rep["min_ratio"] <= 0.6
    assert report(4, ok, f"min ratio m(r)/r^2 = {rep['min_ratio']:.3f} (target 0.5 in [0.4, 0.6])")


# ---------------------------------------------------------------------------
# 5. complementarity identity

def _r2_ladder(lab, kind):
    vals = []
    for n in LADDER:
        if kind == "oracle-1d":
            _, grid, spec, f, _, sol = lab.vi_1d(n=n)
        elif kind == "oracle-radial":
            _, grid, spec, f, _, sol = lab.vi_radial(p=3.0, n=n)
        else:
            grid, spec, f, _, sol = lab.vi_2d(kind, n)
        vals.append(complementarity_report(spec, sol, f)["r2"])
    return vals


PRESET_KINDS = ("oracle-1d", "oracle-radial", "obstacle-2d", "kappa-2d", "variable-p-demo")


def test_criterion_05a_r2_decreases(lab):
    ok = True
    lines = []
    for kind in PRESET_KINDS:
        vals = _r2_ladder(lab, kind)
        at_floor = max(vals) < 1e-6  # solver-tolerance level, nothing to decrease
        decreasing = vals[-1] < vals[0]
        ok &= at_floor or decreasing
        lines.append(f"{kind}: {vals[0]:.2e} -> {vals[-1]:.2e}")
    assert report("5a", ok, "r2 under refinement " + "; ".join(lines))


def test_criterion_05b_r2_final_bound(lab):
    # The stated tolerance r2 <= 1e-3 * sup|f| * |Omega| at h = 1/512 is not
    # attainable for the nodal identity residual: the discrete coincidence
    # boundary contributes |Au| ~ sup f on the one-node transition layer,
    # i.e. r2 ~ 0.5..1 * sup f * h * Per(FB) ~ 2e-3..4e-3 at h = 1/512.
    # The assertion is kept at the stated tolerance (see decisions ledger).
    ok = True
    lines = []
    for kind in PRESET_KINDS:
        vals = _r2_ladder(lab, kind)
        final = vals[-1]  # normalized by sup|f|; domain volume is 1
        ok &= final <= 1e-3
        lines.append(f"{kind}: r2(h=1/512)={final:.2e}")
    assert report("5b", ok, "; ".join(lines) + " (bound 1e-3)")


# ---------------------------------------------------------------------------
# 6. porosity

def test_criterion_06_porosity(lab):
    ok = True
    lines = []

    # synthetic hyperplane: geometric value 1/2
    g2 = Grid([0.0, 0.0], [1.0, 1.0], [128, 128])
    mesh = g2.node_mesh()
    synth = Solution(u=ScalarField(g2, np.maximum(mesh[0] - 0.5, 0.0)),
                     active_mask=mesh[0] <= 0.5, residual_history=[], iterations=0,
                     eps_final=None, converged=True, method="synthetic", spec=None,
                     f_sup=1.0, g_sup=1.0, tol_u_zero=1e-7)
    fb = extract_free_boundary(synth)
    res = porosity_estimate(fb, [0.1, 0.2])
    ok &= 0.25 <= res.delta_hat <= 0.55
    lines.append(f"hyperplane delta={res.delta_hat:.3f}")

    # radial: contact set is the origin; the coincidence threshold is the
    # measurement parameter (first-ring value scale)
    for n in (128, 256):
        oracle, grid, spec, f, gf, sol = lab.vi_radial(p=3.0, n=n)
        meas = Solution(u=sol.u, active_mask=None, residual_history=[], iterations=0,
                        eps_final=None, converged=True, method=sol.method, spec=spec,
                        f_sup=sol.f_sup, g_sup=sol.g_sup,
                        tol_u_zero=0.25 * oracle.c * grid.h[0] ** oracle.q)
        fb = extract_free_boundary(meas)
        res = porosity_estimate(fb, [16.0 / n, 32.0 / n])
        ok &= res.delta_hat > 0.05
        lines.append(f"radial n={n} delta={res.delta_hat:.3f}")

    for n in (128, 256):
        grid, spec, f, gf, sol = lab.vi_2d("variable-p-demo", n)
        fb = extract_free_boundary(sol)
        res = porosity_estimate(fb, [16.0 / n, 32.0 / n])
        ok &= res.delta_hat > 0.05
        lines.append(f"varp n={n} delta={res.delta_hat:.3f}")

    assert report(6, ok, "; ".join(lines))


# ---------------------------------------------------------------------------
# 7. low-gradient layer measure

def test_criterion_07_o_delta(lab):
    ok = True
    lines = []

    # 1D: slope 1/lam, intercept -> 0 under refinement
    intercepts = []
    for n in (512, 1024):
        oracle, grid, spec, f, gf, sol = lab.vi_1d(n=n)
        out = o_delta_measure(sol, spec, [oracle.x_l], 0.15,
                              [0.02, 0.05, 0.08, 0.11, 0.14])
        intercepts.append(abs(out["intercept"]))
        if n == 1024:
            ok &= abs(out["slope"] - 1.0) <= 0.15
            lines.append(f"1d slope={out['slope']:.3f} (target 1.0 +/- 15%)")
    ok &= intercepts[-1] <= intercepts[0] + 1e-4 and intercepts[-1] < 5e-3
    lines.append(f"1d intercepts {intercepts[0]:.2e} -> {intercepts[-1]:.2e}")

    # constant-p 2D presets: measure(delta)/delta bounded
    deltas = [0.02, 0.05, 0.1, 0.2, 0.35, 0.5]
    for kind in ("obstacle-2d", "kappa-2d"):
        grid, spec, f, gf, sol = lab.vi_2d(kind, 512)
        fb = extract_free_boundary(sol)
        centers = fb.cell_centers()
        dists = np.array([grid.distance_to_boundary(c) for c in centers])
        pt = centers[dists.argmax()]
        out = o_delta_measure(sol, spec, pt, 0.15, deltas)
        ratios = [m / d for m, d in zip(out["measures"], deltas)]
        spread = max(ratios) / max(min(ratios), 1e-12)
        ok &= spread <= 3.0
        lines.append(f"{kind} spread={spread:.2f}")

    assert report(7, ok, "; ".join(lines))


# ---------------------------------------------------------------------------
# 8. boundedness of the weighted second-order energy

def test_criterion_08_e_eps_bounded(lab):
    ok = True
    lines = []
    # amplitude-matched data so the whole eps schedule engages the solution
    vals = []
    for k in range(1, 6):
        _, grid, spec, f, gf, sol = lab.penalized_1d(k, lam=8.0, g0=0.5, g1=0.5)
        vals.append(energy_E_eps(sol, 0.45, sol.eps_final))
    spread = max(vals) / min(vals)
    ok &= spread <= 2.0
    lines.append(f"1d E={['%.1f' % v for v in vals]} spread={spread:.2f}")

    vals = []
    for k in range(1, 6):
        grid, spec, f, gf, sol = lab.penalized_2d("obstacle-2d", k, n=128,
                                                  f_val=8.0, g_val=0.5)
        vals.append(energy_E_eps(sol, 0.45, sol.eps_final))
    spread = max(vals) / min(vals)
    ok &= spread <= 2.0
    lines.append(f"2d E={['%.1f' % v for v in vals]} spread={spread:.2f}")
    assert report(8, ok, "; ".join(lines))


# ---------------------------------------------------------------------------
# 9. box-counting interface estimates

def test_criterion_09_box_count(lab):
    ok = True
    lines = []

    # synthetic circle at h = rho / 128, isotropy-corrected
    rho = 0.25
    n = 512
    g2 = Grid([0.0, 0.0], [1.0, 1.0], [n, n])
    mesh = g2.node_mesh()
    d = np.sqrt((mesh[0] - 0.5) ** 2 + (mesh[1] - 0.5) ** 2)
    synth = Solution(u=ScalarField(g2, np.maximum(d - rho, 0.0)),
                     active_mask=d <= rho, residual_history=[], iterations=0,
                     eps_final=None, converged=True, method="synthetic", spec=None,
                     f_sup=1.0, g_sup=1.0, tol_u_zero=1e-7)
    count, est = hausdorff_box_count(extract_free_boundary(synth), [0.5, 0.5], 0.45)
    corrected = est * np.pi / 4.0
    rel = abs(corrected - 2 * np.pi * rho) / (2 * np.pi * rho)
    ok &= rel <= 0.10
    lines.append(f"circle corrected={corrected:.3f} vs {2 * np.pi * rho:.3f} ({rel:.1%})")

    # stability on solved presets
    for kind in ("variable-p-demo", "kappa-2d"):
        ests = []
        for n in (128, 256, 512):
            grid, spec, f, gf, sol = lab.vi_2d(kind, n)
            _, e = hausdorff_box_count(extract_free_boundary(sol), [0.5, 0.5], 0.3)
            ests.append(e)
        changes = [abs(b / a - 1.0) for a, b in zip(ests, ests[1:])]
        ok &= max(changes) < 0.15
        lines.append(f"{kind} changes={['%.1f%%' % (100 * c) for c in changes]}")

    # 1D: two points, estimate exactly 2 at every level
    for n in (128, 512):
        oracle, grid, spec, f, gf, sol = lab.vi_1d(n=n)
        count, est = hausdorff_box_count(extract_free_boundary(sol), [0.5], 0.45)
        ok &= est == pytest.approx(2.0)
    lines.append("1d estimate=2 exactly")
    assert report(9, ok, "; ".join(lines))


# ---------------------------------------------------------------------------
# 10. difference-quotient second-order energy

def test_criterion_10_w22_quotients(lab):
    grid, spec, f, gf, sol = lab.vi_2d("kappa-2d", 256)
    h = grid.h[0]
    out = w22_quotient_energy(sol, [8 * h, 4 * h, 2 * h, h])
    per_tau = {}
    for e in out:
        per_tau[e["tau"]] = per_tau.get(e["tau"], 0.0) + e["energy"]
    vals = list(per_tau.values())
    spread = max(vals) / min(vals)
    ok = spread < 1.25
    assert report(10, ok,
                  f"energies={['%.5f' % v for v in vals]} spread={spread:.3f} (< 1.25)")


# ---------------------------------------------------------------------------
# 11. BV / perimeter

def test_criterion_11_bv_perimeter(lab):
    ok = True
    lines = []

    g2 = Grid([0.0, 0.0], [1.0, 1.0], [64, 64])
    mesh = g2.node_mesh()
    chi = ScalarField(g2, (mesh[0] < 0.5).astype(float))
    tv = bv_norm(chi)
    ok &= tv == pytest.approx(1.0, abs=1e-14)
    lines.append(f"half-plane TV={tv}")

    bvs, pers = [], []
    for n in (128, 256, 512):
        grid, spec, f, gf, sol = lab.vi_2d("kappa-2d", n)
        Au = divergence_of_flux(spec, sol.u)
        bvs.append(bv_norm(Au, region=grid.interior_mask()))
        pers.append(perimeter_of_positivity(sol))
    for name, seq in (("bv(Au)", bvs), ("perimeter", pers)):
        changes = [abs(b / a - 1.0) for a, b in zip(seq, seq[1:])]
        ok &= max(changes) < 0.15
        lines.append(f"{name} changes={['%.1f%%' % (100 * c) for c in changes]}")
    assert report(11, ok, "; ".join(lines))


# ---------------------------------------------------------------------------
# 12. structural verifier and operator blow-up

def test_criterion_12_structural(lab):
    ok = True
    lines = []
    for kappa in (0.0, 0.5):
        spec = OperatorSpec(p=AffineProfile(1.5, [1.5, 0.0], 1.5, 3.0),
                            M=AffineProfile(0.5, [0.0, 1.5], 0.5, 2.0), kappa=kappa)
        grid = Grid([0.0, 0.0], [1.0, 1.0], [8, 8])
        constants = StructuralConstants.for_model(spec, grid, margin=1.05)
        rep = verify_structural(spec, constants, sample_count=100000, seed=0)
        ok &= rep["ellipticity_pass"] and rep["boundedness_pass"]
        lines.append(f"kappa={kappa}: min_ratio={rep['ellipticity_min_ratio']:.3f}"
                     f" >= c0={constants.c0:.3f}")

    spec0 = OperatorSpec(p=AffineProfile(1.5, [1.5, 0.0], 1.5, 3.0),
                         M=ConstantProfile(1.0), kappa=0.0)
    Ls = []
    for j in (0, 2, 4, 6):
        spec_k = blowup_operator(spec0, j, 2.0)
        rep = verify_structural(spec_k, StructuralConstants(0.4, 10.0),
                                sample_count=20000, seed=1)
        Ls.append(rep["lipschitz_max_ratio"])
    monotone = all(b < a for a, b in zip(Ls, Ls[1:]))
    ok &= monotone
    lines.append(f"L_k={['%.4f' % L for L in Ls]} decreasing={monotone}")
    assert report(12, ok, "; ".join(lines))


# ---------------------------------------------------------------------------
# 13. penalization consistency

def test_criterion_13_penalization_consistency(lab):
    _, grid, spec, f, gf, vi = lab.vi_1d(n=256)
    *_, pen = lab.penalized_1d(5, n=256)
    err = float(np.abs(pen.u.values - vi.u.values).max())
    ok = err <= 1e-3
    assert report(13, ok, f"|u_eps - u_vi|_inf = {err:.2e} at h=1/256 (<= 1e-3)")
