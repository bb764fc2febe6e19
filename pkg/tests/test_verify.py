from dataclasses import replace

import numpy as np
import pytest

from gerbe_index.atlas import sphere_three_patch, sphere_two_patch
from gerbe_index.bundles import check_equivalence_witness, gauge_twist
from gerbe_index.chernweil import average_scalar, integrate
from gerbe_index.errors import NotDiracPreset, NotElliptic
from gerbe_index.family import FamilyPreset, FamilySpec, FiberModel, stabilize
from gerbe_index.fixtures import (STABILIZER_MARGIN, bott_toeplitz_family,
                                  dirac_twist_family, gauge_transform_family,
                                  interval_cover, mixed_stabilizer_columns,
                                  untwisted_pattern, winding_family)
from gerbe_index.verify import (dirac_index_chern, run_pipelines,
                                symbol_class, topological_index_chern,
                                transgression_form, verify_family)

ANGLE = dict(chart="angle")


def test_winding_degree_zero_all_m():
    atlas = sphere_two_patch(12, **ANGLE)
    for m in (0, 1, 2, 4):
        F = winding_family(atlas, m, truncation=6)
        S = symbol_class(F)
        form = topological_index_chern(S)
        val, dev = average_scalar(form, atlas, 0)
        assert abs(val.real + m) < 1e-12
        assert dev < 1e-10
        assert abs(integrate(form, atlas)) < 1e-12   # no 2-form content


def test_degree_zero_matches_single_point_svd():
    # single-point oracle: dim ker - dim coker of the compressed multiplier
    atlas = sphere_two_patch(8, **ANGLE)
    for m in (1, 3):
        F = winding_family(atlas, m, truncation=6)
        P = F.operator_in_chart(0)[0]
        sv = np.linalg.svd(P, compute_uv=False)
        rank = int(np.sum(sv > 1e-10))
        dim_ker = P.shape[1] - rank
        dim_coker = P.shape[0] - rank
        S = symbol_class(F)
        val, _ = average_scalar(topological_index_chern(S), atlas, 0)
        assert dim_ker - dim_coker == int(round(val.real)) == -m


def test_identity_clutching_gives_zero_form():
    atlas = sphere_two_patch(12, **ANGLE)
    F = winding_family(atlas, 0, truncation=4)
    form = topological_index_chern(symbol_class(F))
    val, _ = average_scalar(form, atlas, 0)
    assert abs(val) < 1e-13
    assert abs(integrate(form, atlas)) < 1e-13


def test_bott_dual_pipeline_and_det_line():
    atlas = sphere_two_patch(32, **ANGLE)
    F = bott_toeplitz_family(atlas, truncation=8)
    res = run_pipelines(F, stab=stabilize(F, sv_min=STABILIZER_MARGIN))
    assert res.analytic_deg0 == -1.0
    assert abs(res.topological_deg0 + 1.0) < 1e-10
    assert abs(res.analytic_deg2 + 1.0) < 2e-2
    assert abs(res.analytic_deg2 - res.topological_deg2) < 1e-3
    assert abs(res.det_line - res.analytic_deg2) < 1e-12


def test_adjoint_negates_both_pipelines():
    atlas = sphere_two_patch(24, **ANGLE)
    F = bott_toeplitz_family(atlas, truncation=8)
    res = run_pipelines(F, stab=stabilize(F, sv_min=STABILIZER_MARGIN))
    Fa = replace(F, adjoint=True)
    resa = run_pipelines(Fa, stab=stabilize(Fa, sv_min=STABILIZER_MARGIN))
    assert resa.analytic_deg0 == -res.analytic_deg0
    assert abs(resa.topological_deg0 + res.topological_deg0) < 1e-10
    assert abs(resa.analytic_deg2 + res.analytic_deg2) < 1e-10
    assert abs(resa.topological_deg2 + res.topological_deg2) < 1e-10


def test_topological_homotopy_invariance():
    atlas = sphere_two_patch(16, **ANGLE)
    F = bott_toeplitz_family(atlas, truncation=6)
    base = integrate(topological_index_chern(symbol_class(F)), atlas).real

    fiber = F.fiber
    spin = F.preset

    def perturbed(points, thetas):
        w = spin.clutching(points, thetas)
        bump = 0.02 * np.exp(1j * thetas)[None, :, None, None] * np.eye(2)
        return w + bump

    Fp = replace(F, preset=FamilyPreset("toeplitz-clutching", fiber,
                                        perturbed,
                                        spill_projector=spin.spill_projector))
    pert = integrate(topological_index_chern(symbol_class(Fp)), atlas).real
    assert abs(pert - base) < 1e-4


def test_gauge_invariance_of_reported_integrals():
    atlas = sphere_three_patch(16, **ANGLE)
    F = bott_toeplitz_family(atlas, truncation=6, twisted=True)
    res = run_pipelines(F, stab=stabilize(F, sv_min=STABILIZER_MARGIN))
    for mu in ((1, 0, 0), (0, 1, 1), (1, 1, 1)):
        Fg = gauge_transform_family(F, mu)
        resg = run_pipelines(Fg, stab=stabilize(Fg, sv_min=STABILIZER_MARGIN))
        assert abs(resg.analytic_deg2 - res.analytic_deg2) < 1e-8
        assert abs(resg.topological_deg2 - res.topological_deg2) < 1e-8
        assert abs(resg.det_line - res.det_line) < 1e-8


def test_twisted_untwists_to_untwisted_index():
    atlas = sphere_three_patch(16, **ANGLE)
    Ft = bott_toeplitz_family(atlas, truncation=6, twisted=True)
    Fu = bott_toeplitz_family(atlas, truncation=6, twisted=False)
    it_ = run_pipelines(Ft, stab=stabilize(Ft, sv_min=STABILIZER_MARGIN))
    iu = run_pipelines(Fu, stab=stabilize(Fu, sv_min=STABILIZER_MARGIN))
    untw = gauge_twist(it_.index_bundle.difference.plus, (1, 0, 0))
    eye = {v: np.eye(1, dtype=complex) for v in range(3)}
    assert check_equivalence_witness(untw, iu.index_bundle.difference.plus,
                                     eye, tolerance=1e-8)


def test_stabilizer_independence():
    atlas = sphere_two_patch(24, **ANGLE)
    F = bott_toeplitz_family(atlas, truncation=8)
    s1 = stabilize(F, sv_min=STABILIZER_MARGIN)
    cols = mixed_stabilizer_columns(F.target_dim(), s1.count)
    s2 = stabilize(F, columns=cols, sv_min=STABILIZER_MARGIN)
    r1 = run_pipelines(F, stab=s1)
    r2 = run_pipelines(F, stab=s2)
    assert s1.count == s2.count == 2
    assert abs(r1.analytic_deg2 - r2.analytic_deg2) < 1e-3


def test_dirac_paths():
    atlas = sphere_two_patch(16, **ANGLE)
    Fd = dirac_twist_family(atlas, truncation=6)
    form = dirac_index_chern(Fd)
    topo = topological_index_chern(symbol_class(Fd))
    assert abs(integrate(form, atlas) - integrate(topo, atlas)) < 1e-12
    d0, _ = average_scalar(form, atlas, 0)
    assert abs(d0.real + 1.0) < 1e-10

    F = bott_toeplitz_family(atlas, truncation=6)
    with pytest.raises(NotDiracPreset):
        dirac_index_chern(F)


def test_dirac_trivial_twists_give_zero():
    atlas = sphere_two_patch(12, **ANGLE)
    fiber = FiberModel(4, 1)
    pattern = untwisted_pattern(interval_cover(), atlas)

    def const_clutch(points, thetas):
        return np.ones((points.shape[0], len(thetas), 1, 1), dtype=complex)

    def pullback_clutch(points, thetas):
        ph = np.exp(1j * 0.7 * points[:, 2])
        return np.broadcast_to(ph[:, None, None, None],
                               (points.shape[0], len(thetas), 1, 1))

    for clutch in (const_clutch, pullback_clutch):
        preset = FamilyPreset("dirac-twist", fiber, clutch, dirac=True)
        F = FamilySpec(atlas=atlas, preset=preset, plus=pattern, minus=pattern)
        form = dirac_index_chern(F)
        d0, _ = average_scalar(form, atlas, 0)
        assert abs(d0) < 1e-12
        assert abs(integrate(form, atlas)) < 1e-12


def test_not_elliptic_raises():
    atlas = sphere_two_patch(8, **ANGLE)
    fiber = FiberModel(4, 1)
    pattern = untwisted_pattern(interval_cover(), atlas)

    def clutch(points, thetas):
        val = (1 - np.cos(thetas))[None, :]
        return np.broadcast_to(val[..., None, None],
                               (points.shape[0], len(thetas), 1, 1)).astype(complex)

    preset = FamilyPreset("multiplier", fiber, clutch)
    F = FamilySpec(atlas=atlas, preset=preset, plus=pattern, minus=pattern)
    with pytest.raises(NotElliptic):
        symbol_class(F)


def test_verify_family_report_structure():
    atlas = sphere_two_patch(16, **ANGLE)
    F = bott_toeplitz_family(atlas, truncation=6)
    report = verify_family(F, "unit-fixture", tolerance=5e-2,
                           stab=stabilize(F, sv_min=STABILIZER_MARGIN))
    names = [r.name for r in report.rows]
    assert names == ["index-degree-0", "index-degree-2", "det-line-degree-2"]
    assert report.passed
    text = report.to_machine_text()
    assert text.startswith("gerbe-index-report v1")
    assert "index-degree-2" in text


def test_transgression_odd_powers_only():
    # the degree-0 part of the transgression of a constant scalar vanishes
    atlas = sphere_two_patch(8, **ANGLE)
    F = winding_family(atlas, 0, truncation=4)
    form = transgression_form(F, +1, 16)
    assert form.max_abs() < 1e-14


def test_stabilizer_homotopy_invariance():
    # linear interpolation between two admissible stabilizers keeps the
    # degree-2 integral fixed inside 1e-4 (gauge spread shrinks like h^2;
    # near the default resolution it sits well under the bound)
    atlas = sphere_two_patch(48, **ANGLE)
    F = bott_toeplitz_family(atlas, truncation=8)
    s0 = stabilize(F, sv_min=STABILIZER_MARGIN)
    cols1 = mixed_stabilizer_columns(F.target_dim(), s0.count)
    vals = []
    for t in (0.0, 0.5, 1.0):
        cols = (1 - t) * s0.columns + t * cols1
        st = stabilize(F, columns=cols, sv_min=STABILIZER_MARGIN)
        assert st.count == s0.count
        vals.append(run_pipelines(F, stab=st).analytic_deg2)
    assert max(vals) - min(vals) < 1e-4
