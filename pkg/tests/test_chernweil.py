import numpy as np
import pytest

from gerbe_index.atlas import Atlas, Axis, Patch, sphere_three_patch, \
    sphere_two_patch
from gerbe_index.bundles import validate
from gerbe_index.chernweil import (ConnectionData, a_hat_form,
                                   a_hat_log_coefficients, average_connection,
                                   average_scalar, chern_character_form,
                                   compatibility_residual, curvature,
                                   det_line_c1, integrate, thom_rr_check,
                                   todd_form, todd_log_coefficients)
from gerbe_index.errors import DegreeMismatch, GridTooCoarse, SupportLeak
from gerbe_index.forms import FormField, overlap_residual
from gerbe_index.fixtures import (monopole_bundle, monopole_connection,
                                  monopole_curvature_override,
                                  monopole_potential, thom_line_scenario,
                                  twisted_monopole)
from fractions import Fraction


def test_series_coefficients_frozen():
    # oracle: hand-expanded series of the two multiplicative classes
    assert todd_log_coefficients(4) == (0, Fraction(1, 2), Fraction(-1, 24),
                                        0, Fraction(1, 2880))
    assert a_hat_log_coefficients(4) == (0, 0, Fraction(-1, 24), 0,
                                         Fraction(1, 2880))


def test_todd_series_on_line_curvature():
    # exp of the log series must reproduce 1 + x/2 + x^2/12 for a line bundle
    c = todd_log_coefficients(4)
    x = 0.1
    log_val = float(c[1]) * x + float(c[2]) * x * x
    td = np.exp(log_val)
    assert abs(td - (1 + x / 2 + x * x / 12)) < 1e-5


def test_flat_connection_zero_curvature():
    atlas = sphere_two_patch(16)
    E = monopole_bundle(atlas, 0)
    conn = ConnectionData(bundle=E, atlas=atlas,
                          coefficients=monopole_potential(atlas, 0))
    F = curvature(conn)
    assert F.max_abs() < 1e-14
    ch = chern_character_form(F)
    mean, dev = average_scalar(ch, atlas, 0)
    assert abs(mean - 1.0) < 1e-14 and dev < 1e-14


def test_monopole_charge_integrals():
    atlas = sphere_two_patch(32)
    for k in (1, 2, -3):
        conn = monopole_connection(atlas, k)
        val = integrate(chern_character_form(curvature(conn)), atlas)
        assert abs(val.real - k) < 5e-6 * max(1, abs(k))
        assert abs(val.imag) < 1e-12


def test_monopole_convergence_order_two():
    errs = {}
    for n in (32, 64):
        atlas = sphere_two_patch(n)
        conn = monopole_connection(atlas, 1)
        errs[n] = abs(integrate(chern_character_form(curvature(conn)),
                                atlas).real - 1.0)
    assert 3.0 < errs[32] / errs[64] < 5.0


def test_differenced_vs_analytic_curvature():
    devs = {}
    for n in (16, 32):
        atlas = sphere_two_patch(n)
        Fd = curvature(monopole_connection(atlas, 1, analytic=False))
        Fa = curvature(monopole_connection(atlas, 1, analytic=True))
        devs[n] = (Fd - Fa).max_abs()
    assert 3.0 < devs[16] / devs[32] < 5.0


def test_curvature_overlap_covariance():
    atlas = sphere_two_patch(16)
    F = curvature(monopole_connection(atlas, 2))
    c1 = F.trace().scaled(1j / (2 * np.pi))
    assert overlap_residual(c1) < 1e-10


def test_connection_compatibility_residual():
    atlas = sphere_two_patch(24)
    conn = monopole_connection(atlas, 1)
    assert compatibility_residual(conn) < 1e-12


def test_average_reproduces_compatible_input():
    atlas = sphere_two_patch(16)
    E = monopole_bundle(atlas, 1)
    raw = monopole_potential(atlas, 1)
    avg = average_connection(E, raw, atlas)
    for key in raw:
        assert np.max(np.abs(avg.coefficients[key] - raw[key])) < 1e-12


def test_average_of_zero_on_trivial_bundle():
    atlas = sphere_two_patch(16)
    E = monopole_bundle(atlas, 0)
    raw = {k: np.zeros((2,) + atlas.patches[k].shape + (1, 1), dtype=complex)
           for k in atlas.patches}
    avg = average_connection(E, raw, atlas)
    for key in raw:
        assert np.max(np.abs(avg.coefficients[key])) < 1e-14


def test_average_random_raw_is_compatible():
    rng = np.random.default_rng(6)
    atlas = sphere_three_patch(24)
    tm = twisted_monopole(atlas, 1)
    E = tm.unit      # constant transitions, coboundary twist
    raw = {k: (rng.standard_normal((2,) + atlas.patches[k].shape + (1, 1))
               + 1j * rng.standard_normal((2,) + atlas.patches[k].shape
                                          + (1, 1)))
           for k in atlas.patches}
    avg = average_connection(E, raw, atlas, tolerance=1e-8)
    assert compatibility_residual(avg) < 1e-8


def test_todd_and_a_hat_of_flat_are_one():
    atlas = sphere_two_patch(8)
    flat = FormField.zero(atlas, 1)
    for form in (todd_form(flat), a_hat_form(flat)):
        mean, dev = average_scalar(form, atlas, 0)
        assert abs(mean - 1.0) < 1e-14 and dev < 1e-14


def test_todd_inverse_multiplies_to_one():
    atlas = sphere_two_patch(16)
    F = monopole_curvature_override(atlas, 2)
    prod = todd_form(F).wedge(todd_form(F, inverse=True))
    mean, dev = average_scalar(prod, atlas, 0)
    assert abs(mean - 1.0) < 1e-13
    assert abs(integrate(prod, atlas)) < 1e-13


def test_chern_character_multiplicative_under_tensor():
    # Ch of a Kronecker product curvature = product of the Ch forms
    atlas = sphere_two_patch(16)
    F1 = monopole_curvature_override(atlas, 1)
    F2 = monopole_curvature_override(atlas, 2)
    # rank-1 tensor: curvature adds
    F12 = F1 + F2
    ch = chern_character_form(F12)
    prod = chern_character_form(F1).wedge(chern_character_form(F2))
    assert abs(integrate(ch, atlas) - integrate(prod, atlas)) < 1e-12


def test_det_line_equals_degree_two_of_character():
    atlas = sphere_two_patch(16)
    conn = monopole_connection(atlas, 3)
    c1, c1_int = det_line_c1(conn)
    ch2 = integrate(chern_character_form(curvature(conn)), atlas)
    assert abs(c1_int - ch2) < 1e-14


def test_integrate_requires_top_degree():
    atlas = sphere_two_patch(8)
    w = FormField.constant(atlas, 1.0)
    with pytest.raises(DegreeMismatch):
        integrate(w, atlas)


def test_integrate_constant_over_unit_area():
    axes = (Axis(8, 0.0, 1.0), Axis(8, 0.0, 1.0))
    atlas = Atlas(patches={0: Patch(axes=axes)})
    w = FormField.zero(atlas)
    w.data[0][2] = np.ones((1, 8, 8), dtype=complex)
    assert abs(integrate(w, atlas) - 1.0) < 1e-14


def test_grid_too_coarse():
    axes = (Axis(2, 0.0, 1.0), Axis(8, 0.0, 1.0))
    atlas = Atlas(patches={0: Patch(axes=axes)})
    E = None
    conn = ConnectionData(bundle=E, atlas=atlas,
                          coefficients={0: np.zeros((2, 2, 8, 1, 1))})
    with pytest.raises(GridTooCoarse):
        curvature(conn)


def test_thom_rr_cases():
    for (e, f), expect in (((0, 0), 1.0), ((1, 0), 0.5), ((2, 1), 1.0)):
        sc = thom_line_scenario(e, f, n_base=24, n_rho=40)
        res = thom_rr_check(sc.base, sc.product, sc.alpha_phi, sc.dalpha,
                            sc.F_curv, sc.F_rank, sc.E_curv, sc.profile)
        assert res.residual < 1.5e-3
        assert abs(res.rhs - expect) < 1e-5
        assert res.boundary_leak < 1e-6
        assert res.pushforward_deviation < 1e-10


def test_thom_support_leak_detection():
    sc = thom_line_scenario(1, 0, n_base=12, n_rho=24)
    sc.profile.sigma = sc.profile.radius        # fat profile leaks
    sc.profile.cut_start = 2.0                  # disable the cut
    sc.profile.cut_end = 3.0
    with pytest.raises(SupportLeak):
        thom_rr_check(sc.base, sc.product, sc.alpha_phi, sc.dalpha,
                      sc.F_curv, sc.F_rank, sc.E_curv, sc.profile)
