"""Connections, curvature, characteristic forms, and integration.

Sign and orientation conventions (fixed once, used everywhere):

* Chern character form: tr exp((i / 2 pi) F) for a unitary connection F.
* Sphere charts are oriented so the charge-1 clutching e^{i phi} line
  bundle integrates its degree-2 character form to +1.
* The multiplicative series (Todd, A-roof) are evaluated through exact
  rational series coefficients and the nilpotent form exponential, so the
  only numerical error is in the curvature samples themselves.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .atlas import Atlas, components, diff_axis
from .bundles import Constant, ProjectiveBundleData
from .errors import (DegreeMismatch, GridTooCoarse, IncompatibleAtlas,
                     SupportLeak)
from .forms import (FormField, base_pullback, exp_series,
                    fiber_pushforward)

TAU_POU = 1e-10
TAU_CONN = 1e-6
TAU_FORM = 1e-5


# ---------------------------------------------------------------------------
# rational power series for the multiplicative classes


def _series_mul(a, b, order):
    out = [Fraction(0)] * (order + 1)
    for i, x in enumerate(a[:order + 1]):
        for j, y in enumerate(b[:order + 1]):
            if i + j <= order:
                out[i + j] += x * y
    return out


def _series_inv(a, order):
    if a[0] == 0:
        raise ZeroDivisionError("series has no constant term")
    out = [Fraction(0)] * (order + 1)
    out[0] = 1 / a[0]
    for k in range(1, order + 1):
        s = Fraction(0)
        for j in range(1, k + 1):
            if j < len(a):
                s += a[j] * out[k - j]
        out[k] = -s / a[0]
    return out


def _series_log1(a, order):
    """log of a power series with constant term 1."""
    u = list(a)
    u[0] = Fraction(0)
    out = [Fraction(0)] * (order + 1)
    term = [Fraction(1)] + [Fraction(0)] * order
    for m in range(1, order + 1):
        term = _series_mul(term, u, order)
        sign = Fraction((-1) ** (m + 1), m)
        for k in range(order + 1):
            out[k] += sign * term[k]
    return out


@functools.lru_cache(maxsize=None)
def todd_log_coefficients(order: int):
    """Coefficients of log( x / (1 - e^{-x}) ) up to x^order, exact."""
    g = [Fraction((-1) ** k, math.factorial(k + 1)) for k in range(order + 1)]
    td = _series_inv(g, order)
    return tuple(_series_log1(td, order))


@functools.lru_cache(maxsize=None)
def a_hat_log_coefficients(order: int):
    """Coefficients of log( (x/2) / sinh(x/2) ) up to x^order, exact."""
    f = [Fraction(0)] * (order + 1)
    for m in range(0, order // 2 + 1):
        f[2 * m] = Fraction(1, (4 ** m) * math.factorial(2 * m + 1))
    inv = _series_inv(f, order)
    return tuple(_series_log1(inv, order))


# ---------------------------------------------------------------------------
# connections


@dataclass
class ConnectionData:
    """Per-patch endomorphism-valued 1-form samples of one connection."""

    bundle: ProjectiveBundleData
    atlas: Atlas
    coefficients: dict           # patch -> (d, *grid, r, r) complex
    curvature_override: FormField = None
    tolerance: float = TAU_CONN

    @property
    def rank(self) -> int:
        return self.bundle.rank

    def one_form(self) -> FormField:
        out = FormField.zero(self.atlas, self.rank)
        for key, A in self.coefficients.items():
            out.data[key][1] = A.copy()
        return out


def _transition_on_pairs(bundle, atlas, a, b, count):
    """Transition samples and chart-a derivatives for the ordered pair (a, b).

    Reversed edges invert the stored samples and convert the stored chart-b
    derivative components through the chart-change Jacobian.
    """
    dim = atlas.dim
    t = bundle.transition(a, b)
    if isinstance(t, Constant):
        vals = np.broadcast_to(t.matrix, (count,) + t.matrix.shape)
        dvals = np.zeros((dim, count) + t.matrix.shape, dtype=complex)
        return vals, dvals
    vals = t.values
    if t.derivative is None:
        return vals, None
    if a < b:
        return vals, t.derivative
    jac_b_to_a = np.linalg.inv(atlas.overlap(a, b).jac_ab)
    dvals = np.einsum("jmkl,mji->imkl", t.derivative, jac_b_to_a)
    return vals, dvals


def _differenced_transition_derivative(atlas, patch_key, idx_a, values):
    """Chart-a derivatives of overlap samples covering the full patch grid."""
    patch = atlas.patches[patch_key]
    if len(idx_a) != patch.size:
        raise IncompatibleAtlas(
            "sampled transition without stored derivative only supports "
            "full-patch overlaps", module="chern-weil",
            operation="average_connection", location=patch_key)
    order = np.argsort(idx_a)
    grid_vals = np.empty((patch.size,) + values.shape[1:], dtype=complex)
    grid_vals[idx_a[order]] = values[order]
    grid_vals = grid_vals.reshape(patch.shape + values.shape[1:])
    derivs = []
    for axis, ax in enumerate(patch.axes):
        d = diff_axis(grid_vals, axis, ax.h, ax.periodic, array_axis=axis)
        derivs.append(d.reshape((patch.size,) + values.shape[1:])[idx_a])
    return np.stack(derivs, axis=0)


def _pull_one_form(values, jac_b_to_a):
    """Pull 1-form components sampled in chart b into chart-a components."""
    # (T* w)_i = sum_j w_j  d x_b^j / d x_a^i
    return np.einsum("jmkl,mji->imkl", values, jac_b_to_a)


def average_connection(E: ProjectiveBundleData, raw: dict, atlas: Atlas,
                       tolerance: float = TAU_CONN) -> ConnectionData:
    """Partition-of-unity average of arbitrary per-patch 1-forms.

    Each neighbour's raw form is transported through the transition into the
    local frame; the central twist scalars conjugate away, which is exactly
    why the average is a single well-defined connection.
    """
    atlas.check_partition_of_unity(TAU_POU)
    coeffs = {}
    for a, patch in atlas.patches.items():
        d = patch.dim
        r = E.rank
        pou_a = patch.pou.reshape(-1)
        acc = raw[a].reshape((d, patch.size, r, r)) * pou_a[None, :, None, None]
        for b in atlas.patches:
            if b == a or not atlas.has_overlap(a, b):
                continue
            ov = atlas.overlap(a, b)
            pou_b = atlas.patches[b].pou.reshape(-1)[ov.idx_b]
            raw_b = raw[b].reshape((d, atlas.patches[b].size, r, r))[:, ov.idx_b]
            jac_b_to_a = np.linalg.inv(ov.jac_ab)
            pulled = _pull_one_form(raw_b, jac_b_to_a)
            q, dq = _transition_on_pairs(E, atlas, a, b, len(ov.idx_a))
            if dq is None:
                t = E.transition(a, b)
                dq = _differenced_transition_derivative(atlas, a, ov.idx_a,
                                                        t.values)
            qinv = np.linalg.inv(q)
            transported = q[None] @ pulled @ qinv[None] - dq @ qinv[None]
            acc[:, ov.idx_a] += pou_b[None, :, None, None] * transported
        coeffs[a] = acc.reshape((d,) + patch.shape + (r, r))
    conn = ConnectionData(bundle=E, atlas=atlas, coefficients=coeffs,
                          tolerance=tolerance)
    res = compatibility_residual(conn)
    if res > tolerance:
        raise IncompatibleAtlas(
            "averaged connection compatibility residual %.3g exceeds %.3g"
            % (res, tolerance),
            module="chern-weil", operation="average_connection")
    return conn


def compatibility_residual(conn: ConnectionData) -> float:
    """Worst overlap mismatch of A_b against the transported A_a."""
    atlas = conn.atlas
    E = conn.bundle
    worst = 0.0
    for (a, b) in atlas.overlaps:
        ov = atlas.overlap(a, b)
        d = atlas.patches[a].dim
        r = conn.rank
        A_a = conn.coefficients[a].reshape((d, -1, r, r))[:, ov.idx_a]
        A_b = conn.coefficients[b].reshape((d, -1, r, r))[:, ov.idx_b]
        q, dq = _transition_on_pairs(E, atlas, a, b, len(ov.idx_a))
        if dq is None:
            t = E.transition(a, b)
            dq = _differenced_transition_derivative(atlas, a, ov.idx_a, t.values)
        qinv = np.linalg.inv(q)
        # A in chart-b components, derived from chart a:
        rhs_chart_a = qinv[None] @ A_a @ q[None] + qinv[None] @ dq
        rhs = _pull_one_form(rhs_chart_a, ov.jac_ab)
        resid = np.abs(A_b - rhs)
        if resid.size:
            worst = max(worst, float(np.max(resid)))
    return worst


def curvature(conn: ConnectionData) -> FormField:
    """F = dA + A wedge A, or the analytic override when present."""
    if conn.curvature_override is not None:
        return conn.curvature_override
    for patch in conn.atlas.patches.values():
        if min(ax.n for ax in patch.axes) < 3:
            raise GridTooCoarse("differencing stencil leaves the domain",
                                module="chern-weil", operation="curvature")
    A = conn.one_form()
    return A.exterior_derivative() + A.wedge(A)


def chern_character_form(F: FormField, rank: int = None) -> FormField:
    """tr exp((i / 2 pi) F), truncated at the base dimension (exactly)."""
    if not F.matrix_rank and rank is None:
        raise DegreeMismatch("curvature field must be endomorphism-valued",
                             module="chern-weil",
                             operation="chern_character_form")
    r = F.matrix_rank or rank
    M = F.scaled(1j / (2 * np.pi))
    out = FormField.constant(F.atlas, float(r))
    mmax = F.dim // 2
    power = None
    for m in range(1, mmax + 1):
        power = M if power is None else power.wedge(M)
        out = out + power.trace().scaled(1.0 / math.factorial(m))
    return out


def _log_series_form(F: FormField, coeffs) -> FormField:
    M = F.scaled(1j / (2 * np.pi))
    L = FormField.zero(F.atlas, 0)
    mmax = F.dim // 2
    power = None
    for m in range(1, mmax + 1):
        c = float(coeffs[m]) if m < len(coeffs) else 0.0
        power = M if power is None else power.wedge(M)
        if c:
            L = L + power.trace().scaled(c)
    return L


def todd_form(F: FormField, inverse: bool = False) -> FormField:
    """Todd form of a curvature field via the exact rational series."""
    coeffs = todd_log_coefficients(F.dim // 2 if F.dim else 0)
    L = _log_series_form(F, coeffs)
    if inverse:
        L = L.scaled(-1.0)
    return exp_series(L)


def a_hat_form(F: FormField) -> FormField:
    """A-roof form of a curvature field via the exact rational series."""
    coeffs = a_hat_log_coefficients(F.dim // 2 if F.dim else 0)
    return exp_series(_log_series_form(F, coeffs))


def integrate(omega: FormField, atlas: Atlas) -> complex:
    """Pair the top-degree component with the fundamental cycle.

    Deterministic summation: patches in key order, nodes in C order, with
    the partition of unity as the only weighting beside the cell measure.
    """
    d = atlas.dim
    seen = False
    total = 0.0 + 0.0j
    for key in sorted(atlas.patches):
        arr = omega.data.get(key, {}).get(d)
        patch = atlas.patches[key]
        if arr is None:
            continue
        seen = True
        total += patch.node_weight * np.sum(patch.pou.reshape(-1)
                                            * arr[0].reshape(-1))
    if not seen:
        raise DegreeMismatch("no top-degree component to integrate",
                             module="chern-weil", operation="integrate")
    return complex(total)


def average_scalar(omega: FormField, atlas: Atlas, degree: int = 0):
    """Area-weighted mean and max deviation of a (locally constant) component."""
    num = 0.0 + 0.0j
    den = 0.0
    vals = []
    for key in sorted(atlas.patches):
        patch = atlas.patches[key]
        arr = omega.data.get(key, {}).get(degree)
        if arr is None:
            continue
        w = (patch.pou * patch.volume).reshape(-1) * patch.node_weight
        v = arr[0].reshape(-1)
        num += np.sum(w * v)
        den += float(np.sum(w))
        vals.append(v)
    if den == 0.0:
        return 0.0 + 0.0j, 0.0
    mean = num / den
    dev = max(float(np.max(np.abs(v - mean))) for v in vals) if vals else 0.0
    return complex(mean), dev


def det_line_c1(conn: ConnectionData):
    """First character form of the determinant line: (i / 2 pi) tr F.

    Returns the 2-form field and its fundamental-cycle integral; it equals
    the degree-2 component of the character form identically.
    """
    F = curvature(conn)
    c1 = F.trace().scaled(1j / (2 * np.pi)).extract(2)
    if conn.atlas.dim == 2:
        return c1, integrate(c1, conn.atlas)
    return c1, 0.0 + 0.0j


# ---------------------------------------------------------------------------
# compactly supported character form on a disc bundle


@dataclass
class ThomProfile:
    """Gaussian profile cut smoothly to reach 1 exactly before the boundary."""

    sigma: float
    radius: float
    cut_start: float = 0.55
    cut_end: float = 0.85

    def chi(self, rho):
        from .atlas import smoothstep_flat
        t = rho / self.radius
        eta = 1.0 - smoothstep_flat((t - self.cut_start)
                                    / (self.cut_end - self.cut_start))
        return 1.0 - np.exp(-rho ** 2 / (2 * self.sigma ** 2)) * eta

    def chi_prime(self, rho, h: float = None):
        # differentiate the closed form numerically on a refined private grid
        eps = 1e-6 * self.radius
        return (self.chi(rho + eps) - self.chi(rho - eps)) / (2 * eps)


@dataclass
class ThomRRResult:
    lhs: float
    rhs: float
    residual: float
    boundary_leak: float
    pushforward_deviation: float


def thom_character_form(product: Atlas, alpha_phi: dict, dalpha: dict,
                        profile: ThomProfile) -> FormField:
    """Difference character form of the spinor pair coupled to the section.

    ``alpha_phi[key]`` samples the base connection coefficient alpha_phi on
    the base grid of each patch (the potential is alpha = alpha_phi d phi,
    A = i alpha); ``dalpha[key]`` samples its s-derivative.  The curvature of
    the interpolated connection is supplied analytically, keeping the
    construction free of differencing error.
    """
    base = product.base
    out = None
    for key, patch in product.patches.items():
        bshape = base.patches[key].shape
        rho = patch.axes[2].nodes
        chi = profile.chi(rho)
        chip = profile.chi_prime(rho)
        a_phi = np.asarray(alpha_phi[key])          # (*bshape,)
        da = np.asarray(dalpha[key])                # (*bshape,) d alpha_phi / ds
        full = bshape + (patch.axes[2].n, patch.axes[3].n)

        def lift(vals_b, vals_rho):
            return (vals_b[..., None, None]
                    * vals_rho[None, None, :, None]) * np.ones(full)

        ncomp2 = len(components(4, 2))
        F_chi = np.zeros((ncomp2,) + full + (1, 1), dtype=complex)
        comp2 = {c: i for i, c in enumerate(components(4, 2))}
        F_chi[comp2[(0, 1)], ..., 0, 0] = -1j * lift(da, chi)
        F_chi[comp2[(1, 2)], ..., 0, 0] = +1j * lift(a_phi, chip)
        F_chi[comp2[(2, 3)], ..., 0, 0] = np.broadcast_to(
            (-1j * chip)[None, None, :, None], full)

        F_star = np.zeros((ncomp2,) + full + (1, 1), dtype=complex)
        F_star[comp2[(0, 1)], ..., 0, 0] = -1j * lift(da, np.ones_like(chi))

        ff_chi = FormField.zero(product, 1)
        ff_star = FormField.zero(product, 1)
        ff_chi.data[key][2] = F_chi
        ff_star.data[key][2] = F_star
        ch = chern_character_form(ff_chi) - chern_character_form(ff_star)
        out = ch if out is None else out + ch
    # drop the cancelled constant parts explicitly
    for per in out.data.values():
        if 0 in per:
            del per[0]
    return out


def thom_rr_check(base_atlas: Atlas, product: Atlas, alpha_phi: dict,
                  dalpha: dict, F_curv: FormField, F_rank: int,
                  E_curv: FormField, profile: ThomProfile,
                  leak_tolerance: float = 1e-6) -> ThomRRResult:
    """Two-sided pairing check of the pushforward identity on a line bundle.

    Left side: the compactly supported difference character form built from
    the spinor pair on the disc bundle, wedged with the lifted test-bundle
    character, then paired fiber-first (fiber cycle plus fundamental cycle).
    Right side: the inverse Todd form of the line bundle times the test
    character, paired on the base.  Returns both values and the residual.
    """
    U = thom_character_form(product, alpha_phi, dalpha, profile)

    leak = 0.0
    for key, per in U.data.items():
        for arr in per.values():
            ring = arr[:, ..., -1, :]
            if ring.size:
                leak = max(leak, float(np.max(np.abs(ring))))
    if leak > leak_tolerance:
        raise SupportLeak("character form leaks %.3g at the disc boundary"
                          % leak, leak=leak, module="chern-weil",
                          operation="thom_rr_check")

    chF = chern_character_form(F_curv, rank=F_rank)
    omega = U.wedge(base_pullback(chF, product))
    push = fiber_pushforward(omega)
    mean0, dev0 = average_scalar(push, base_atlas, 0)
    lhs = mean0 + integrate(push, base_atlas)

    td_inv = todd_form(E_curv, inverse=True)
    rhs_form = td_inv.wedge(chF)
    mean_r, dev_r = average_scalar(rhs_form, base_atlas, 0)
    rhs = mean_r + integrate(rhs_form, base_atlas)

    lhs_r, rhs_r = complex(lhs), complex(rhs)
    return ThomRRResult(lhs=lhs_r.real, rhs=rhs_r.real,
                        residual=abs(lhs_r - rhs_r),
                        boundary_leak=leak,
                        pushforward_deviation=max(dev0, dev_r))
