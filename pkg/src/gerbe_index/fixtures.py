"""Bundled fixtures: complexes, covers, bundles, connections, families.

Conventions used by every fixture (documented once here):

* Sphere charts are the two graded polar caps of ``sphere_two_patch``; the
  chart orientation (radial first, azimuth second) is positive.
* The charge-k clutching line bundle ("monopole(k)") has component
  transition Q_NS = e^{i k phi} and per-patch potential
  A = -i (k/2) T(s) d phi, so its degree-2 character integrates to +k.
* The spin-projector family uses the azimuth-reversed unit-vector map, so
  the stabilized clutching family has index character integral -1 in
  degree 2 (matching the documented orientation convention).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .atlas import Atlas, disc_bundle_atlas, sphere_two_patch
from .bundles import (Constant, OrdinaryBundleData, ProjectiveBundleData,
                      Sampled, gauge_twist, tensor_ordinary)
from .chernweil import ConnectionData, ThomProfile
from .family import (FamilySpec, FiberModel, dirac_twist_preset,
                     toeplitz_clutching_preset, winding_scalar_preset)
from .forms import FormField
from .gerbe import CombinatorialCover, GerbeCocycle, zero_twist
from .intmat import smith_normal_form, solve_integer
from .simplicial import SimplicialComplex, cohomology_group, suspension

RP2_TRIANGLES = ((0, 1, 4), (0, 1, 5), (0, 2, 3), (0, 2, 4), (0, 3, 5),
                 (1, 2, 3), (1, 2, 5), (1, 3, 4), (2, 4, 5), (3, 4, 5))


def rp2_six_vertex() -> SimplicialComplex:
    """Minimal 6-vertex triangulation of the real projective plane."""
    return SimplicialComplex.from_simplices(6, RP2_TRIANGLES)


def suspended_rp2() -> SimplicialComplex:
    return suspension(rp2_six_vertex())


def suspended_rp2_z2_cocycle():
    """The nontrivial residue 2-cocycle whose connecting image generates
    the degree-3 torsion.

    Construction: take the torsion generator g of the degree-3 group (order
    2), solve d s = 2 g exactly for an integer 2-cochain s, and reduce s
    mod 2.  The connecting map then lands back on the class of g.
    """
    X = suspended_rp2()
    group = cohomology_group(X, 3)
    if group.torsion != (2,) or group.free_rank != 0:
        raise AssertionError("unexpected degree-3 cohomology of the fixture")
    g = list(group.generators[0])
    A = X.coboundary_matrix(2)
    s = solve_integer(smith_normal_form(A), [2 * x for x in g])
    if s is None:
        raise AssertionError("doubled torsion generator is not a coboundary")
    theta = tuple(x % 2 for x in s)
    return X, theta


def interval_cover() -> CombinatorialCover:
    return CombinatorialCover(SimplicialComplex.from_simplices(2, [(0, 1)]))


def triangle_cover() -> CombinatorialCover:
    return CombinatorialCover(SimplicialComplex.from_simplices(3, [(0, 1, 2)]))


# ---------------------------------------------------------------------------
# monopole data


def _pair_phi_values(atlas: Atlas, a: int, b: int) -> np.ndarray:
    """Azimuth coordinate of the chart-a node at every (a, b) pair."""
    ov = atlas.overlap(a, b)
    patch = atlas.patches[a]
    grids = patch.grids()
    return grids[1].reshape(-1)[ov.idx_a]


def monopole_bundle(atlas: Atlas, charge: int) -> OrdinaryBundleData:
    """Charge-k clutching line bundle on the two-patch sphere atlas."""
    cover = interval_cover()
    phi = _pair_phi_values(atlas, 0, 1)
    vals = np.exp(1j * charge * phi)[:, None, None]
    dvals = np.zeros((2,) + vals.shape, dtype=complex)
    dvals[1] = 1j * charge * vals
    transitions = {(0, 1): Sampled(vals, dvals)}
    return OrdinaryBundleData(cover=cover, rank=1, twist=zero_twist(cover),
                              transitions=transitions, hermitian=True,
                              atlas=atlas)


def monopole_potential(atlas: Atlas, charge: int, keys=None) -> dict:
    """Per-patch 1-form coefficients A = -i (k/2) T(s) d phi."""
    T = atlas.meta["T"]
    out = {}
    for key in (keys if keys is not None else atlas.patches):
        patch = atlas.patches[key]
        s = patch.axes[0].nodes
        A = np.zeros((2,) + patch.shape + (1, 1), dtype=complex)
        A[1, ..., 0, 0] = (-0.5j * charge * T(s))[:, None]
        out[key] = A
    return out


def monopole_curvature_override(atlas: Atlas, charge: int) -> FormField:
    """Analytic curvature F = -i (k/2) T'(s) ds wedge dphi."""
    Tp = atlas.meta["Tp"]
    out = FormField.zero(atlas, 1)
    for key, patch in atlas.patches.items():
        s = patch.axes[0].nodes
        arr = np.zeros((1,) + patch.shape + (1, 1), dtype=complex)
        arr[0, ..., 0, 0] = (-0.5j * charge * Tp(s))[:, None]
        out.data[key][2] = arr
    return out


def monopole_connection(atlas: Atlas, charge: int, analytic: bool = False,
                        bundle: ProjectiveBundleData = None) -> ConnectionData:
    E = bundle if bundle is not None else monopole_bundle(atlas, charge)
    conn = ConnectionData(
        bundle=E, atlas=atlas,
        coefficients=monopole_potential(atlas, charge),
        curvature_override=monopole_curvature_override(atlas, charge)
        if analytic else None)
    return conn


# ---------------------------------------------------------------------------
# residue-twisted data on the three-patch sphere


@dataclass
class TwistedMonopole:
    bundle: ProjectiveBundleData     # twisted rank-1 data
    unit: ProjectiveBundleData       # the twisted-trivial rank-1 pattern
    monopole: OrdinaryBundleData
    twist: GerbeCocycle
    witness_mu: tuple                # residue 1-cochain with twist = d mu
    atlas: Atlas
    charge: int

    def connection(self, analytic: bool = False) -> ConnectionData:
        return ConnectionData(
            bundle=self.bundle, atlas=self.atlas,
            coefficients=monopole_potential(self.atlas, self.charge),
            curvature_override=monopole_curvature_override(self.atlas,
                                                           self.charge)
            if analytic else None)


def coboundary_twist(cover: CombinatorialCover, mu, n: int = 2) -> GerbeCocycle:
    base = cover.base
    dmu = base.coboundary(1, [int(x) % n for x in mu])
    return GerbeCocycle(cover, n, tuple(int(x) % n for x in dmu))


def twist_unit_bundle(cover: CombinatorialCover, mu, n: int, atlas: Atlas = None,
                      rank: int = 1) -> ProjectiveBundleData:
    """Rank-1 pattern with transitions zeta(mu_ab); its twist is d mu."""
    base = cover.base
    twist = coboundary_twist(cover, mu, n)
    transitions = {}
    for idx, (a, b) in enumerate(base.simplex_list(1)):
        zeta = np.exp(2j * np.pi * (int(mu[idx]) % n) / n)
        transitions[(a, b)] = Constant(zeta * np.eye(rank, dtype=complex))
    return ProjectiveBundleData(cover=cover, rank=rank, twist=twist,
                                transitions=transitions, hermitian=True,
                                atlas=atlas)


def monopole_bundle_three_patch(atlas: Atlas, charge: int) -> OrdinaryBundleData:
    """Monopole data on the band cover: caps 0, 1 and zero-weight band 2."""
    cover = triangle_cover()
    phi01 = _pair_phi_values(atlas, 0, 1)
    v01 = np.exp(1j * charge * phi01)[:, None, None]
    d01 = np.zeros((2,) + v01.shape, dtype=complex)
    d01[1] = 1j * charge * v01

    m02 = atlas.overlap(0, 2).count
    v02 = np.ones((m02, 1, 1), dtype=complex)
    d02 = np.zeros((2, m02, 1, 1), dtype=complex)

    phi12 = _pair_phi_values(atlas, 1, 2)   # chart-1 azimuth at the pairs
    v12 = np.exp(1j * charge * phi12)[:, None, None]
    d12 = np.zeros((2,) + v12.shape, dtype=complex)
    d12[1] = 1j * charge * v12

    transitions = {(0, 1): Sampled(v01, d01),
                   (0, 2): Sampled(v02, d02),
                   (1, 2): Sampled(v12, d12)}
    return OrdinaryBundleData(cover=cover, rank=1, twist=zero_twist(cover),
                              transitions=transitions, hermitian=True,
                              atlas=atlas)


def twisted_monopole(atlas: Atlas, charge: int = 1) -> TwistedMonopole:
    """Monopole tensored with a residue-coboundary twisted rank-1 pattern."""
    cover = triangle_cover()
    mu = (1, 0, 0)            # edges (0,1), (0,2), (1,2)
    unit = twist_unit_bundle(cover, mu, 2, atlas=atlas)
    mono = monopole_bundle_three_patch(atlas, charge)
    twisted = tensor_ordinary(unit, mono)
    return TwistedMonopole(bundle=twisted, unit=unit, monopole=mono,
                           twist=unit.twist, witness_mu=mu, atlas=atlas,
                           charge=charge)


# ---------------------------------------------------------------------------
# families


def untwisted_pattern(cover: CombinatorialCover, atlas: Atlas) -> ProjectiveBundleData:
    transitions = {key: Constant(np.eye(1, dtype=complex))
                   for key in cover.base.simplex_list(1)}
    return ProjectiveBundleData(cover=cover, rank=1, twist=zero_twist(cover),
                                transitions=transitions, hermitian=True,
                                atlas=atlas)


STABILIZER_MARGIN = 0.25
"""Surjectivity margin for the bundled families.

A stabilizer that is only barely surjective at the grid nodes (smallest
singular value decaying with the node distance to a continuum degeneracy)
leaves kernel frames too rough to difference; the bundled scenarios demand
this margin so the constant-mode search lands on the full cokernel cover."""


def bott_toeplitz_family(atlas: Atlas, truncation: int = 16,
                         twisted: bool = False) -> FamilySpec:
    """The clutching family of the spin projector over the sphere."""
    fiber = FiberModel(truncation=truncation, rank=2, mode="hardy")
    preset = toeplitz_clutching_preset(fiber)
    if twisted:
        cover = triangle_cover()
        mu = (1, 0, 0)
        unit = twist_unit_bundle(cover, mu, 2, atlas=atlas)
        return FamilySpec(atlas=atlas, preset=preset, plus=unit, minus=unit,
                          tau_unit=unit)
    cover = interval_cover() if len(atlas.patches) == 2 else triangle_cover()
    pattern = untwisted_pattern(cover, atlas)
    return FamilySpec(atlas=atlas, preset=preset, plus=pattern, minus=pattern,
                      tau_unit=pattern)


def winding_family(atlas: Atlas, m: int, truncation: int = 8) -> FamilySpec:
    fiber = FiberModel(truncation=truncation, rank=1, mode="hardy")
    preset = winding_scalar_preset(fiber, m)
    cover = interval_cover() if len(atlas.patches) == 2 else triangle_cover()
    pattern = untwisted_pattern(cover, atlas)
    return FamilySpec(atlas=atlas, preset=preset, plus=pattern, minus=pattern,
                      tau_unit=pattern)


def dirac_twist_family(atlas: Atlas, truncation: int = 12,
                       winding: int = 1) -> FamilySpec:
    fiber = FiberModel(truncation=truncation, rank=2, mode="hardy")
    preset = dirac_twist_preset(fiber, winding=winding)
    cover = interval_cover() if len(atlas.patches) == 2 else triangle_cover()
    pattern = untwisted_pattern(cover, atlas)
    return FamilySpec(atlas=atlas, preset=preset, plus=pattern, minus=pattern,
                      tau_unit=pattern)


def gauge_transform_family(F: FamilySpec, mu) -> FamilySpec:
    """Induced transformation of every pattern under twist -> twist + d mu."""
    return replace(F,
                   plus=gauge_twist(F.plus, mu),
                   minus=gauge_twist(F.minus, mu),
                   tau_unit=gauge_twist(F.tau_unit, mu))


def mixed_stabilizer_columns(dim_target: int, count: int,
                             angle: float = 0.2) -> np.ndarray:
    """Alternative stabilizer: last constant-mode column tilted into the
    first excited mode, so the stabilizing subspace genuinely differs."""
    base = np.eye(dim_target, dtype=complex)[:, :count + 1]
    c, s = np.cos(angle), np.sin(angle)
    rot = np.eye(count + 1, dtype=complex)
    k = count - 1
    rot[k, k], rot[k, count], rot[count, k], rot[count, count] = c, -s, s, c
    mixed = base @ rot
    return mixed[:, :count]


# ---------------------------------------------------------------------------
# pushforward identity fixtures


@dataclass
class ThomLineScenario:
    base: Atlas
    product: Atlas
    alpha_phi: dict
    dalpha: dict
    E_curv: FormField
    F_curv: FormField
    F_rank: int
    profile: ThomProfile
    e_charge: int
    f_charge: int


def thom_line_scenario(e_charge: int, f_charge: int, n_base: int = 32,
                       n_rho: int = 56, n_angle: int = 8,
                       radius: float = 1.0) -> ThomLineScenario:
    """Line bundle over the sphere with a disc-bundle total space.

    The potential convention matches the monopole fixture: alpha_phi(s) =
    -(k/2) T(s), so the base character integral of the line bundle is +k.
    """
    base = sphere_two_patch(n_base)
    product = disc_bundle_atlas(base, n_rho=n_rho, n_angle=n_angle,
                                radius=radius)
    T, Tp = base.meta["T"], base.meta["Tp"]
    alpha_phi, dalpha = {}, {}
    for key, patch in base.patches.items():
        s = patch.axes[0].nodes
        grid = np.broadcast_to((-0.5 * e_charge * T(s))[:, None], patch.shape)
        dgrid = np.broadcast_to((-0.5 * e_charge * Tp(s))[:, None], patch.shape)
        alpha_phi[key] = grid.copy()
        dalpha[key] = dgrid.copy()
    E_curv = monopole_curvature_override(base, e_charge)
    F_curv = monopole_curvature_override(base, f_charge)
    profile = ThomProfile(sigma=radius / 4.0, radius=radius)
    return ThomLineScenario(base=base, product=product, alpha_phi=alpha_phi,
                            dalpha=dalpha, E_curv=E_curv, F_curv=F_curv,
                            F_rank=1, profile=profile,
                            e_charge=e_charge, f_charge=f_charge)


# ---------------------------------------------------------------------------
# randomized valid/broken bundle data


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))[None, :]


def random_projective_bundle(rng: np.random.Generator,
                             cover: CombinatorialCover = None,
                             n: int = None, rank: int = None
                             ) -> ProjectiveBundleData:
    """Valid twisted data: Q_ab = zeta(mu_ab) T_a T_b^{-1}, twist = d mu."""
    if cover is None:
        cover = triangle_cover()
    base = cover.base
    if n is None:
        n = int(rng.integers(2, 5))
    if rank is None:
        rank = int(rng.integers(1, 4))
    mu = rng.integers(0, n, size=base.n_simplices(1))
    frames = {v: random_unitary(rng, rank) for v in range(base.vertex_count)}
    transitions = {}
    for idx, (a, b) in enumerate(base.simplex_list(1)):
        zeta = np.exp(2j * np.pi * int(mu[idx]) / n)
        transitions[(a, b)] = Constant(
            zeta * frames[a] @ frames[b].conj().T)
    return ProjectiveBundleData(cover=cover, rank=rank,
                                twist=coboundary_twist(cover, mu, n),
                                transitions=transitions, hermitian=True)


def perturb_one_entry(rng: np.random.Generator, E: ProjectiveBundleData,
                      amount: float = 1e-3) -> ProjectiveBundleData:
    """Bump one matrix entry of an edge that sits inside a triangle."""
    tri = E.cover.base.simplex_list(2)[0]
    edge = (tri[0], tri[1])
    t = E.transitions[edge]
    mat = t.matrix.copy()
    i = int(rng.integers(0, E.rank))
    j = int(rng.integers(0, E.rank))
    mat[i, j] += amount * (1.0 + float(rng.random()))
    transitions = dict(E.transitions)
    transitions[edge] = Constant(mat)
    return E.with_transitions(transitions)
