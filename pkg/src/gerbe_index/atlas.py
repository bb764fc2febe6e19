"""Quadrature atlases: patches, partitions of unity, overlap pairings.

Patches are boxes with midpoint-rule product grids.  Overlap
correspondences identify nodes of different charts that are the same
geometric point, together with the Jacobian of the chart change there.

The bundled sphere charts use a graded area-like radial coordinate: the
radial map T is odd-symmetric about the equator, so antipodal-chart node
grids align exactly, and its grading beta sets the size of the leading
quadrature error term (kept measurable but small, see the convergence
fixtures).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarse, IncompatibleAtlas


@dataclass(frozen=True)
class Axis:
    n: int
    lo: float
    hi: float
    periodic: bool = False

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return self.lo + (np.arange(self.n) + 0.5) * self.h


@dataclass
class Patch:
    axes: tuple
    pou: np.ndarray = None
    volume: np.ndarray = None
    embed: object = None          # callable(list of coord grids) -> geometry

    def __post_init__(self):
        if self.pou is None:
            self.pou = np.ones(self.shape)
        if self.volume is None:
            self.volume = np.ones(self.shape)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(ax.n for ax in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def node_weight(self) -> float:
        w = 1.0
        for ax in self.axes:
            w *= ax.h
        return w

    def grids(self):
        return np.meshgrid(*[ax.nodes for ax in self.axes], indexing="ij")

    def flat_index(self, multi) -> np.ndarray:
        return np.ravel_multi_index(multi, self.shape)

    def points(self):
        if self.embed is None:
            raise IncompatibleAtlas("patch has no geometric embedding",
                                    module="chern-weil", operation="Patch.points")
        return self.embed(self.grids())


@dataclass
class Overlap:
    idx_a: np.ndarray             # flat node indices into the lower patch
    idx_b: np.ndarray
    jac_ab: np.ndarray            # (m, d, d): d x_a / d x_b at each pair

    @property
    def count(self) -> int:
        return len(self.idx_a)


@dataclass
class OverlapView:
    """Overlap as seen from an ordered pair of patches."""

    idx_a: np.ndarray
    idx_b: np.ndarray
    jac_ab: np.ndarray            # d x_a / d x_b for the ordered pair (a, b)

    @property
    def count(self) -> int:
        return len(self.idx_a)


@dataclass
class Atlas:
    patches: dict
    overlaps: dict = field(default_factory=dict)   # (a,b) a<b -> Overlap
    pou_overlaps: dict = None                      # override for the pou check
    base: "Atlas" = None                           # product atlases only
    n_fiber_axes: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return next(iter(self.patches.values())).dim

    def overlap(self, a: int, b: int) -> OverlapView:
        if a < b:
            ov = self.overlaps[(a, b)]
            return OverlapView(ov.idx_a, ov.idx_b, ov.jac_ab)
        ov = self.overlaps[(b, a)]
        return OverlapView(ov.idx_b, ov.idx_a, np.linalg.inv(ov.jac_ab))

    def has_overlap(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.overlaps

    def triple_positions(self, a: int, b: int, c: int):
        """Positions into the (ab), (bc), (ac) pairings at common points."""
        if not (self.has_overlap(a, b) and self.has_overlap(b, c)
                and self.has_overlap(a, c)):
            return None
        ab, bc, ac = self.overlap(a, b), self.overlap(b, c), self.overlap(a, c)
        by_b = {int(ib): (p, int(ia)) for p, (ia, ib)
                in enumerate(zip(ab.idx_a, ab.idx_b))}
        by_ac = {(int(ia), int(ic)): p for p, (ia, ic)
                 in enumerate(zip(ac.idx_a, ac.idx_b))}
        p_ab, p_bc, p_ac = [], [], []
        for q, (ib, ic) in enumerate(zip(bc.idx_a, bc.idx_b)):
            hit = by_b.get(int(ib))
            if hit is None:
                continue
            p, ia = hit
            r = by_ac.get((ia, int(ic)))
            if r is None:
                continue
            p_ab.append(p)
            p_bc.append(q)
            p_ac.append(r)
        return (np.asarray(p_ab, dtype=int), np.asarray(p_bc, dtype=int),
                np.asarray(p_ac, dtype=int))

    def check_partition_of_unity(self, tau: float = 1e-10) -> float:
        """Max deviation of the pou sum from 1 over all nodes.

        Every node is counted with its own pou value plus the partner values
        from every overlap correspondence it appears in; isolated nodes must
        therefore carry pou exactly 1.
        """
        worst = 0.0
        table = self.pou_overlaps if self.pou_overlaps is not None else self.overlaps
        for key, patch in self.patches.items():
            if np.any(patch.pou < -tau):
                raise IncompatibleAtlas("partition of unity is negative",
                                        module="chern-weil",
                                        operation="check_partition_of_unity",
                                        location=key)
            total = patch.pou.reshape(-1).copy()
            for (a, b), ov in table.items():
                if a == key:
                    total[ov.idx_a] += self.patches[b].pou.reshape(-1)[ov.idx_b]
                elif b == key:
                    total[ov.idx_b] += self.patches[a].pou.reshape(-1)[ov.idx_a]
            worst = max(worst, float(np.max(np.abs(total - 1.0))))
        if worst > tau:
            raise IncompatibleAtlas(
                "partition of unity sums deviate from 1 by %.3g" % worst,
                module="chern-weil", operation="check_partition_of_unity")
        return worst


def diff_axis(arr: np.ndarray, grid_axis: int, h: float, periodic: bool,
              array_axis: int) -> np.ndarray:
    """Second-order derivative samples along one grid axis.

    Central differences inside; one-sided three-point stencils at the ends
    of non-periodic axes.  Raises when the axis has fewer than three nodes.
    """
    n = arr.shape[array_axis]
    if n < 3:
        raise GridTooCoarse("axis with %d nodes cannot support differencing" % n,
                            module="chern-weil", operation="diff_axis")
    if periodic:
        return (np.roll(arr, -1, axis=array_axis)
                - np.roll(arr, 1, axis=array_axis)) / (2 * h)
    out = np.empty_like(arr)
    sl = [slice(None)] * arr.ndim

    def at(i):
        s = list(sl)
        s[array_axis] = i
        return tuple(s)

    out[at(slice(1, -1))] = (arr[at(slice(2, None))]
                             - arr[at(slice(0, -2))]) / (2 * h)
    out[at(0)] = (-3 * arr[at(0)] + 4 * arr[at(1)] - arr[at(2)]) / (2 * h)
    out[at(n - 1)] = (3 * arr[at(n - 1)] - 4 * arr[at(n - 2)]
                      + arr[at(n - 3)]) / (2 * h)
    return out


def smoothstep_flat(u: np.ndarray) -> np.ndarray:
    """Monotone 0->1 ramp, flat to all orders at both ends."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        b = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    out = np.where(u <= 0.0, 0.0, np.where(u >= 1.0, 1.0, a / (a + b)))
    return out


def radial_map(beta: float):
    """Graded area-like radial map T and its derivatives.

    T(s) = 1 + (1-beta)(s-1) + beta (s-1)^3 on [0, 2]; odd-symmetric about
    the equator s = 1, T(0) = 0, T(2) = 2, strictly increasing for
    0 <= beta < 1.  T''(0) = -6 beta sets the leading quadrature error.
    Height above the pole is linear-ish in s, so azimuthal circles shrink
    like sqrt(s): integrands are flat at the poles (tight quadrature), but
    the chart-to-sphere map is not smooth there.
    """
    alpha = 1.0 - beta

    def T(s):
        u = s - 1.0
        return 1.0 + alpha * u + beta * u ** 3

    def Tp(s):
        u = s - 1.0
        return alpha + 3.0 * beta * u ** 2

    def Tppp(_s):
        return 6.0 * beta

    return T, Tp, Tppp


def radial_map_angle():
    """Colatitude-proportional radial map: T(s) = 1 - cos(pi s / 2).

    Odd-symmetric about the equator like the graded map, but the
    chart-to-sphere embedding is smooth at the poles (azimuthal circles
    shrink linearly), which operator families sampled through the embedding
    need for clean second-order differencing.
    """

    def T(s):
        return 1.0 - np.cos(0.5 * np.pi * np.asarray(s))

    def Tp(s):
        return 0.5 * np.pi * np.sin(0.5 * np.pi * np.asarray(s))

    def Tppp(s):
        return -(0.5 * np.pi) ** 3 * np.sin(0.5 * np.pi * np.asarray(s))

    return T, Tp, Tppp


SPHERE_GRADING = 6e-4
SPHERE_RAMP = (0.6, 1.4)


def _cap_pou(s: np.ndarray) -> np.ndarray:
    lo, hi = SPHERE_RAMP
    return 1.0 - smoothstep_flat((s - lo) / (hi - lo))


def _cap_embed(T, south: bool):
    def embed(grids):
        s, phi = grids
        z = 1.0 - T(s)
        if south:
            z = -z
            phi = 2.0 * np.pi - phi
        rho = np.sqrt(np.maximum(0.0, 1.0 - z ** 2))
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    return embed


def sphere_two_patch(n_s: int = 64, n_phi: int = None,
                     grading: float = SPHERE_GRADING,
                     chart: str = "area") -> Atlas:
    """Two antipodal polar caps covering the sphere, grids exactly aligned.

    chart "area": graded area-like radial coordinate (flattest quadrature);
    chart "angle": colatitude-proportional coordinate (smooth embedding).
    """
    if n_phi is None:
        n_phi = n_s
    if chart == "area":
        T, Tp, _ = radial_map(grading)
    elif chart == "angle":
        T, Tp, _ = radial_map_angle()
    else:
        raise ValueError("unknown chart kind %r" % chart)
    s_axis = Axis(n_s, 0.0, 2.0)
    phi_axis = Axis(n_phi, 0.0, 2.0 * np.pi, periodic=True)
    s_nodes = s_axis.nodes

    patches = {}
    for key, south in ((0, False), (1, True)):
        pou = np.broadcast_to(_cap_pou(s_nodes)[:, None], (n_s, n_phi)).copy()
        vol = np.broadcast_to(Tp(s_nodes)[:, None], (n_s, n_phi)).copy()
        patches[key] = Patch(axes=(s_axis, phi_axis), pou=pou, volume=vol,
                             embed=_cap_embed(T, south))

    ii, jj = np.meshgrid(np.arange(n_s), np.arange(n_phi), indexing="ij")
    idx_a = (ii * n_phi + jj).reshape(-1)
    idx_b = ((n_s - 1 - ii) * n_phi + (n_phi - 1 - jj)).reshape(-1)
    jac = np.broadcast_to(np.diag([-1.0, -1.0]), (idx_a.size, 2, 2)).copy()
    overlaps = {(0, 1): Overlap(idx_a, idx_b, jac)}

    return Atlas(patches=patches, overlaps=overlaps,
                 meta={"kind": "sphere", "grading": grading, "chart": chart,
                       "T": T, "Tp": Tp, "n_s": n_s, "n_phi": n_phi,
                       "south_keys": {1}})


def sphere_three_patch(n_s: int = 64, n_phi: int = None,
                       grading: float = SPHERE_GRADING,
                       chart: str = "area") -> Atlas:
    """Two caps plus a zero-weight equatorial band patch.

    The band creates genuine triple overlaps (its nodes are shared with both
    caps) without touching quadrature: its partition-of-unity weight is
    identically zero.
    """
    atl = sphere_two_patch(n_s, n_phi, grading, chart)
    n_phi = atl.meta["n_phi"]
    T = atl.meta["T"]
    Tp = atl.meta["Tp"]
    h = 2.0 / n_s
    i0 = n_s // 2 - max(n_s // 16, 2)
    i1 = n_s // 2 + max(n_s // 16, 2)
    nb = i1 - i0
    band_axis = Axis(nb, i0 * h, i1 * h)
    s_nodes = band_axis.nodes
    vol = np.broadcast_to(Tp(s_nodes)[:, None], (nb, n_phi)).copy()
    band = Patch(axes=(band_axis, Axis(n_phi, 0.0, 2 * np.pi, periodic=True)),
                 pou=np.zeros((nb, n_phi)), volume=vol,
                 embed=_cap_embed(T, south=False))
    patches = dict(atl.patches)
    patches[2] = band

    ii, jj = np.meshgrid(np.arange(nb), np.arange(n_phi), indexing="ij")
    band_flat = (ii * n_phi + jj).reshape(-1)
    north_flat = ((ii + i0) * n_phi + jj).reshape(-1)
    south_flat = ((n_s - 1 - i0 - ii) * n_phi + (n_phi - 1 - jj)).reshape(-1)
    eye = np.broadcast_to(np.eye(2), (band_flat.size, 2, 2)).copy()
    flip = np.broadcast_to(np.diag([-1.0, -1.0]), (band_flat.size, 2, 2)).copy()
    overlaps = dict(atl.overlaps)
    overlaps[(0, 2)] = Overlap(north_flat, band_flat, eye)
    overlaps[(1, 2)] = Overlap(south_flat, band_flat, flip)

    meta = dict(atl.meta)
    meta.update(kind="sphere3", band_range=(i0, i1))
    return Atlas(patches=patches, overlaps=overlaps, meta=meta)


def disc_bundle_atlas(base: Atlas, n_rho: int = 40, n_angle: int = 8,
                      radius: float = 1.0) -> Atlas:
    """Product of a base atlas with a polar disc fiber.

    Fiber axes come last; overlap tables are inherited from the base for the
    partition-of-unity check only (fiber coordinates of a geometric point
    differ between charts when the glued bundle is nontrivial, so no
    node-level form pairing is declared).
    """
    rho_axis = Axis(n_rho, 0.0, radius)
    ang_axis = Axis(n_angle, 0.0, 2 * np.pi, periodic=True)
    patches = {}
    for key, bp in base.patches.items():
        shape = bp.shape + (n_rho, n_angle)
        pou = np.broadcast_to(bp.pou[..., None, None], shape).copy()
        vol = np.broadcast_to(bp.volume[..., None, None], shape).copy()
        patches[key] = Patch(axes=bp.axes + (rho_axis, ang_axis),
                             pou=pou, volume=vol, embed=None)

    pou_overlaps = {}
    fiber_size = n_rho * n_angle
    offsets = np.arange(fiber_size)
    for (a, b), ov in base.overlaps.items():
        # pou is fiber-independent, so pairing equal fiber offsets checks the
        # correct base-point sums even though the fiber charts are rotated
        ia = (ov.idx_a[:, None] * fiber_size + offsets[None, :]).reshape(-1)
        ib = (ov.idx_b[:, None] * fiber_size + offsets[None, :]).reshape(-1)
        jac = np.repeat(np.pad(ov.jac_ab, ((0, 0), (0, 2), (0, 2))),
                        fiber_size, axis=0)
        jac[:, 2, 2] = 1.0
        jac[:, 3, 3] = 1.0
        pou_overlaps[(a, b)] = Overlap(ia, ib, jac)
    return Atlas(patches=patches, overlaps={}, pou_overlaps=pou_overlaps,
                 base=base, n_fiber_axes=2,
                 meta={"kind": "disc-bundle", "radius": radius,
                       "base_meta": base.meta})


def components(dim: int, degree: int):
    return list(itertools.combinations(range(dim), degree))
