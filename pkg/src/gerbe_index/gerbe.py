"""Gerbe data on the nerve of a combinatorial cover.

Covers are vertex stars of a simplicial base, so the nerve is the base
complex itself and no geometric cover layer is needed.  Special-unitary
lifts live on oriented edges; their triple products are recognized as
central roots of unity, giving a residue-valued 2-cocycle whose integral
class is computed by the connecting map.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from .errors import NotACocycle, NotScalar
from .simplicial import SimplicialComplex, bockstein

TAU_UNITARY = 1e-9
TAU_SCALAR = 1e-9


@dataclass(frozen=True)
class CombinatorialCover:
    """Cover by vertex stars; k-fold overlaps are the k-simplices."""

    base: SimplicialComplex

    @property
    def nerve(self) -> SimplicialComplex:
        return self.base

    def edges(self):
        return self.base.simplex_list(1)

    def triangles(self):
        return self.base.simplex_list(2)


def _perm_sign(perm) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class GerbeCocycle:
    """Residue-valued 2-cochain on the nerve, antisymmetric in its indices."""

    cover: CombinatorialCover
    n: int
    values: tuple  # residues mod n, indexed by canonical 2-simplices

    def __post_init__(self):
        if len(self.values) != self.cover.base.n_simplices(2):
            raise ValueError("value count does not match 2-simplices")

    def value(self, a: int, b: int, c: int) -> int:
        """Residue on an arbitrarily ordered triple."""
        key = tuple(sorted((a, b, c)))
        idx = self.cover.base.simplex_index(2)[key]
        sign = _perm_sign((a, b, c))
        return (sign * self.values[idx]) % self.n

    def scalar(self, a: int, b: int, c: int) -> complex:
        return cmath.exp(2j * cmath.pi * self.value(a, b, c) / self.n)

    def is_cocycle(self) -> bool:
        d = self.cover.base.coboundary(2, self.values)
        return all(x % self.n == 0 for x in d)

    def is_zero(self) -> bool:
        return all(v % self.n == 0 for v in self.values)

    def check_cocycle(self, operation: str):
        d = self.cover.base.coboundary(2, self.values)
        for i, x in enumerate(d):
            if x % self.n != 0:
                raise NotACocycle(
                    "twist is not a cocycle mod %d" % self.n,
                    module="cech-gerbe", operation=operation,
                    location=self.cover.base.simplex_list(3)[i])


def zero_twist(cover: CombinatorialCover, n: int = 1) -> GerbeCocycle:
    return GerbeCocycle(cover, n, tuple(0 for _ in cover.triangles()))


@dataclass
class PULift:
    """Per-edge special-unitary matrices with G_ba = inverse(G_ab)."""

    cover: CombinatorialCover
    n: int
    matrices: dict = field(default_factory=dict)  # (a,b) a<b -> ndarray
    tau_unitary: float = TAU_UNITARY

    def matrix(self, a: int, b: int) -> np.ndarray:
        if a < b:
            return self.matrices[(a, b)]
        return np.linalg.inv(self.matrices[(b, a)])

    def check(self):
        for (a, b), g in sorted(self.matrices.items()):
            res = np.linalg.norm(g @ g.conj().T - np.eye(self.n))
            det_res = abs(np.linalg.det(g) - 1.0)
            if res > self.tau_unitary or det_res > self.tau_unitary:
                raise NotScalar("edge matrix is not special-unitary "
                                "(unitary residual %.3g, det residual %.3g)"
                                % (res, det_res),
                                module="cech-gerbe", operation="PULift.check",
                                location=(a, b))


def dd_cocycle(lift: PULift, tau_scalar: float = TAU_SCALAR) -> GerbeCocycle:
    """Residue cocycle from triple products of the lifted transition maps.

    Each product G_ab G_bc G_ca must be within tau_scalar of a central n-th
    root of unity; the nearest root is recorded.  Roots are separated by
    2 pi / n, far above the tolerance, so recognition is unambiguous.
    """
    lift.check()
    n = lift.n
    base = lift.cover.base
    values = []
    eye = np.eye(n)
    for (a, b, c) in base.simplex_list(2):
        prod = lift.matrix(a, b) @ lift.matrix(b, c) @ lift.matrix(c, a)
        best_k, best_res = 0, float("inf")
        for k in range(n):
            zeta = cmath.exp(2j * cmath.pi * k / n)
            res = np.linalg.norm(prod - zeta * eye)
            if res < best_res:
                best_k, best_res = k, res
        if best_res > tau_scalar:
            raise NotScalar(
                "triple product is %.3g away from every central root of unity;"
                " the lift does not define a projective-unitary bundle" % best_res,
                module="cech-gerbe", operation="dd_cocycle", location=(a, b, c))
        values.append(best_k)
    theta = GerbeCocycle(lift.cover, n, tuple(values))
    theta.check_cocycle("dd_cocycle")
    return theta


def dd_class(theta: GerbeCocycle):
    """Integral degree-3 classification of the twist on the nerve.

    Returns (integer 3-cocycle, class coordinates).  The class order is
    asserted to divide n inside the connecting-map computation.
    """
    theta.check_cocycle("dd_class")
    return bockstein(theta.cover.base, theta.values, theta.n, degree=2)


def gauge_transform(theta: GerbeCocycle, mu) -> GerbeCocycle:
    """Shift the twist by the coboundary of a residue 1-cochain."""
    base = theta.cover.base
    mu = [int(x) % theta.n for x in mu]
    if len(mu) != base.n_simplices(1):
        raise ValueError("1-cochain length mismatch")
    dmu = base.coboundary(1, mu)
    new_vals = tuple((v + d) % theta.n for v, d in zip(theta.values, dmu))
    return GerbeCocycle(theta.cover, theta.n, new_vals)


def classify_per_degree(theta: GerbeCocycle):
    """Convenience wrapper: dd_class plus a compact textual description."""
    beta, cls = dd_class(theta)
    if cls.is_zero:
        desc = "zero class (twist is a coboundary)"
    else:
        parts = []
        if any(cls.free):
            parts.append("free coordinates %s" % (cls.free,))
        tors = ["%d mod %d" % (r, t) for r, t in zip(cls.residues, cls.torsion) if r]
        if tors:
            parts.append("torsion residues " + ", ".join(tors))
        desc = "nontrivial class: " + "; ".join(parts)
    return beta, cls, desc
