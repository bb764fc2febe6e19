"""Simplicial complexes with exact integer (co)homology.

Cochains in degree k are integer vectors indexed by the canonical ordering
of the k-simplices (sorted vertex tuples, lexicographic).  The connecting
map sends residue-valued 2-cocycles to integer 3-classes by lifting and
dividing the coboundary by the modulus.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field

from .errors import NotACocycle
from .intmat import (IntegerMatrix, SmithDecomposition, in_image,
                     kernel_basis, smith_normal_form, solve_integer)


@dataclass(frozen=True)
class SimplicialComplex:
    """Finite abstract simplicial complex with strictly increasing tuples.

    Invariants enforced at construction: closure under taking faces, no
    duplicates within a dimension, vertex indices below ``vertex_count``.
    """

    vertex_count: int
    simplices: tuple  # simplices[k] = sorted tuple of k-simplices (vertex tuples)

    @staticmethod
    def from_simplices(vertex_count: int, simplices) -> "SimplicialComplex":
        """Build from any iterable of simplices, closing under faces."""
        closed = set()
        for s in simplices:
            s = tuple(sorted(set(int(v) for v in s)))
            if not s:
                continue
            for r in range(1, len(s) + 1):
                for face in itertools.combinations(s, r):
                    closed.add(face)
        for s in closed:
            for v in s:
                if not (0 <= v < vertex_count):
                    raise ValueError("vertex index %d out of range" % v)
        if closed:
            max_dim = max(len(s) for s in closed) - 1
        else:
            max_dim = -1
        by_dim = []
        for k in range(max_dim + 1):
            by_dim.append(tuple(sorted(s for s in closed if len(s) == k + 1)))
        return SimplicialComplex(vertex_count, tuple(by_dim))

    @property
    def dimension(self) -> int:
        return len(self.simplices) - 1

    def n_simplices(self, k: int) -> int:
        if k < 0 or k > self.dimension:
            return 0
        return len(self.simplices[k])

    def simplex_list(self, k: int):
        if k < 0 or k > self.dimension:
            return ()
        return self.simplices[k]

    @functools.lru_cache(maxsize=None)
    def simplex_index(self, k: int):
        return {s: i for i, s in enumerate(self.simplex_list(k))}

    def boundary_matrix(self, k: int) -> IntegerMatrix:
        """Matrix of the boundary map from k-chains to (k-1)-chains."""
        nk = self.n_simplices(k)
        nk1 = self.n_simplices(k - 1)
        rows = [[0] * nk for _ in range(nk1)]
        if k >= 1:
            idx = self.simplex_index(k - 1)
            for j, s in enumerate(self.simplex_list(k)):
                for i, v in enumerate(s):
                    face = s[:i] + s[i + 1:]
                    rows[idx[face]][j] = 1 if i % 2 == 0 else -1
        return IntegerMatrix.from_rows(rows) if nk1 else IntegerMatrix.zeros(0, nk)

    def coboundary_matrix(self, k: int) -> IntegerMatrix:
        """Matrix of the coboundary map from k-cochains to (k+1)-cochains."""
        return self.boundary_matrix(k + 1).transpose()

    def coboundary(self, k: int, cochain):
        """Apply the degree-k coboundary to an integer cochain."""
        c = list(int(x) for x in cochain)
        if len(c) != self.n_simplices(k):
            raise ValueError("cochain length mismatch in degree %d" % k)
        return self.coboundary_matrix(k).mul_vec(c)


def suspension(X: SimplicialComplex) -> SimplicialComplex:
    """Suspension: two cone points joined over every simplex of X."""
    a, b = X.vertex_count, X.vertex_count + 1
    sims = [(a,), (b,)]
    for k in range(X.dimension + 1):
        for s in X.simplex_list(k):
            sims.append(s)
            sims.append(s + (a,))
            sims.append(s + (b,))
    return SimplicialComplex.from_simplices(X.vertex_count + 2, sims)


@dataclass(frozen=True)
class CohomologyGroup:
    """Integral cohomology in one degree with explicit generator cocycles."""

    degree: int
    free_rank: int
    torsion: tuple          # invariant factors > 1 in divisibility order
    generators: tuple       # torsion generators first, then free generators
    _basis: "CohomologyBasis" = field(repr=False, compare=False, default=None)

    @property
    def is_trivial(self) -> bool:
        return self.free_rank == 0 and not self.torsion


@dataclass(frozen=True)
class CohomologyBasis:
    """Internal change-of-basis data used by classification."""

    snf_below: SmithDecomposition       # coboundary from degree k-1
    rank_below: int
    torsion_positions: tuple            # indices i with d_i > 1
    kernel_cols: tuple                  # kernel basis of the reduced degree-k map
    kernel_snf: SmithDecomposition      # SNF of the kernel-basis matrix


@dataclass(frozen=True)
class ClassCoordinates:
    """Coordinates of a cocycle class against the computed generators."""

    free: tuple     # integers, one per free generator
    residues: tuple # residues mod each torsion factor
    torsion: tuple  # the torsion factors, parallel to residues

    @property
    def is_zero(self) -> bool:
        return all(x == 0 for x in self.free) and all(r == 0 for r in self.residues)

    def __eq__(self, other):
        return (self.free == other.free and self.torsion == other.torsion
                and tuple(r % t for r, t in zip(self.residues, self.torsion))
                == tuple(r % t for r, t in zip(other.residues, other.torsion)))


@functools.lru_cache(maxsize=None)
def cohomology_group(X: SimplicialComplex, k: int) -> CohomologyGroup:
    """Integral cohomology of X in degree k with explicit generators.

    Degrees above the dimension of X give the trivial group (empty cochain
    spaces); negative degrees are rejected.
    """
    if k < 0:
        raise ValueError("cohomology degree must be nonnegative")
    nk = X.n_simplices(k)
    A = X.coboundary_matrix(k - 1) if k >= 1 else IntegerMatrix.zeros(nk, 0)
    B = X.coboundary_matrix(k)

    snf_a = smith_normal_form(A)
    diag = snf_a.diagonal
    r = snf_a.rank

    # Express the degree-k coboundary in the image-adapted basis (columns of
    # U_A); the first r columns must vanish because coboundaries are cocycles.
    BU = B @ snf_a.U
    for i in range(BU.rows):
        for j in range(r):
            if BU.entries[i][j] != 0:
                raise AssertionError("coboundary of a coboundary is nonzero")
    if BU.rows and nk - r:
        Bpp = IntegerMatrix.from_rows([row[r:] for row in BU.entries])
    else:
        Bpp = IntegerMatrix.zeros(BU.rows, nk - r)
    snf_b = smith_normal_form(Bpp)
    kcols = kernel_basis(snf_b)

    torsion_positions = tuple(i for i in range(r) if diag[i] > 1)
    torsion = tuple(diag[i] for i in torsion_positions)

    gens = []
    for i in torsion_positions:
        gens.append(tuple(snf_a.U.column(i)))
    for col in kcols:
        full = [0] * r + list(col)
        gens.append(tuple(snf_a.U.mul_vec(full)))

    # every generator must be an exact cocycle
    for g in gens:
        if any(x != 0 for x in B.mul_vec(list(g))):
            raise AssertionError("generator is not a cocycle")

    kernel_matrix = IntegerMatrix.from_rows(
        [[col[i] for col in kcols] for i in range(nk - r)]) if kcols else \
        IntegerMatrix.zeros(max(nk - r, 0), 0)

    basis = CohomologyBasis(
        snf_below=snf_a,
        rank_below=r,
        torsion_positions=torsion_positions,
        kernel_cols=tuple(tuple(c) for c in kcols),
        kernel_snf=smith_normal_form(kernel_matrix),
    )
    return CohomologyGroup(degree=k, free_rank=len(kcols), torsion=torsion,
                           generators=tuple(gens), _basis=basis)


def classify_cocycle(X: SimplicialComplex, k: int, cochain) -> ClassCoordinates:
    """Coordinates of an integer k-cocycle against the computed generators.

    The residual (cochain minus the indicated generator combination) is
    checked to be a coboundary by an exact integer solve.
    """
    c = [int(x) for x in cochain]
    if len(c) != X.n_simplices(k):
        raise ValueError("cochain length mismatch")
    dc = X.coboundary(k, c)
    if any(x != 0 for x in dc):
        worst = max(range(len(dc)), key=lambda i: abs(dc[i]))
        raise NotACocycle("coboundary is nonzero",
                          module="simplicial-cohomology", operation="classify_cocycle",
                          location=X.simplex_list(k + 1)[worst])
    group = cohomology_group(X, k)
    basis = group._basis
    r = basis.rank_below
    y = basis.snf_below.U_inv.mul_vec(c)
    diag = basis.snf_below.diagonal
    residues = tuple(y[i] % diag[i] for i in basis.torsion_positions)
    z = y[r:]
    if group.free_rank:
        w = solve_integer(basis.kernel_snf, z)
        if w is None:
            raise AssertionError("cocycle not in kernel lattice span")
        free = tuple(w)
    else:
        if any(x != 0 for x in z):
            raise AssertionError("cocycle not in kernel lattice span")
        free = ()

    # verification: remainder must be a coboundary
    combo = [0] * len(c)
    gens = group.generators
    nt = len(group.torsion)
    for val, g in zip(residues, gens[:nt]):
        combo = [a + val * b for a, b in zip(combo, g)]
    for val, g in zip(free, gens[nt:]):
        combo = [a + val * b for a, b in zip(combo, g)]
    diff = [a - b for a, b in zip(c, combo)]
    if not in_image(basis.snf_below, diff):
        raise AssertionError("classification verification failed")
    return ClassCoordinates(free=free, residues=residues, torsion=group.torsion)


def _lift(theta, n: int, balanced: bool):
    if balanced:
        half = n // 2
        return [((int(t) % n) - n if (int(t) % n) > half else (int(t) % n))
                for t in theta]
    return [int(t) % n for t in theta]


def bockstein(X: SimplicialComplex, theta, n: int, degree: int = 2):
    """Connecting map: residue-valued cocycle -> integer cocycle one degree up.

    Lifts theta to an integer cochain t, returns (coboundary t)/n together
    with its classification.  The result is checked to be independent of the
    lift by re-running with a balanced second lift, and n times the result is
    checked to be a coboundary (class order divides n).
    """
    if n < 1:
        raise ValueError("modulus must be positive")
    k = degree
    th = [int(t) % n for t in theta]
    if len(th) != X.n_simplices(k):
        raise ValueError("cochain length mismatch")
    dth = X.coboundary(k, th)
    for i, x in enumerate(dth):
        if x % n != 0:
            raise NotACocycle("cochain is not a cocycle mod %d" % n,
                              module="simplicial-cohomology", operation="bockstein",
                              location=X.simplex_list(k + 1)[i])

    def image_of(lift_vals):
        d = X.coboundary(k, lift_vals)
        if any(x % n != 0 for x in d):
            raise AssertionError("lift coboundary not divisible")
        return [x // n for x in d]

    beta = image_of(_lift(th, n, balanced=False))
    cls = classify_cocycle(X, k + 1, beta)
    cls2 = classify_cocycle(X, k + 1, image_of(_lift(th, n, balanced=True)))
    if cls != cls2:
        raise AssertionError("connecting-map class depends on lift")

    group = cohomology_group(X, k + 1)
    snf_below = group._basis.snf_below
    if not in_image(snf_below, [n * x for x in beta]):
        raise AssertionError("class order does not divide the modulus")
    return beta, cls
