"""Projective vector bundle data and its K-class bookkeeping.

Local bundles are carried implicitly (all data is in the transitions);
transitions either are constant matrices per oriented edge or are sampled
along the overlap correspondences of an atlas.  The central defect of the
cocycle law is prescribed by a residue-valued twist; everything here checks
or transports that defect, it never searches for isomorphisms.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (CoverMismatch, ShapeMismatch, TwistMismatch,
                     WeakCocycleViolation)
from .gerbe import CombinatorialCover, GerbeCocycle, zero_twist

TAU_COCYCLE_CONST = 1e-8
TAU_COCYCLE_SAMPLED = 1e-6


@dataclass(frozen=True)
class Constant:
    """Constant transition matrix on an overlap."""

    matrix: np.ndarray

    @property
    def rank(self):
        return self.matrix.shape[0]

    def inv(self) -> "Constant":
        return Constant(np.linalg.inv(self.matrix))


@dataclass(frozen=True)
class Sampled:
    """Transition sampled along an overlap correspondence.

    ``values`` has shape (m, r, r), aligned with the pairing order of the
    owning atlas edge.  ``derivative`` (optional) holds the chart-a partial
    derivatives, shape (d, m, r, r).
    """

    values: np.ndarray
    derivative: np.ndarray = None

    @property
    def rank(self):
        return self.values.shape[-1]

    def inv(self) -> "Sampled":
        qinv = np.linalg.inv(self.values)
        dq = None
        if self.derivative is not None:
            dq = -qinv[None] @ self.derivative @ qinv[None]
        return Sampled(qinv, dq)


@dataclass
class ProjectiveBundleData:
    """Rank-r local bundles with transitions twisted by a central cocycle."""

    cover: CombinatorialCover
    rank: int
    twist: GerbeCocycle
    transitions: dict            # (a, b) with a < b -> Constant | Sampled
    hermitian: bool = False
    atlas: object = None         # needed for sampled triple-overlap checks
    tolerance: float = None

    def __post_init__(self):
        if self.tolerance is None:
            sampled = any(isinstance(t, Sampled) for t in self.transitions.values())
            self.tolerance = TAU_COCYCLE_SAMPLED if sampled else TAU_COCYCLE_CONST

    def transition(self, a: int, b: int):
        if a < b:
            return self.transitions[(a, b)]
        t = self.transitions[(b, a)]
        return t.inv()

    def is_sampled(self) -> bool:
        return any(isinstance(t, Sampled) for t in self.transitions.values())

    def with_transitions(self, transitions, **kw) -> "ProjectiveBundleData":
        return replace(self, transitions=transitions, **kw)


class OrdinaryBundleData(ProjectiveBundleData):
    """Bundle data with identically zero twist (strict cocycle condition)."""

    def __post_init__(self):
        super().__post_init__()
        if not self.twist.is_zero():
            raise TwistMismatch("ordinary bundle data must have zero twist",
                                module="projective-bundle",
                                operation="OrdinaryBundleData")


def same_twist(s: GerbeCocycle, t: GerbeCocycle) -> bool:
    """Twist equality; zero cocycles agree regardless of modulus."""
    if s.is_zero() and t.is_zero():
        return True
    return s.n == t.n and tuple(v % s.n for v in s.values) == \
        tuple(v % t.n for v in t.values)


@dataclass(frozen=True)
class ValidationReport:
    max_residual: float
    worst_simplex: tuple
    unitarity_residual: float
    checked_triples: int


@dataclass(frozen=True)
class KClassDifference:
    """Formal difference of projective bundle data with a common twist."""

    plus: ProjectiveBundleData
    minus: ProjectiveBundleData

    def __post_init__(self):
        if self.plus.cover is not self.minus.cover and \
                self.plus.cover != self.minus.cover:
            raise CoverMismatch("difference parts live on different covers",
                                module="projective-bundle",
                                operation="KClassDifference")
        if not same_twist(self.plus.twist, self.minus.twist):
            raise TwistMismatch("difference parts carry different twists",
                                module="projective-bundle",
                                operation="KClassDifference")

    @property
    def rank(self) -> int:
        return self.plus.rank - self.minus.rank


def _triple_values(E: ProjectiveBundleData, a: int, b: int, c: int):
    """Aligned sample stacks (Q_ab, Q_bc, Q_ac) on a triple overlap."""
    tab, tbc, tac = E.transition(a, b), E.transition(b, c), E.transition(a, c)
    kinds = [isinstance(t, Sampled) for t in (tab, tbc, tac)]
    if not any(kinds):
        return (tab.matrix[None], tbc.matrix[None], tac.matrix[None])
    if E.atlas is None:
        raise ShapeMismatch("sampled transitions need an atlas for triple checks",
                            module="projective-bundle", operation="validate",
                            location=(a, b, c))
    pos = E.atlas.triple_positions(a, b, c)
    if pos is None or len(pos[0]) == 0:
        return None

    def pick(t, positions, edge):
        if isinstance(t, Constant):
            m = len(positions)
            return np.broadcast_to(t.matrix, (m,) + t.matrix.shape)
        vals = t.values
        return vals[positions]

    p_ab, p_bc, p_ac = pos
    return (pick(tab, p_ab, (a, b)), pick(tbc, p_bc, (b, c)),
            pick(tac, p_ac, (a, c)))


def validate(E: ProjectiveBundleData) -> ValidationReport:
    """Check the twisted cocycle law on every triple overlap.

    Raises WeakCocycleViolation with the worst simplex when the residual
    exceeds the tolerance; otherwise returns the residual report.
    """
    base = E.cover.base
    worst = 0.0
    worst_simplex = ()
    checked = 0
    for (a, b, c) in base.simplex_list(2):
        vals = _triple_values(E, a, b, c)
        if vals is None:
            continue
        qab, qbc, qac = vals
        zeta = E.twist.scalar(a, b, c)
        res = qab @ qbc - zeta * qac
        if res.size:
            m = float(np.max(np.linalg.norm(res, axis=(1, 2))))
        else:
            m = 0.0
        checked += 1
        if m > worst:
            worst, worst_simplex = m, (a, b, c)
    unit = 0.0
    if E.hermitian:
        for (a, b), t in sorted(E.transitions.items()):
            q = t.matrix[None] if isinstance(t, Constant) else t.values
            if q.size:
                r = q @ np.conj(np.swapaxes(q, -1, -2)) - np.eye(E.rank)
                unit = max(unit, float(np.max(np.linalg.norm(r, axis=(1, 2)))))
    if worst > E.tolerance:
        raise WeakCocycleViolation(
            "twisted cocycle residual %.3g exceeds tolerance %.3g"
            % (worst, E.tolerance),
            residual=worst, module="projective-bundle", operation="validate",
            location=worst_simplex)
    if E.hermitian and unit > E.tolerance:
        raise WeakCocycleViolation(
            "unitarity residual %.3g exceeds tolerance %.3g" % (unit, E.tolerance),
            residual=unit, module="projective-bundle", operation="validate")
    return ValidationReport(worst, worst_simplex, unit, checked)


def _combine(E, F, op):
    out = {}
    for key in E.transitions:
        te, tf = E.transitions[key], F.transitions[key]
        if isinstance(te, Constant) and isinstance(tf, Constant):
            out[key] = Constant(op(te.matrix[None], tf.matrix[None])[0])
        else:
            if isinstance(te, Constant):
                m = len(tf.values)
                ve = np.broadcast_to(te.matrix, (m,) + te.matrix.shape)
                vf = tf.values
            elif isinstance(tf, Constant):
                m = len(te.values)
                ve = te.values
                vf = np.broadcast_to(tf.matrix, (m,) + tf.matrix.shape)
            else:
                ve, vf = te.values, tf.values
            out[key] = Sampled(op(ve, vf))
    return out


def _block_diag(a, b):
    m = a.shape[0]
    p, q = a.shape[1], a.shape[2]
    r, s = b.shape[1], b.shape[2]
    out = np.zeros((m, p + r, q + s), dtype=complex)
    out[:, :p, :q] = a
    out[:, p:, q:] = b
    return out


def _kron(a, b):
    m = a.shape[0]
    p, q = a.shape[1], a.shape[2]
    r, s = b.shape[1], b.shape[2]
    return np.einsum("mij,mkl->mikjl", a, b).reshape(m, p * r, q * s)


def direct_sum(E: ProjectiveBundleData, F: ProjectiveBundleData) -> ProjectiveBundleData:
    """Block-diagonal sum; requires identical twist and cover."""
    if E.cover != F.cover:
        raise CoverMismatch("direct sum across different covers",
                            module="projective-bundle", operation="direct_sum")
    if not same_twist(E.twist, F.twist):
        raise TwistMismatch("direct sum across different twists",
                            module="projective-bundle", operation="direct_sum")
    return ProjectiveBundleData(
        cover=E.cover, rank=E.rank + F.rank, twist=E.twist,
        transitions=_combine(E, F, _block_diag),
        hermitian=E.hermitian and F.hermitian,
        atlas=E.atlas or F.atlas,
        tolerance=max(E.tolerance, F.tolerance))


def tensor_ordinary(E: ProjectiveBundleData, W: OrdinaryBundleData) -> ProjectiveBundleData:
    """Module action of an untwisted bundle: Kronecker-product transitions."""
    if E.cover != W.cover:
        raise CoverMismatch("tensor across different covers",
                            module="projective-bundle", operation="tensor_ordinary")
    if not W.twist.is_zero():
        raise TwistMismatch("second factor must be untwisted",
                            module="projective-bundle", operation="tensor_ordinary")
    return ProjectiveBundleData(
        cover=E.cover, rank=E.rank * W.rank, twist=E.twist,
        transitions=_combine(E, W, _kron),
        hermitian=E.hermitian and W.hermitian,
        atlas=E.atlas or W.atlas,
        tolerance=max(E.tolerance, W.tolerance))


def tensor_power_descend(E: ProjectiveBundleData, n: int = None) -> OrdinaryBundleData:
    """n-th Kronecker power; the central defects cancel, leaving strict data.

    n defaults to the twist modulus and must be a multiple of the twist
    order.  The result is validated strictly (zero twist).
    """
    if n is None:
        n = E.twist.n
    order = 1
    for v in E.twist.values:
        g = np.gcd(int(v), E.twist.n)
        order = int(np.lcm(order, E.twist.n // g)) if v % E.twist.n else order
    if n % order != 0:
        raise TwistMismatch("power %d is not a multiple of the twist order %d"
                            % (n, order),
                            module="projective-bundle",
                            operation="tensor_power_descend")
    out = {}
    for key, t in E.transitions.items():
        vals = t.matrix[None] if isinstance(t, Constant) else t.values
        acc = vals
        for _ in range(n - 1):
            acc = _kron(acc, vals)
        if isinstance(t, Constant):
            out[key] = Constant(acc[0])
        else:
            out[key] = Sampled(acc)
    result = OrdinaryBundleData(
        cover=E.cover, rank=E.rank ** n,
        twist=zero_twist(E.cover, 1),
        transitions=out, hermitian=E.hermitian, atlas=E.atlas,
        tolerance=n * E.tolerance)
    validate(result)
    return result


def gauge_twist(E: ProjectiveBundleData, mu) -> ProjectiveBundleData:
    """Rescale transitions by central scalars of a residue 1-cochain.

    Turns theta-twisted data into (theta + d mu)-twisted data.
    """
    from .gerbe import gauge_transform
    base = E.cover.base
    n = E.twist.n
    mu = [int(x) % n for x in mu]
    edge_idx = base.simplex_index(1)
    out = {}
    for (a, b), t in E.transitions.items():
        zeta = np.exp(2j * np.pi * mu[edge_idx[(a, b)]] / n)
        if isinstance(t, Constant):
            out[(a, b)] = Constant(zeta * t.matrix)
        else:
            dv = None if t.derivative is None else zeta * t.derivative
            out[(a, b)] = Sampled(zeta * t.values, dv)
    return replace(E, transitions=out, twist=gauge_transform(E.twist, mu))


def check_equivalence_witness(E: ProjectiveBundleData, Eprime: ProjectiveBundleData,
                              witness: dict, tolerance: float = None) -> bool:
    """Verify Q'_ab = T_a Q_ab T_b^{-1} at every sample.

    ``witness`` maps each cover vertex to a constant invertible matrix or to
    per-node samples (flat array over the atlas patch nodes).  Returns True
    when the conjugation identity holds within tolerance everywhere.
    """
    if E.cover != Eprime.cover:
        raise CoverMismatch("witness across different covers",
                            module="projective-bundle",
                            operation="check_equivalence_witness")
    if E.rank != Eprime.rank or not same_twist(E.twist, Eprime.twist):
        raise ShapeMismatch("witness requires equal rank and twist",
                            module="projective-bundle",
                            operation="check_equivalence_witness")
    tol = tolerance if tolerance is not None else max(E.tolerance, Eprime.tolerance)

    def witness_at(v, node_idx, m):
        w = witness[v]
        w = np.asarray(w)
        if w.ndim == 2:
            return np.broadcast_to(w, (m,) + w.shape)
        return w[node_idx]

    for (a, b) in E.transitions:
        t, tp = E.transitions[(a, b)], Eprime.transitions[(a, b)]
        if isinstance(t, Constant) and isinstance(tp, Constant) and \
                np.asarray(witness[a]).ndim == 2 and np.asarray(witness[b]).ndim == 2:
            q, qp = t.matrix[None], tp.matrix[None]
            ia = ib = np.zeros(1, dtype=int)
        else:
            if E.atlas is None:
                raise ShapeMismatch("sampled witness check needs an atlas",
                                    module="projective-bundle",
                                    operation="check_equivalence_witness",
                                    location=(a, b))
            ov = E.atlas.overlap(a, b)
            ia, ib = ov.idx_a, ov.idx_b
            m = len(ia)
            q = t.matrix[None] if isinstance(t, Constant) else t.values
            qp = tp.matrix[None] if isinstance(tp, Constant) else tp.values
            q = np.broadcast_to(q, (m,) + q.shape[1:]) if q.shape[0] == 1 else q
            qp = np.broadcast_to(qp, (m,) + qp.shape[1:]) if qp.shape[0] == 1 else qp
        m = q.shape[0]
        ta = witness_at(a, ia, m)
        tb = witness_at(b, ib, m)
        lhs = qp
        rhs = ta @ q @ np.linalg.inv(tb)
        res = float(np.max(np.linalg.norm(lhs - rhs, axis=(1, 2)))) if m else 0.0
        if res > tol:
            return False
    return True
