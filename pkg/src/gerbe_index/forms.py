"""Graded differential-form samples on an atlas.

A field stores, per patch and per degree, the coefficient arrays of the
form in chart coordinates: shape (ncomp, *grid) for scalar-valued and
(ncomp, *grid, r, r) for endomorphism-valued forms, with components ordered
by ascending multi-index.  All algebra (wedge, exterior derivative, trace,
truncated exponential series) is exact on the nilpotent graded algebra up
to the differencing error of d.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .atlas import Atlas, components, diff_axis
from .errors import DegreeMismatch


@functools.lru_cache(maxsize=None)
def _merge_table(dim: int, p: int, q: int):
    """(ia, ib, iout, sign) quadruples for wedging degree p with degree q."""
    cp = components(dim, p)
    cq = components(dim, q)
    cout = {c: i for i, c in enumerate(components(dim, p + q))}
    table = []
    for ia, I in enumerate(cp):
        for ib, J in enumerate(cq):
            if set(I) & set(J):
                continue
            merged = I + J
            sign = 1
            for x in range(len(merged)):
                for y in range(x + 1, len(merged)):
                    if merged[x] > merged[y]:
                        sign = -sign
            key = tuple(sorted(merged))
            table.append((ia, ib, cout[key], sign))
    return tuple(table)


@functools.lru_cache(maxsize=None)
def _insert_table(dim: int, p: int):
    """(axis, icomp, iout, sign) quadruples for d: dx^axis wedge dx^I."""
    cp = components(dim, p)
    cout = {c: i for i, c in enumerate(components(dim, p + 1))}
    table = []
    for ic, I in enumerate(cp):
        for a in range(dim):
            if a in I:
                continue
            sign = -1 if sum(1 for i in I if i < a) % 2 else 1
            key = tuple(sorted(I + (a,)))
            table.append((a, ic, cout[key], sign))
    return tuple(table)


@dataclass
class FormField:
    """Degree-graded form samples over every patch of an atlas."""

    atlas: Atlas
    data: dict                    # patch key -> {degree -> ndarray}
    matrix_rank: int = 0          # 0 for scalar-valued fields

    @property
    def dim(self) -> int:
        return self.atlas.dim

    def degrees(self):
        degs = set()
        for per in self.data.values():
            degs.update(per.keys())
        return sorted(degs)

    def _mshape(self):
        return (self.matrix_rank, self.matrix_rank) if self.matrix_rank else ()

    def component(self, patch: int, degree: int, idx) -> np.ndarray:
        arr = self.data[patch].get(degree)
        comp_list = components(self.dim, degree)
        shape = self.atlas.patches[patch].shape + self._mshape()
        if arr is None:
            return np.zeros(shape, dtype=complex)
        return arr[comp_list.index(tuple(idx))]

    @staticmethod
    def zero(atlas: Atlas, matrix_rank: int = 0) -> "FormField":
        return FormField(atlas, {k: {} for k in atlas.patches}, matrix_rank)

    @staticmethod
    def constant(atlas: Atlas, value, matrix_rank: int = 0) -> "FormField":
        out = FormField.zero(atlas, matrix_rank)
        for key, patch in atlas.patches.items():
            shape = (1,) + patch.shape
            if matrix_rank:
                base = np.broadcast_to(
                    np.asarray(value, dtype=complex),
                    shape + (matrix_rank, matrix_rank)).copy()
            else:
                base = np.full(shape, complex(value))
            out.data[key][0] = base
        return out

    def copy(self) -> "FormField":
        return FormField(self.atlas,
                         {k: {d: a.copy() for d, a in per.items()}
                          for k, per in self.data.items()},
                         self.matrix_rank)

    def _binary(self, other, op):
        out = FormField.zero(self.atlas, self.matrix_rank)
        for key in self.data:
            degs = set(self.data[key]) | set(other.data[key])
            for d in degs:
                a = self.data[key].get(d)
                b = other.data[key].get(d)
                if a is None:
                    a = np.zeros_like(b)
                if b is None:
                    b = np.zeros_like(a)
                out.data[key][d] = op(a, b)
        return out

    def __add__(self, other: "FormField") -> "FormField":
        return self._binary(other, np.add)

    def __sub__(self, other: "FormField") -> "FormField":
        return self._binary(other, np.subtract)

    def scaled(self, factor: complex) -> "FormField":
        out = self.copy()
        for per in out.data.values():
            for d in per:
                per[d] = per[d] * factor
        return out

    def extract(self, degree: int) -> "FormField":
        out = FormField.zero(self.atlas, self.matrix_rank)
        for key, per in self.data.items():
            if degree in per:
                out.data[key][degree] = per[degree].copy()
        return out

    def wedge(self, other: "FormField") -> "FormField":
        both_matrix = self.matrix_rank and other.matrix_rank
        rank = self.matrix_rank or other.matrix_rank
        out = FormField.zero(self.atlas, rank)
        dim = self.dim
        for key in self.data:
            for p, A in self.data[key].items():
                for q, B in other.data[key].items():
                    if p + q > dim:
                        continue
                    nout = len(components(dim, p + q))
                    shape = (nout,) + self.atlas.patches[key].shape
                    if rank:
                        shape = shape + (rank, rank)
                    acc = out.data[key].get(p + q)
                    if acc is None:
                        acc = np.zeros(shape, dtype=complex)
                    for ia, ib, io, sign in _merge_table(dim, p, q):
                        a, b = A[ia], B[ib]
                        if both_matrix:
                            term = a @ b
                        elif self.matrix_rank:
                            term = a * b[..., None, None]
                        elif other.matrix_rank:
                            term = a[..., None, None] * b
                        else:
                            term = a * b
                        acc[io] += sign * term
                    out.data[key][p + q] = acc
        return out

    def exterior_derivative(self) -> "FormField":
        out = FormField.zero(self.atlas, self.matrix_rank)
        dim = self.dim
        for key, per in self.data.items():
            patch = self.atlas.patches[key]
            for p, A in per.items():
                if p + 1 > dim:
                    continue
                nout = len(components(dim, p + 1))
                shape = (nout,) + patch.shape + self._mshape()
                acc = out.data[key].get(p + 1)
                if acc is None:
                    acc = np.zeros(shape, dtype=complex)
                for axis, ic, io, sign in _insert_table(dim, p):
                    ax = patch.axes[axis]
                    acc[io] += sign * diff_axis(A[ic], axis, ax.h, ax.periodic,
                                                array_axis=axis)
                out.data[key][p + 1] = acc
        return out

    def trace(self) -> "FormField":
        if not self.matrix_rank:
            raise DegreeMismatch("trace of a scalar field",
                                 module="chern-weil", operation="trace")
        out = FormField.zero(self.atlas, 0)
        for key, per in self.data.items():
            for d, arr in per.items():
                out.data[key][d] = np.trace(arr, axis1=-2, axis2=-1)
        return out

    def max_abs(self) -> float:
        worst = 0.0
        for per in self.data.values():
            for arr in per.values():
                if arr.size:
                    worst = max(worst, float(np.max(np.abs(arr))))
        return worst


def wedge_power(M: FormField, m: int) -> FormField:
    acc = M
    for _ in range(m - 1):
        acc = acc.wedge(M)
    return acc


def exp_series(S: FormField) -> FormField:
    """exp of a scalar field with components in degrees >= 2 only.

    Exact on the nilpotent algebra: the series stops at degree dim.
    """
    out = FormField.constant(S.atlas, 1.0)
    term = None
    mmax = S.dim // 2 if S.degrees() else 0
    for m in range(1, max(mmax, 0) + 1):
        term = S if term is None else term.wedge(S)
        out = out + term.scaled(1.0 / math.factorial(m))
    return out


def pullback_on_overlap(form: FormField, a: int, b: int):
    """Predict chart-b components at overlap pairs from chart-a samples.

    Returns {degree: (m, ncomp[, r, r]) arrays} via minors of the chart
    Jacobian; compare against the chart-b samples gathered at idx_b.
    """
    atlas = form.atlas
    ov = atlas.overlap(a, b)
    jac = ov.jac_ab                      # d x_a / d x_b
    dim = form.dim
    out = {}
    for p, A in form.data[a].items():
        comp_list = components(dim, p)
        m = len(ov.idx_a)
        shape = (m, len(comp_list)) + ((form.matrix_rank,) * 2 if form.matrix_rank else ())
        pred = np.zeros(shape, dtype=complex)
        flatA = A.reshape((A.shape[0], -1) + A.shape[1 + dim:])
        gathered = flatA[:, ov.idx_a]
        for jb, J in enumerate(comp_list):
            for ja, I in enumerate(comp_list):
                sub = jac[:, np.asarray(I, dtype=int)[:, None],
                          np.asarray(J, dtype=int)[None, :]]
                minor = np.linalg.det(sub) if p else np.ones(m)
                if form.matrix_rank:
                    pred[:, jb] += minor[:, None, None] * gathered[ja]
                else:
                    pred[:, jb] += minor * gathered[ja]
        out[p] = pred
    return out


def overlap_residual(form: FormField, conjugators: dict = None) -> float:
    """Worst mismatch of the field across all overlap correspondences.

    ``conjugators`` optionally maps edge (a, b) to (m, r, r) transition
    samples; endomorphism-valued fields are compared after conjugation,
    scalar fields directly.
    """
    atlas = form.atlas
    worst = 0.0
    dim = form.dim
    for (a, b), _ in atlas.overlaps.items():
        ov = atlas.overlap(a, b)
        pred = pullback_on_overlap(form, a, b)
        for p, pa in pred.items():
            B = form.data[b].get(p)
            if B is None:
                B = np.zeros((len(components(dim, p)),)
                             + atlas.patches[b].shape + (
                                 (form.matrix_rank,) * 2 if form.matrix_rank else ()),
                             dtype=complex)
            flatB = B.reshape((B.shape[0], -1) + B.shape[1 + dim:])
            actual = np.moveaxis(flatB[:, ov.idx_b], 0, 1)
            if form.matrix_rank and conjugators is not None:
                q = conjugators[(a, b)] if (a, b) in conjugators else \
                    np.linalg.inv(conjugators[(b, a)])
                qinv = np.linalg.inv(q)
                pa = qinv[:, None] @ pa @ q[:, None]
            diff = np.abs(actual - pa)
            if diff.size:
                worst = max(worst, float(np.max(diff)))
    return worst


def fiber_pushforward(form: FormField) -> FormField:
    """Integrate out the fiber axes of a product-atlas field.

    Keeps the components containing both fiber directions, integrates them
    over the fiber grid, and reindexes onto the base atlas.  Fiber axes come
    last, so no reordering signs appear.
    """
    atlas = form.atlas
    if atlas.base is None or atlas.n_fiber_axes != 2:
        raise DegreeMismatch("pushforward needs a two-axis fiber product atlas",
                             module="chern-weil", operation="fiber_pushforward")
    base = atlas.base
    dim = form.dim
    fib = (dim - 2, dim - 1)
    out = FormField.zero(base, form.matrix_rank)
    for key, per in form.data.items():
        patch = atlas.patches[key]
        wfiber = patch.axes[-1].h * patch.axes[-2].h
        for p, A in per.items():
            comp_list = components(dim, p)
            keep = [(i, I[:-2]) for i, I in enumerate(comp_list)
                    if I[-2:] == fib] if p >= 2 else []
            if not keep:
                continue
            base_comps = components(base.dim, p - 2)
            nout = len(base_comps)
            shape = (nout,) + base.patches[key].shape + (
                (form.matrix_rank,) * 2 if form.matrix_rank else ())
            acc = out.data[key].get(p - 2)
            if acc is None:
                acc = np.zeros(shape, dtype=complex)
            grid_axes = (1 + base.dim, 2 + base.dim)
            for i, J in keep:
                acc[base_comps.index(J)] += wfiber * np.sum(A[i], axis=(base.dim,
                                                                        base.dim + 1))
            out.data[key][p - 2] = acc
    return out


def base_pullback(form: FormField, product: Atlas) -> FormField:
    """Extend a base-atlas field constantly along the fiber axes."""
    base = product.base
    if base is None:
        raise DegreeMismatch("target atlas is not a product",
                             module="chern-weil", operation="base_pullback")
    out = FormField.zero(product, form.matrix_rank)
    dim = product.dim
    for key, per in form.data.items():
        fibshape = product.patches[key].shape[base.dim:]
        for p, A in per.items():
            base_comps = components(base.dim, p)
            all_comps = components(dim, p)
            nout = len(all_comps)
            shape = (nout,) + product.patches[key].shape + (
                (form.matrix_rank,) * 2 if form.matrix_rank else ())
            arr = np.zeros(shape, dtype=complex)
            for i, J in enumerate(base_comps):
                src = A[i]
                src = src.reshape(src.shape[:base.dim] + (1, 1) + src.shape[base.dim:])
                arr[all_comps.index(J)] = np.broadcast_to(
                    src, product.patches[key].shape + src.shape[base.dim + 2:])
            out.data[key][p] = arr
    return out
