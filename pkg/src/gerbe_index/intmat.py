"""Exact integer matrices and Smith normal form.

Everything in this module is arbitrary-precision integer arithmetic; no
floating point is used anywhere.  Matrices are small (boundary maps of
desk-scale complexes), so plain Python ints in nested tuples are the
representation of choice: exact, hashable, and immune to overflow.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class IntegerMatrix:
    rows: int
    cols: int
    entries: tuple  # tuple of row tuples, python ints

    @staticmethod
    def from_rows(rows_list) -> "IntegerMatrix":
        rows_t = tuple(tuple(int(x) for x in row) for row in rows_list)
        r = len(rows_t)
        c = len(rows_t[0]) if r else 0
        for row in rows_t:
            if len(row) != c:
                raise ValueError("ragged rows")
        return IntegerMatrix(r, c, rows_t)

    @staticmethod
    def zeros(r: int, c: int) -> "IntegerMatrix":
        return IntegerMatrix(r, c, tuple(tuple(0 for _ in range(c)) for _ in range(r)))

    @staticmethod
    def identity(n: int) -> "IntegerMatrix":
        return IntegerMatrix(n, n, tuple(tuple(1 if i == j else 0 for j in range(n))
                                         for i in range(n)))

    def tolists(self):
        return [list(row) for row in self.entries]

    def transpose(self) -> "IntegerMatrix":
        return IntegerMatrix(self.cols, self.rows,
                             tuple(tuple(self.entries[i][j] for i in range(self.rows))
                                   for j in range(self.cols)))

    def __matmul__(self, other: "IntegerMatrix") -> "IntegerMatrix":
        if self.cols != other.rows:
            raise ValueError("shape mismatch in integer matmul")
        ot = other.transpose().entries
        out = tuple(tuple(sum(a * b for a, b in zip(row, col)) for col in ot)
                    for row in self.entries)
        return IntegerMatrix(self.rows, other.cols, out)

    def mul_vec(self, v):
        if len(v) != self.cols:
            raise ValueError("vector length mismatch")
        return [sum(a * b for a, b in zip(row, v)) for row in self.entries]

    def is_zero(self) -> bool:
        return all(all(x == 0 for x in row) for row in self.entries)

    def column(self, j: int):
        return [row[j] for row in self.entries]


def det_bareiss(M: IntegerMatrix) -> int:
    """Exact determinant by fraction-free Bareiss elimination."""
    n = M.rows
    if n != M.cols:
        raise ValueError("determinant of non-square matrix")
    if n == 0:
        return 1
    a = M.tolists()
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            a[i][k] = 0
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


@dataclass(frozen=True)
class SmithDecomposition:
    """Factorization M = U @ D @ V with unimodular U, V.

    D is diagonal with d_1 | d_2 | ... >= 0.  U_inv and V_inv are the exact
    inverses of U and V, tracked during elimination; they drive integer
    solves and kernel extraction downstream.
    """

    U: IntegerMatrix
    D: IntegerMatrix
    V: IntegerMatrix
    U_inv: IntegerMatrix
    V_inv: IntegerMatrix

    @property
    def diagonal(self):
        n = min(self.D.rows, self.D.cols)
        return [self.D.entries[i][i] for i in range(n)]

    @property
    def rank(self) -> int:
        return sum(1 for d in self.diagonal if d != 0)


def _xgcd(a: int, b: int):
    """g, x, y with x a + y b = g = gcd(a, b), g >= 0."""
    old_r, rr = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while rr:
        q = old_r // rr
        old_r, rr = rr, old_r - q * rr
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def smith_normal_form(M: IntegerMatrix) -> SmithDecomposition:
    """Smith normal form over the integers, total on all integer matrices.

    Diagonalization uses one-shot Bezout 2x2 transforms (far less transform
    entry growth than iterated Euclid steps); the divisibility chain is then
    fixed pairwise on the diagonal, where all multipliers stay small.
    Deterministic pivoting: minimal absolute value, lexicographic ties.
    """
    r, c = M.rows, M.cols
    A = M.tolists()
    U = IntegerMatrix.identity(r).tolists()
    Ui = IntegerMatrix.identity(r).tolists()
    V = IntegerMatrix.identity(c).tolists()
    Vi = IntegerMatrix.identity(c).tolists()

    def swap_rows(i, j):
        if i == j:
            return
        A[i], A[j] = A[j], A[i]
        Ui[i], Ui[j] = Ui[j], Ui[i]
        for row in U:
            row[i], row[j] = row[j], row[i]

    def swap_cols(i, j):
        if i == j:
            return
        for row in A:
            row[i], row[j] = row[j], row[i]
        V[i], V[j] = V[j], V[i]
        for row in Vi:
            row[i], row[j] = row[j], row[i]

    def negate_row(i):
        A[i] = [-x for x in A[i]]
        Ui[i] = [-x for x in Ui[i]]
        for row in U:
            row[i] = -row[i]

    def row_pair(i, j, a11, a12, a21, a22):
        # rows (i, j) <- (a11 r_i + a12 r_j, a21 r_i + a22 r_j); det must be +-1
        A[i], A[j] = ([a11 * x + a12 * y for x, y in zip(A[i], A[j])],
                      [a21 * x + a22 * y for x, y in zip(A[i], A[j])])
        Ui[i], Ui[j] = ([a11 * x + a12 * y for x, y in zip(Ui[i], Ui[j])],
                        [a21 * x + a22 * y for x, y in zip(Ui[i], Ui[j])])
        det = a11 * a22 - a12 * a21
        # U <- U L^{-1}: columns (i, j) combine with the adjugate over det
        for row in U:
            ui, uj = row[i], row[j]
            row[i] = (ui * a22 - uj * a21) * det
            row[j] = (-ui * a12 + uj * a11) * det
    # note: det in {+1,-1} so multiplying by det equals dividing by it

    def col_pair(i, j, b11, b12, b21, b22):
        # cols (i, j) <- (b11 c_i + b12 c_j, b21 c_i + b22 c_j); det +-1
        for row in A:
            ci, cj = row[i], row[j]
            row[i] = b11 * ci + b12 * cj
            row[j] = b21 * ci + b22 * cj
        for row in Vi:
            ci, cj = row[i], row[j]
            row[i] = b11 * ci + b12 * cj
            row[j] = b21 * ci + b22 * cj
        det = b11 * b22 - b21 * b12
        V[i], V[j] = ([(b22 * x - b21 * y) * det for x, y in zip(V[i], V[j])],
                      [(-b12 * x + b11 * y) * det for x, y in zip(V[i], V[j])])

    def add_col(j, i, q):
        if q == 0:
            return
        for row in A:
            row[j] += q * row[i]
        for row in Vi:
            row[j] += q * row[i]
        V[i] = [x - q * y for x, y in zip(V[i], V[j])]

    def add_row(i, j, q):
        if q == 0:
            return
        A[i] = [x + q * y for x, y in zip(A[i], A[j])]
        Ui[i] = [x + q * y for x, y in zip(Ui[i], Ui[j])]
        for row in U:
            row[j] -= q * row[i]

    def find_pivot(t):
        best = None
        for i in range(t, r):
            for j in range(t, c):
                v = A[i][j]
                if v != 0:
                    a = abs(v)
                    if best is None or a < best[0]:
                        best = (a, i, j)
        return best

    # Hermite preprocessing: column echelon with mod-pivot reduction of the
    # trailing row.  This keeps every later entry (and therefore the tracked
    # transforms) near the determinant scale; feeding the raw matrix to the
    # pivot loop instead lets fill-in compound exponentially.
    t = 0
    for row in range(r):
        if t >= c:
            break
        while True:
            nz = [j for j in range(t, c) if A[row][j]]
            if not nz:
                break
            piv = min(nz, key=lambda j: (abs(A[row][j]), j))
            swap_cols(t, piv)
            clean = True
            for j in range(t + 1, c):
                if A[row][j]:
                    add_col(j, t, -(A[row][j] // A[row][t]))
                    if A[row][j]:
                        clean = False
            if clean:
                break
        if t < c and A[row][t]:
            for j in range(t):
                if A[row][j]:
                    add_col(j, t, -(A[row][j] // A[row][t]))
            t += 1

    t = 0
    while t < min(r, c):
        piv = find_pivot(t)
        if piv is None:
            break
        swap_rows(t, piv[1])
        swap_cols(t, piv[2])
        while True:
            for i in range(t + 1, r):
                e = A[i][t]
                if e == 0:
                    continue
                p = A[t][t]
                if e % p == 0:
                    add_row(i, t, -(e // p))
                else:
                    g, x, y = _xgcd(p, e)
                    row_pair(t, i, x, y, -(e // g), p // g)
            for j in range(t + 1, c):
                e = A[t][j]
                if e == 0:
                    continue
                p = A[t][t]
                if e % p == 0:
                    add_col(j, t, -(e // p))
                else:
                    g, x, y = _xgcd(p, e)
                    col_pair(t, j, x, y, -(e // g), p // g)
            if all(A[i][t] == 0 for i in range(t + 1, r)) and \
                    all(A[t][j] == 0 for j in range(t + 1, c)):
                break
        if A[t][t] < 0:
            negate_row(t)
        t += 1

    # pairwise divisibility pass on the diagonal (bubble until stable)
    rank = t
    changed = True
    while changed:
        changed = False
        for i in range(rank - 1):
            a, b = A[i][i], A[i + 1][i + 1]
            if a == 0 or b % a == 0:
                continue
            changed = True
            add_col(i, i + 1, 1)                       # [[a,0],[b,b]]
            g, x, y = _xgcd(a, b)
            row_pair(i, i + 1, x, y, -(b // g), a // g)  # [[g,yb],[0,l]]
            add_col(i + 1, i, -(A[i][i + 1] // A[i][i]))
            if A[i][i] < 0:
                negate_row(i)
            if A[i + 1][i + 1] < 0:
                negate_row(i + 1)

    # explicit dims: empty row lists must not collapse the column count
    return SmithDecomposition(
        U=IntegerMatrix(r, r, tuple(tuple(row) for row in U)),
        D=IntegerMatrix(r, c, tuple(tuple(row) for row in A)),
        V=IntegerMatrix(c, c, tuple(tuple(row) for row in V)),
        U_inv=IntegerMatrix(r, r, tuple(tuple(row) for row in Ui)),
        V_inv=IntegerMatrix(c, c, tuple(tuple(row) for row in Vi)),
    )


def solve_integer(snf: SmithDecomposition, b):
    """One exact integer solution x of M x = b, or None when unsolvable.

    M is given through its Smith decomposition: M x = b iff
    D (V x) = U_inv b componentwise.
    """
    r, c = snf.D.rows, snf.D.cols
    if len(b) != r:
        raise ValueError("rhs length mismatch")
    y = snf.U_inv.mul_vec(b)
    diag = snf.diagonal
    xprime = [0] * c
    for i in range(r):
        d = diag[i] if i < len(diag) else 0
        if d == 0:
            if y[i] != 0:
                return None
        else:
            if y[i] % d != 0:
                return None
            if i < c:
                xprime[i] = y[i] // d
    return snf.V_inv.mul_vec(xprime)


def kernel_basis(snf: SmithDecomposition):
    """Basis of the integer kernel lattice of M, as a list of columns."""
    c = snf.D.cols
    diag = snf.diagonal
    rank = sum(1 for d in diag if d != 0)
    basis = []
    for i in range(rank, c):
        basis.append(snf.V_inv.column(i))
    return basis


def in_image(snf: SmithDecomposition, b) -> bool:
    return solve_integer(snf, b) is not None
