"""Matrices over the jet ring, plus exact scalar-matrix linear algebra.

Jet-valued matrices carry transition data for sheaf gluing and connection
matrices for flatness checks.  Scalar (Coeff) matrices appear wherever data
is restricted to a point: rank computations for the injectivity and
generation conditions, and Jacobians of linear parts.
"""

from __future__ import annotations

from typing import Callable, List, Sequence

from .errors import NotInvertibleError, ShapeError
from .jets import (
    Jet,
    PolyMap,
    jet_add,
    jet_compose,
    jet_const,
    jet_eval,
    jet_eq,
    jet_flip_var,
    jet_is_zero,
    jet_mul,
    jet_neg,
    jet_partial,
    jet_scale,
    jet_sub,
    jet_truncate,
    jet_var,
    jet_with_order,
    jet_zero,
)
from .scalars import Coeff, ONE, ZERO

JetRows = List[List[Jet]]
CoeffRows = List[List[Coeff]]


class JetMatrix:
    """Rectangular matrix with jet entries sharing one shape."""

    __slots__ = ("rows", "cols", "num_vars", "order", "entries")

    def __init__(self, entries: Sequence[Sequence[Jet]]):
        entries = [list(row) for row in entries]
        if not entries or not entries[0]:
            raise ShapeError("matrix needs at least one entry")
        cols = len(entries[0])
        first = entries[0][0]
        for row in entries:
            if len(row) != cols:
                raise ShapeError("ragged matrix")
            for x in row:
                if x.num_vars != first.num_vars or x.order != first.order:
                    raise ShapeError("matrix entries must share one jet shape")
        self.rows = len(entries)
        self.cols = cols
        self.num_vars = first.num_vars
        self.order = first.order
        self.entries = entries

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JetMatrix):
            return NotImplemented
        return matrix_eq(self, other)

    def __hash__(self):
        raise TypeError("matrices are not hashable")

    def __repr__(self) -> str:
        return f"JetMatrix({self.rows}x{self.cols}, {self.num_vars} vars, order {self.order})"


def matrix_identity(n: int, num_vars: int, order: int) -> JetMatrix:
    one = jet_const(num_vars, order, ONE)
    zero = jet_zero(num_vars, order)
    return JetMatrix([[one if i == j else zero for j in range(n)] for i in range(n)])


def matrix_zero(rows: int, cols: int, num_vars: int, order: int) -> JetMatrix:
    z = jet_zero(num_vars, order)
    return JetMatrix([[z for _ in range(cols)] for _ in range(rows)])


def matrix_map(m: JetMatrix, fn: Callable[[Jet], Jet]) -> JetMatrix:
    return JetMatrix([[fn(x) for x in row] for row in m.entries])


def matrix_add(a: JetMatrix, b: JetMatrix) -> JetMatrix:
    _check_same_dims(a, b)
    return JetMatrix(
        [[jet_add(x, y) for x, y in zip(ra, rb)] for ra, rb in zip(a.entries, b.entries)]
    )


def matrix_sub(a: JetMatrix, b: JetMatrix) -> JetMatrix:
    _check_same_dims(a, b)
    return JetMatrix(
        [[jet_sub(x, y) for x, y in zip(ra, rb)] for ra, rb in zip(a.entries, b.entries)]
    )


def matrix_neg(a: JetMatrix) -> JetMatrix:
    return matrix_map(a, jet_neg)


def matrix_scale(a: JetMatrix, s: Coeff) -> JetMatrix:
    return matrix_map(a, lambda x: jet_scale(x, s))


def matrix_scale_jet(a: JetMatrix, f: Jet) -> JetMatrix:
    return matrix_map(a, lambda x: jet_mul(x, f))


def matrix_mul(a: JetMatrix, b: JetMatrix) -> JetMatrix:
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    out = []
    for i in range(a.rows):
        row = []
        for j in range(b.cols):
            acc = jet_zero(a.num_vars, a.order)
            for k in range(a.cols):
                acc = jet_add(acc, jet_mul(a.entries[i][k], b.entries[k][j]))
            row.append(acc)
        out.append(row)
    return JetMatrix(out)


def matrix_transpose(a: JetMatrix) -> JetMatrix:
    return JetMatrix([[a.entries[i][j] for i in range(a.rows)] for j in range(a.cols)])


def matrix_eq(a: JetMatrix, b: JetMatrix) -> bool:
    if (a.rows, a.cols) != (b.rows, b.cols):
        return False
    return all(
        jet_eq(x, y) for ra, rb in zip(a.entries, b.entries) for x, y in zip(ra, rb)
    )


def matrix_is_zero(a: JetMatrix) -> bool:
    return all(jet_is_zero(x) for row in a.entries for x in row)


def matrix_partial(a: JetMatrix, var: int) -> JetMatrix:
    return matrix_map(a, lambda x: jet_partial(x, var))


def matrix_flip_var(a: JetMatrix, var: int) -> JetMatrix:
    return matrix_map(a, lambda x: jet_flip_var(x, var))


def matrix_compose(a: JetMatrix, g: PolyMap) -> JetMatrix:
    return matrix_map(a, lambda x: jet_compose(x, g))


def matrix_truncate(a: JetMatrix, order: int) -> JetMatrix:
    return matrix_map(a, lambda x: jet_truncate(x, order))


def matrix_with_order(a: JetMatrix, order: int) -> JetMatrix:
    return matrix_map(a, lambda x: jet_with_order(x, order))


def matrix_eval(a: JetMatrix, point: Sequence[Coeff]) -> CoeffRows:
    return [[jet_eval(x, point) for x in row] for row in a.entries]


def matrix_det(a: JetMatrix) -> Jet:
    """Determinant by cofactor expansion; fine for the small ranks used in
    transition data."""
    if a.rows != a.cols:
        raise ShapeError("determinant of a non-square matrix")
    n = a.rows
    if n == 1:
        return a.entries[0][0]

    def minor(entries: JetRows, col: int) -> JetRows:
        return [[row[j] for j in range(len(row)) if j != col] for row in entries[1:]]

    def det(entries: JetRows) -> Jet:
        k = len(entries)
        if k == 1:
            return entries[0][0]
        acc = jet_zero(a.num_vars, a.order)
        for j, top in enumerate(entries[0]):
            if jet_is_zero(top):
                continue
            sub = jet_mul(top, det(minor(entries, j)))
            acc = jet_add(acc, sub if j % 2 == 0 else jet_neg(sub))
        return acc

    return det(a.entries)


def jet_reciprocal(f: Jet) -> Jet:
    """1/f as a jet, requiring an invertible constant term.

    With f = c (1 - u) and u constant-free, the geometric series terminates
    at the truncation order.
    """
    c = f.terms.get((0,) * f.num_vars, ZERO)
    if c.is_zero():
        raise NotInvertibleError("reciprocal of a jet with zero constant term")
    inv_c = ONE / c
    u = jet_neg(jet_scale(jet_sub(f, jet_const(f.num_vars, f.order, c)), inv_c))
    acc = jet_const(f.num_vars, f.order, ONE)
    power = jet_const(f.num_vars, f.order, ONE)
    for _ in range(f.order):
        power = jet_mul(power, u)
        if jet_is_zero(power):
            break
        acc = jet_add(acc, power)
    return jet_scale(acc, inv_c)


def matrix_inverse(a: JetMatrix) -> JetMatrix:
    """Inverse over the jet ring via Gauss-Jordan with jet pivots.

    Requires the scalar matrix of constant terms to be invertible (otherwise
    no inverse exists over the local ring)."""
    if a.rows != a.cols:
        raise ShapeError("inverse of a non-square matrix")
    n = a.rows
    nv, order = a.num_vars, a.order
    work = [list(row) for row in a.entries]
    out = [
        [jet_const(nv, order, ONE if i == j else ZERO) for j in range(n)]
        for i in range(n)
    ]
    for col in range(n):
        pivot = None
        for r in range(col, n):
            if not work[r][col].terms.get((0,) * nv, ZERO).is_zero():
                pivot = r
                break
        if pivot is None:
            raise NotInvertibleError("constant term of matrix is singular")
        work[col], work[pivot] = work[pivot], work[col]
        out[col], out[pivot] = out[pivot], out[col]
        inv = jet_reciprocal(work[col][col])
        work[col] = [jet_mul(inv, x) for x in work[col]]
        out[col] = [jet_mul(inv, x) for x in out[col]]
        for r in range(n):
            if r == col:
                continue
            factor = work[r][col]
            if jet_is_zero(factor):
                continue
            work[r] = [jet_sub(x, jet_mul(factor, y)) for x, y in zip(work[r], work[col])]
            out[r] = [jet_sub(x, jet_mul(factor, y)) for x, y in zip(out[r], out[col])]
    return JetMatrix(out)


# ---------------------------------------------------------------------------
# exact scalar linear algebra
# ---------------------------------------------------------------------------


def coeff_matmul(a: CoeffRows, b: CoeffRows) -> CoeffRows:
    if not a or not b or len(a[0]) != len(b):
        raise ShapeError("scalar matrix shape mismatch")
    cols = len(b[0])
    return [
        [sum((a[i][k] * b[k][j] for k in range(len(b))), ZERO) for j in range(cols)]
        for i in range(len(a))
    ]


def coeff_matvec(a: CoeffRows, v: Sequence[Coeff]) -> list[Coeff]:
    if not a or len(a[0]) != len(v):
        raise ShapeError("scalar matrix/vector shape mismatch")
    return [sum((row[k] * v[k] for k in range(len(v))), ZERO) for row in a]


def coeff_rank(mat: CoeffRows) -> int:
    """Exact rank by Gaussian elimination (fraction-free not needed at the
    sizes involved)."""
    if not mat:
        return 0
    work = [list(row) for row in mat]
    rows, cols = len(work), len(work[0])
    rank = 0
    row = 0
    for col in range(cols):
        pivot = next((r for r in range(row, rows) if not work[r][col].is_zero()), None)
        if pivot is None:
            continue
        work[row], work[pivot] = work[pivot], work[row]
        inv = ONE / work[row][col]
        work[row] = [inv * x for x in work[row]]
        for r in range(rows):
            if r == row:
                continue
            f = work[r][col]
            if f.is_zero():
                continue
            work[r] = [x - f * y for x, y in zip(work[r], work[row])]
        rank += 1
        row += 1
        if row == rows:
            break
    return rank


def coeff_det(mat: CoeffRows) -> Coeff:
    n = len(mat)
    if any(len(row) != n for row in mat):
        raise ShapeError("determinant of a non-square matrix")
    work = [list(row) for row in mat]
    det = ONE
    for col in range(n):
        pivot = next((r for r in range(col, n) if not work[r][col].is_zero()), None)
        if pivot is None:
            return ZERO
        if pivot != col:
            work[col], work[pivot] = work[pivot], work[col]
            det = -det
        det = det * work[col][col]
        inv = ONE / work[col][col]
        for r in range(col + 1, n):
            f = work[r][col] * inv
            if f.is_zero():
                continue
            work[r] = [x - f * y for x, y in zip(work[r], work[col])]
    return det


def column_span_rank(columns: Sequence[Sequence[Coeff]]) -> int:
    """Rank of the span of the given column vectors."""
    if not columns:
        return 0
    return coeff_rank([list(col) for col in zip(*columns)])


def _check_same_dims(a: JetMatrix, b: JetMatrix) -> None:
    if (a.rows, a.cols) != (b.rows, b.cols):
        raise ShapeError(
            f"matrix shape mismatch: {a.rows}x{a.cols} vs {b.rows}x{b.cols}"
        )


def matrix_from_rows(num_vars: int, order: int, rows: Sequence[Sequence[Jet]]) -> JetMatrix:
    lifted = [[jet_with_order(x, order) for x in row] for row in rows]
    m = JetMatrix(lifted)
    if m.num_vars != num_vars:
        raise ShapeError("entries do not live in the declared variable ring")
    return m


def matrix_var_coeff(n: int, num_vars: int, order: int, scalar_rows: CoeffRows) -> JetMatrix:
    """Lift a scalar matrix to a constant jet matrix."""
    if len(scalar_rows) != n or any(len(r) != n for r in scalar_rows):
        raise ShapeError("scalar matrix has wrong size")
    return JetMatrix(
        [[jet_const(num_vars, order, c) for c in row] for row in scalar_rows]
    )
