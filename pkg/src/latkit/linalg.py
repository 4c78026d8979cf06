"""Exact GF(2) and dyadic-rational linear algebra.

Everything in the encoding / membership path is exact: binary matrices are
numpy uint8 arrays (heavy elimination runs on Python-int bitsets), and
rational matrices are dyadic (integer numerators over a power-of-two
denominator).  Floating point never enters any routine in this module.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

__all__ = [
    "DyadicMatrix",
    "AltPartition",
    "RankDeficientError",
    "check_unimodular",
    "gf2_mul",
    "gf2_matvec",
    "gf2_rank",
    "gf2_nullspace_basis",
    "gf2_triangularize",
    "solve_alt",
    "back_substitute",
]

# Abort a solve once intermediates pass this magnitude; the result of the
# next accumulation step is then still exact in int64.
_INT64_GUARD = 1 << 52
# Solution components are kept small enough that a subsequent row dot
# product (n entries of bounded size) cannot wrap in int64.
_SOLVE_GUARD = 1 << 40


class RankDeficientError(ValueError):
    """GF(2) elimination failed; carries the column with no usable pivot."""

    def __init__(self, column: int):
        super().__init__(f"matrix is rank deficient over GF(2): no pivot for column {column}")
        self.column = column


# ---------------------------------------------------------------------------
# GF(2) helpers (uint8 in the API, int bitsets inside)
# ---------------------------------------------------------------------------


def _as_bits(M) -> np.ndarray:
    A = np.asarray(M)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return (A.astype(np.int64) & 1).astype(np.uint8)


def _rows_to_ints(M: np.ndarray) -> list[int]:
    # bit j of the int is column j
    packed = np.packbits(M, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def _ints_to_rows(rows: list[int], n_cols: int) -> np.ndarray:
    n_bytes = (n_cols + 7) // 8
    buf = b"".join(r.to_bytes(n_bytes, "little") for r in rows)
    arr = np.frombuffer(buf, dtype=np.uint8).reshape(len(rows), n_bytes)
    return np.unpackbits(arr, axis=1, bitorder="little")[:, :n_cols].copy()


def gf2_mul(A, B) -> np.ndarray:
    """Binary matrix product A @ B over GF(2)."""
    A = _as_bits(A)
    B = _as_bits(B)
    return (A.astype(np.int64) @ B.astype(np.int64) & 1).astype(np.uint8)


def gf2_matvec(A, x) -> np.ndarray:
    """Binary matrix-vector product over GF(2)."""
    A = _as_bits(A)
    x = np.asarray(x, dtype=np.int64) & 1
    return ((A.astype(np.int64) @ x) & 1).astype(np.uint8)


def gf2_rank(M) -> int:
    """Rank over GF(2) via bitset Gaussian elimination."""
    M = _as_bits(M)
    rows = _rows_to_ints(M)
    rank = 0
    for col in range(M.shape[1]):
        mask = 1 << col
        piv = next((i for i in range(rank, len(rows)) if rows[i] & mask), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i] & mask:
                rows[i] ^= rows[rank]
        rank += 1
        if rank == len(rows):
            break
    return rank


def gf2_nullspace_basis(M) -> np.ndarray:
    """Basis of the right nullspace of a binary matrix, one vector per row."""
    M = _as_bits(M)
    m, n = M.shape
    rows = _rows_to_ints(M)
    pivot_col_of_row: list[int] = []
    rank = 0
    for col in range(n):
        mask = 1 << col
        piv = next((i for i in range(rank, m) if rows[i] & mask), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(m):
            if i != rank and rows[i] & mask:
                rows[i] ^= rows[rank]
        pivot_col_of_row.append(col)
        rank += 1
    pivots = set(pivot_col_of_row)
    free = [c for c in range(n) if c not in pivots]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for bi, f in enumerate(free):
        basis[bi, f] = 1
        for r, p in enumerate(pivot_col_of_row):
            basis[bi, p] = (rows[r] >> f) & 1
    return basis


def gf2_triangularize(M) -> tuple[np.ndarray, np.ndarray]:
    """Reduce a full-rank square binary matrix to lower-triangular form.

    Uses row operations only (XOR and swaps, never column permutations) and
    picks the lowest-index usable row for every pivot.  Returns ``(W, T)``
    with ``W`` invertible over GF(2) and ``W @ M = T`` lower triangular with
    a unit diagonal.

    Raises:
        RankDeficientError: no row can supply a pivot for some column.
    """
    M = _as_bits(M)
    n, m = M.shape
    if n != m:
        raise ValueError("gf2_triangularize requires a square matrix")
    work = _rows_to_ints(M)
    ident = [1 << i for i in range(n)]  # W accumulator, same row ops
    out_rows: list[int | None] = [None] * n
    out_w: list[int | None] = [None] * n
    avail = list(range(n))
    # Pivot on the rightmost column first so the result is *lower* triangular:
    # row j of T ends at column j.
    for col in range(n - 1, -1, -1):
        mask = 1 << col
        piv = next((i for i in avail if work[i] & mask), None)
        if piv is None:
            raise RankDeficientError(col)
        avail.remove(piv)
        prow, pw = work[piv], ident[piv]
        for i in avail:
            if work[i] & mask:
                work[i] ^= prow
                ident[i] ^= pw
        out_rows[col] = prow
        out_w[col] = pw
    T = _ints_to_rows(out_rows, n)
    W = _ints_to_rows(out_w, n)
    return W, T


# ---------------------------------------------------------------------------
# Unimodularity
# ---------------------------------------------------------------------------


def _is_triangular(A: np.ndarray) -> str | None:
    if np.all(A[np.triu_indices_from(A, 1)] == 0):
        return "lower"
    if np.all(A[np.tril_indices_from(A, -1)] == 0):
        return "upper"
    return None


def check_unimodular(M) -> bool:
    """True iff the square integer matrix has determinant +-1.

    Exact: triangular matrices short-circuit to a diagonal product, anything
    else goes through fraction-free (Bareiss) elimination on Python ints.
    """
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("check_unimodular requires a square matrix")
    if not np.issubdtype(A.dtype, np.integer):
        if not np.all(A == np.round(A)):
            return False
        A = A.astype(np.int64)
    if _is_triangular(A):
        return bool(np.all(np.abs(np.diagonal(A)) == 1))
    a = [[int(v) for v in row] for row in A]
    n = len(a)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            piv = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if piv is None:
                return False
            a[k], a[piv] = a[piv], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return abs(a[n - 1][n - 1]) == 1 if n else True


# ---------------------------------------------------------------------------
# Dyadic matrices
# ---------------------------------------------------------------------------


class DyadicMatrix:
    """Exact matrix with entries numerator / 2**exponent.

    Stored as an integer numerator array over one shared exponent, kept
    normalized so the shared exponent is minimal.  ``entry(i, j)`` exposes
    the per-entry normalized (numerator, exponent) pair, with the numerator
    odd or zero.
    """

    __slots__ = ("num", "exp")

    def __init__(self, num, exp: int = 0, normalize: bool = True):
        self.num = np.asarray(num, dtype=np.int64).copy()
        if self.num.ndim != 2:
            raise ValueError("DyadicMatrix is 2-D")
        if exp < 0:
            self.num = self.num << (-exp)
            exp = 0
        self.exp = int(exp)
        if normalize:
            self._normalize()

    def _normalize(self) -> None:
        while self.exp > 0 and not np.any(self.num & 1):
            self.num >>= 1
            self.exp -= 1

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_rows(cls, rows) -> "DyadicMatrix":
        """Build from nested Fractions/ints/floats with dyadic denominators."""
        fr = [[Fraction(v) for v in row] for row in rows]
        exp = 0
        for row in fr:
            for v in row:
                d = v.denominator
                e = d.bit_length() - 1
                if (1 << e) != d:
                    raise ValueError(f"entry {v} is not dyadic")
                exp = max(exp, e)
        num = [[int(v * (1 << exp)) for v in row] for row in fr]
        return cls(np.array(num, dtype=np.int64), exp)

    @classmethod
    def identity(cls, n: int) -> "DyadicMatrix":
        return cls(np.eye(n, dtype=np.int64), 0)

    # -- basic views -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.num.shape

    def entry(self, i: int, j: int) -> tuple[int, int]:
        """Normalized (numerator, exponent) of entry (i, j)."""
        v = int(self.num[i, j])
        e = self.exp
        while e > 0 and v % 2 == 0 and v != 0:
            v //= 2
            e -= 1
        return (v, 0) if v == 0 else (v, e)

    def to_float(self) -> np.ndarray:
        return self.num.astype(np.float64) / (1 << self.exp)

    def to_fractions(self) -> list[list[Fraction]]:
        d = 1 << self.exp
        return [[Fraction(int(v), d) for v in row] for row in self.num]

    def diagonal_fractions(self) -> list[Fraction]:
        d = 1 << self.exp
        return [Fraction(int(v), d) for v in np.diagonal(self.num)]

    def is_lower_triangular(self) -> bool:
        return bool(np.all(self.num[np.triu_indices_from(self.num, 1)] == 0))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DyadicMatrix)
            and self.exp == other.exp
            and np.array_equal(self.num, other.num)
        )

    def __repr__(self) -> str:
        return f"DyadicMatrix(shape={self.shape}, exp={self.exp})"

    # -- exact arithmetic ----------------------------------------------------

    def scale_rows_pow2(self, exps) -> "DyadicMatrix":
        """Multiply row j by 2**exps[j] (exact)."""
        exps = np.asarray(exps, dtype=np.int64)
        num = self.num.copy()
        e = self.exp
        neg = -min(0, int(exps.min()) - 0)
        # lift everything so all shifts are left shifts
        shift = exps + neg
        num = num << shift[:, None]
        return DyadicMatrix(num, e + neg)

    def matmul(self, other: "DyadicMatrix") -> "DyadicMatrix":
        prod = _checked_int_matmul(self.num, other.num)
        return DyadicMatrix(prod, self.exp + other.exp)

    def matvec_int(self, x) -> tuple[np.ndarray, int]:
        """Exact product with an integer vector: returns (numerators, exp)."""
        x = np.asarray(x, dtype=np.int64)
        out = _checked_int_matvec(self.num, x)
        return out, self.exp

    def mulvec_integral(self, x) -> np.ndarray:
        """H @ x for integer x, requiring an integer result.

        Raises ValueError if any component is not an integer.
        """
        out, e = self.matvec_int(x)
        if e and np.any(out & ((1 << e) - 1)):
            raise ValueError("product is not an integer vector")
        return out >> e

    def mod2_numerators(self) -> np.ndarray:
        """Numerators mod 2 (meaningful when exp == 0)."""
        if self.exp != 0:
            raise ValueError("matrix has non-integer entries")
        return (self.num & 1).astype(np.uint8)


def _checked_int_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = a @ b
    # redo in object arithmetic if anything got near the overflow guard
    if out.size and max(abs(int(out.max())), abs(int(out.min()))) > _INT64_GUARD:
        obj = a.astype(object) @ b.astype(object)
        if np.any(obj != out):
            raise OverflowError("integer matrix product exceeds 64-bit range")
    return out


def _checked_int_matvec(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = a @ x
    if out.size and max(abs(int(out.max())), abs(int(out.min()))) > _INT64_GUARD:
        obj = a.astype(object) @ x.astype(object)
        if np.any(obj != out):
            raise OverflowError("integer matrix-vector product exceeds 64-bit range")
    return out


# ---------------------------------------------------------------------------
# ALT solves
# ---------------------------------------------------------------------------


class AltPartition:
    """Approximate-lower-triangular structure of a check matrix.

    The matrix (after scaling each row to integers) is split as
    ``[[B, A], [X, C]]`` with ``A`` lower triangular (nonzero diagonal) of
    size s and ``X`` the g-by-g gap block.  The g leading solution
    coordinates come from the precomputed g-by-n operator
    ``[-inv(S) C inv(A) | inv(S)]`` with ``S = X - C inv(A) B``; the rest by
    back-substitution.  ``gap == 0`` means plain lower triangular.
    """

    __slots__ = (
        "gap",
        "n",
        "rows_num",
        "row_shift",
        "top_op",
        "top_den",
        "_row_idx",
        "_row_val",
        "_diag",
    )

    def __init__(self, H: DyadicMatrix):
        num = H.num
        n, m = num.shape
        if n != m:
            raise ValueError("ALT solve requires a square matrix")
        self.n = n
        # Scale rows individually so each row is integer with odd content;
        # solving R H x = R b is equivalent for any row scaling R.
        shifts = np.zeros(n, dtype=np.int64)
        rows = num.copy()
        for i in range(n):
            row = rows[i]
            nz = row[row != 0]
            if nz.size == 0:
                raise ValueError(f"row {i} of the check matrix is zero")
            # largest power of two dividing every entry of the row
            g = 0
            while g < 62 and not np.any(nz >> g & 1):
                g += 1
            rows[i] = row >> g
            shifts[i] = H.exp - g
        self.rows_num = rows
        self.row_shift = shifts  # solve uses rhs_i = b_i * 2**row_shift[i]
        self.gap = self._detect_gap(rows)
        # sparse view of each back-substitution row (entries left of the diagonal)
        g = self.gap
        self._row_idx = []
        self._row_val = []
        self._diag = np.zeros(n - g, dtype=np.int64)
        for w in range(g, n):
            j = w - g
            idx = np.nonzero(rows[j, :w])[0]
            self._row_idx.append(idx)
            self._row_val.append(rows[j, idx].copy())
            self._diag[j] = rows[j, w]
        g = self.gap
        if g:
            s = n - g
            frac = [[Fraction(int(v)) for v in row] for row in rows]
            B = [[frac[i][j] for j in range(g)] for i in range(s)]
            A = [[frac[i][j + g] for j in range(s)] for i in range(s)]
            X = [[frac[i + s][j] for j in range(g)] for i in range(g)]
            C = [[frac[i + s][j + g] for j in range(s)] for i in range(g)]
            Ainv = _invert_lower_triangular(A)
            CAinv = _frac_matmul(C, Ainv)
            S = _frac_sub(X, _frac_matmul(CAinv, B))
            Sinv = _frac_inverse(S)
            left = _frac_neg(_frac_matmul(Sinv, CAinv))
            op = [left[i] + Sinv[i] for i in range(g)]
            self.top_op, self.top_den = _frac_rows_to_dyadic(op)
        else:
            self.top_op, self.top_den = None, 0

    @staticmethod
    def _detect_gap(rows: np.ndarray) -> int:
        n = rows.shape[0]
        for g in range(n):
            ok = True
            for j in range(n - g):
                if rows[j, j + g] == 0 or np.any(rows[j, j + g + 1 :] != 0):
                    ok = False
                    break
            if ok:
                return g
        raise ValueError("matrix has no approximate-lower-triangular structure")

    def solve(self, b) -> np.ndarray:
        """Exact integer x with H x = b; raises if the solution is not integral."""
        b = np.asarray(b, dtype=np.int64)
        if b.shape != (self.n,):
            raise ValueError("right-hand side has wrong length")
        up = np.maximum(self.row_shift, 0)
        down = np.maximum(-self.row_shift, 0)
        rhs = (b << up) >> down
        if np.any((rhs << down) != b << up):
            raise ValueError("right-hand side is not reachable with integer x")
        return self.solve_scaled(rhs)

    def solve_scaled(self, rhs) -> np.ndarray:
        """Solve with the row-rescaled integer matrix directly (rhs in row units)."""
        rhs = np.asarray(rhs, dtype=np.int64)
        n, g = self.n, self.gap
        x = np.zeros(n, dtype=np.int64)
        if g:
            acc_num = [sum(int(self.top_op[i][j]) * int(rhs[j]) for j in range(n)) for i in range(g)]
            den = 1 << self.top_den
            for i in range(g):
                q, r = divmod(acc_num[i], den)
                if r:
                    raise ValueError("system has no integer solution (gap block)")
                x[i] = q
        for w in range(g, n):
            j = w - g
            acc = int(rhs[j]) - int(self._row_val[j] @ x[self._row_idx[j]])
            q, r = divmod(acc, int(self._diag[j]))
            if r:
                raise ValueError(f"system has no integer solution at coordinate {w}")
            if abs(q) > _SOLVE_GUARD:
                raise OverflowError("solution exceeds the 64-bit safety bound")
            x[w] = q
        return x


def solve_alt(H: DyadicMatrix, b, partition: AltPartition | None = None) -> np.ndarray:
    """Solve H x = b exactly for integer x using the ALT structure of H."""
    part = partition if partition is not None else AltPartition(H)
    return part.solve(b)


def back_substitute(L: DyadicMatrix, b) -> np.ndarray:
    """Solve lower-triangular L x = b exactly for integer x."""
    if not L.is_lower_triangular():
        raise ValueError("matrix is not lower triangular")
    if np.any(np.diagonal(L.num) == 0):
        raise ValueError("zero entry on the diagonal")
    return AltPartition(L).solve(b)


# -- small exact Fraction kernels (gap blocks only, g is tiny) ---------------


def _frac_matmul(A, B):
    rows, inner, cols = len(A), len(B), len(B[0])
    return [
        [sum(A[i][k] * B[k][j] for k in range(inner)) for j in range(cols)] for i in range(rows)
    ]


def _frac_sub(A, B):
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def _frac_neg(A):
    return [[-v for v in row] for row in A]


def _invert_lower_triangular(A):
    n = len(A)
    inv = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for j in range(n):
        for i in range(n):
            s = inv[i][j] - sum(A[i][k] * inv[k][j] for k in range(i))
            if i < j and s == 0:
                inv[i][j] = Fraction(0)
                continue
            if A[i][i] == 0:
                raise ValueError("zero diagonal in triangular block")
            inv[i][j] = s / A[i][i]
    return inv


def _frac_inverse(A):
    n = len(A)
    aug = [[A[i][j] for j in range(n)] + [Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ValueError("gap block is singular; not a valid check matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _frac_rows_to_dyadic(rows):
    den = 1
    for row in rows:
        for v in row:
            d = v.denominator
            if d & (d - 1):
                raise ValueError("gap operator is not dyadic; malformed check matrix")
            den = max(den, d)
    exp = den.bit_length() - 1
    return [[int(v * den) for v in row] for row in rows], exp
