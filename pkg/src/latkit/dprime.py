"""Multilevel coding lattices from nested binary codes.

A lattice here is described by a check matrix H = D * Ht where Ht is a
unimodular integer matrix whose lower rows are the parity checks of nested
binary codes and D scales each level's rows by a power of two.  The module
provides both encoding methods (integer-message and split bit-message), the
membership oracles, multistage successive-cancellation decoding, and the
systematic re-encoder.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .linalg import (
    AltPartition,
    DyadicMatrix,
    check_unimodular,
    gf2_nullspace_basis,
)

__all__ = [
    "NestedCodeFamily",
    "DPrimeLattice",
    "MessageSplit",
    "membership_congruence",
    "membership_checkmatrix",
    "encode_a",
    "encode_b",
    "map_to_b",
    "split_b",
    "triangle_mod",
    "decode_multistage",
    "reencode_systematic",
    "exhaustive_ml_decoder",
    "hard_decision_decoder",
]

log = logging.getLogger(__name__)

# LLR magnitude used per bit when the noise variance is zero (noiseless runs).
_NOISELESS_LLR = 1e3


class NestedCodeFamily:
    """Nested binary codes C_0 c C_1 c ... c C_a = F_2^n.

    ``h_tilde`` is an n-by-n unimodular binary matrix; rows ``k_i`` .. ``n-1``
    (0-based) are the parity checks of C_i.  ``boundaries`` lists
    k_0 < k_1 < ... < k_{a-1}; k_a = n is implicit.  ``boundaries = ()`` is
    the degenerate zero-level family (the lattice is Z^n).
    """

    def __init__(self, h_tilde, boundaries, validate: bool = True):
        self.h_tilde = (np.asarray(h_tilde, dtype=np.int64) & 1).astype(np.uint8)
        n = self.h_tilde.shape[0]
        if self.h_tilde.shape != (n, n):
            raise ValueError("h_tilde must be square")
        self.n = n
        self.boundaries = tuple(int(k) for k in boundaries)
        if any(b <= 0 or b >= n for b in self.boundaries) or list(self.boundaries) != sorted(
            set(self.boundaries)
        ):
            raise ValueError("boundaries must be strictly increasing in (0, n)")
        self.levels = len(self.boundaries)
        # level_exp[j] = i  for  k_{i-1} <= j < k_i  (0-based columns)
        self.level_exp = np.zeros(n, dtype=np.int64)
        for k in self.boundaries:
            self.level_exp[k:] += 1
        if validate and not check_unimodular(self.h_tilde.astype(np.int64)):
            raise ValueError("h_tilde is not unimodular")

    def code_dim(self, i: int) -> int:
        ks = self.boundaries + (self.n,)
        return ks[i]

    def parity_matrix(self, i: int) -> np.ndarray:
        """Parity-check rows of C_i (binary)."""
        return self.h_tilde[self.code_dim(i) :, :]

    def codewords(self, i: int) -> np.ndarray:
        """All codewords of C_i as a (2^k_i, n) uint8 array (small codes only)."""
        k = self.code_dim(i)
        if k > 20:
            raise ValueError("code too large to enumerate")
        basis = gf2_nullspace_basis(self.parity_matrix(i))
        if basis.shape[0] != k:
            raise ValueError("parity rows are linearly dependent")
        words = np.zeros((1 << k, self.n), dtype=np.uint8)
        for idx in range(1 << k):
            sel = [(idx >> t) & 1 for t in range(k)]
            words[idx] = np.bitwise_xor.reduce(
                basis[np.array(sel, dtype=bool)], axis=0
            ) if any(sel) else 0
        return words


@dataclass
class MessageSplit:
    """Per-level information bits plus the free integer vector.

    ``u[i]`` has length k_i with entries in {0, 1}; ``z`` has length n.
    """

    u: list
    z: np.ndarray


class DPrimeLattice:
    """A multilevel coding lattice with pluggable binary decoders.

    ``h_enc`` is the integer unimodular matrix actually used for solving
    (it reduces mod 2 to ``family.h_tilde``); the lattice check matrix is
    D * h_enc.  ``decoders[i]`` maps a per-bit LLR vector to a codeword of
    C_i; exhaustive maximum-likelihood decoders are built on demand for
    small codes.
    """

    def __init__(self, family: NestedCodeFamily, h_enc=None, decoders=None):
        self.family = family
        if h_enc is None:
            self.h_enc = family.h_tilde.astype(np.int64)
        else:
            self.h_enc = np.asarray(h_enc, dtype=np.int64)
            if self.h_enc.shape != (family.n, family.n):
                raise ValueError("h_enc has wrong shape")
            if not np.array_equal((self.h_enc & 1).astype(np.uint8), family.h_tilde):
                raise ValueError("h_enc does not reduce to the family matrix mod 2")
        self.n = family.n
        self.level_exp = family.level_exp
        # H = D * h_enc  with D = diag(2^{-level_exp})
        self.check = DyadicMatrix(self.h_enc, 0).scale_rows_pow2(-self.level_exp)
        self._alt: AltPartition | None = None
        self._decoders = list(decoders) if decoders is not None else None

    @classmethod
    def from_check_matrix(cls, H: DyadicMatrix, boundaries, decoders=None) -> "DPrimeLattice":
        """Build from a dyadic check matrix H = D * h_enc directly.

        ``h_enc`` need not be binary; the binary family is its mod-2
        reduction, which carries the same nested codes.
        """
        n = H.shape[0]
        level_exp = np.zeros(n, dtype=np.int64)
        for k in boundaries:
            level_exp[k:] += 1
        scaled = H.scale_rows_pow2(level_exp)
        if scaled.exp != 0:
            raise ValueError("check matrix rows are not 2^{-level} scaled integers")
        h_enc = scaled.num
        fam = NestedCodeFamily((h_enc & 1).astype(np.uint8), boundaries)
        return cls(fam, h_enc=h_enc, decoders=decoders)

    # -- solver plumbing -----------------------------------------------------

    @property
    def alt(self) -> AltPartition:
        if self._alt is None:
            self._alt = AltPartition(self.check)
        return self._alt

    @property
    def gap(self) -> int:
        return self.alt.gap

    def log2_det_generator(self) -> int:
        """log2 |det G| for the generator G = H^{-1}."""
        return int(self.level_exp.sum())

    def solve_h_tilde(self, rhs) -> np.ndarray:
        """Exact integer solution of h_enc @ x = rhs."""
        return self.alt.solve_scaled(np.asarray(rhs, dtype=np.int64))

    # -- decoders --------------------------------------------------------------

    def decoders(self) -> list:
        if self._decoders is None:
            self._decoders = [
                exhaustive_ml_decoder(self.family, i) for i in range(self.family.levels)
            ]
        if len(self._decoders) != self.family.levels:
            raise ValueError("need one binary decoder per level")
        return self._decoders

    def with_decoders(self, decoders) -> "DPrimeLattice":
        """Copy sharing all precomputed state but with different binary decoders."""
        lat = DPrimeLattice.__new__(DPrimeLattice)
        lat.family = self.family
        lat.h_enc = self.h_enc
        lat.n = self.n
        lat.level_exp = self.level_exp
        lat.check = self.check
        lat._alt = self._alt
        lat._decoders = list(decoders)
        return lat


def membership_congruence(family: NestedCodeFamily, x) -> bool:
    """Definition by congruences: parity rows of C_i annihilate x mod 2^{i+1}."""
    x = np.asarray(x, dtype=np.int64)
    for i in range(family.levels):
        rows = family.parity_matrix(i).astype(np.int64)
        if rows.size and np.any((rows @ x) % (1 << (i + 1)) != 0):
            return False
    return True


def membership_checkmatrix(lattice: DPrimeLattice, x) -> bool:
    """Definition by check matrix: H x is a vector of integers (exact test)."""
    x = np.asarray(x, dtype=np.int64)
    prod = lattice.h_enc @ x
    mod = (np.int64(1) << lattice.level_exp) - 1
    return bool(np.all((prod & mod) == 0))


def encode_a(lattice: DPrimeLattice, b) -> np.ndarray:
    """Find the lattice point x with H x = b (integer message vector b)."""
    b = np.asarray(b, dtype=np.int64)
    return lattice.alt.solve(b)


def map_to_b(lattice: DPrimeLattice, msg: MessageSplit) -> np.ndarray:
    """Pack per-level bits and free integers into the integer message b."""
    fam = lattice.family
    a = fam.levels
    lev = lattice.level_exp
    acc = np.zeros(fam.n, dtype=np.int64)
    for i in range(a):
        u = np.asarray(msg.u[i], dtype=np.int64)
        if u.shape != (fam.code_dim(i),) or np.any((u != 0) & (u != 1)):
            raise ValueError(f"u[{i}] must be k_{i} bits")
        acc[: u.size] += u << i
    acc += np.asarray(msg.z, dtype=np.int64) << a
    # b = D acc; rows at level l carry a factor 2^{-l}, which divides exactly
    return acc >> lev


def split_b(lattice: DPrimeLattice, b) -> MessageSplit:
    """Inverse of map_to_b."""
    fam = lattice.family
    a = fam.levels
    lev = lattice.level_exp
    b = np.asarray(b, dtype=np.int64)
    u = []
    for i in range(a):
        k = fam.code_dim(i)
        u.append(((b[:k] >> (i - lev[:k])) & 1).astype(np.uint8))
    z = b >> (a - lev)
    return MessageSplit(u=u, z=z)


def encode_b(lattice: DPrimeLattice, msg: MessageSplit) -> np.ndarray:
    """Encode per-level bits: x = sum_i 2^i x_i with h_enc x_i = padded u_i."""
    fam = lattice.family
    a = fam.levels
    x = np.zeros(fam.n, dtype=np.int64)
    for i in range(a):
        u = np.asarray(msg.u[i], dtype=np.int64)
        if u.shape != (fam.code_dim(i),):
            raise ValueError(f"u[{i}] has wrong length")
        rhs = np.zeros(fam.n, dtype=np.int64)
        rhs[: u.size] = u
        x += lattice.solve_h_tilde(rhs) << i
    x += lattice.solve_h_tilde(np.asarray(msg.z, dtype=np.int64)) << a
    return x


def triangle_mod(y) -> np.ndarray:
    """Fold reals into [0, 1]: distance of y to the nearest even integer."""
    y = np.asarray(y, dtype=np.float64)
    return np.abs(np.mod(y + 1.0, 2.0) - 1.0)


def level_llr(y_folded, sigma2: float) -> np.ndarray:
    """Per-bit LLR estimate (1 - 2 y') / (2 sigma^2) with a noiseless cap."""
    s = 1.0 - 2.0 * np.asarray(y_folded, dtype=np.float64)
    if sigma2 <= 0.0:
        return s * _NOISELESS_LLR
    return s / (2.0 * sigma2)


def decode_multistage(lattice: DPrimeLattice, y, sigma2: float) -> np.ndarray:
    """Successive-cancellation decoding: one binary decode per level, then rounding.

    ``sigma2`` is the noise variance seen by the first level; each level
    halves the residual so the variance drops by 4 per stage.  A level whose
    decoder output fails its parity checks is logged and decoding continues
    with that estimate.
    """
    fam = lattice.family
    decs = lattice.decoders()
    y_i = np.asarray(y, dtype=np.float64)
    a = fam.levels
    x_hat = np.zeros(lattice.n, dtype=np.int64)
    for i in range(a):
        folded = triangle_mod(y_i)
        llr = level_llr(folded, sigma2 / float(4**i))
        cw = np.asarray(decs[i](llr), dtype=np.int64) & 1
        u_hat = (lattice.h_enc @ cw) & 1
        if np.any(u_hat[fam.code_dim(i) :]):
            log.debug("level-%d decoder output is not a codeword; continuing", i)
        x_i = lattice.solve_h_tilde(u_hat)
        x_hat += x_i << i
        y_i = (y_i - x_i) / 2.0
    x_hat += np.round(y_i).astype(np.int64) << a
    return x_hat


def reencode_systematic(lattice: DPrimeLattice, level: int, u) -> np.ndarray:
    """Systematic re-encoding: x = [u, tail] with parity rows of C_i giving 0 over Z.

    Raises ValueError when the tail system is singular or has no integer
    solution (the parity block is not triangularizable over the integers).
    """
    fam = lattice.family
    k = fam.code_dim(level)
    u = np.asarray(u, dtype=np.int64)
    if u.shape != (k,):
        raise ValueError("u has wrong length")
    rows = lattice.h_enc[k:, :]
    r = rows.shape[0]
    if r == 0:
        return u.copy()
    T = [[Fraction(int(rows[i, k + j])) for j in range(r)] for i in range(r)]
    rhs = [Fraction(-int(rows[i, :k] @ u)) for i in range(r)]
    # exact dense solve; these blocks are small or triangular in practice
    aug = [T[i] + [rhs[i]] for i in range(r)]
    for col in range(r):
        piv = next((i for i in range(col, r) if aug[i][col] != 0), None)
        if piv is None:
            raise ValueError("parity tail system is underdetermined")
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for i in range(r):
            if i != col and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [v - f * w for v, w in zip(aug[i], aug[col])]
    tail = [aug[i][r] for i in range(r)]
    if any(v.denominator != 1 for v in tail):
        raise ValueError("parity tail has no integer solution")
    return np.concatenate([u, np.array([int(v) for v in tail], dtype=np.int64)])


# ---------------------------------------------------------------------------
# Binary decoders
# ---------------------------------------------------------------------------


def exhaustive_ml_decoder(family: NestedCodeFamily, level: int):
    """Maximum-likelihood decoder by codeword enumeration (toy codes)."""
    words = family.codewords(level)
    signs = 1.0 - 2.0 * words.astype(np.float64)

    def decode(llr: np.ndarray) -> np.ndarray:
        return words[int(np.argmax(signs @ llr))]

    return decode


def hard_decision_decoder():
    """Decoder for the full space F_2^n: bitwise hard decision on the LLRs."""

    def decode(llr: np.ndarray) -> np.ndarray:
        return (np.asarray(llr) < 0).astype(np.uint8)

    return decode
