"""Finite-field arithmetic on numpy integer arrays.

Two field families are supported: GF(2^8) under the AES reduction polynomial
x^8 + x^4 + x^3 + x + 1 (0x11B, log tables built on the primitive element
0x03), and prime fields GF(p) under modular arithmetic. Elements are stored
as int64 arrays; all operations are elementwise unless noted.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularSystemError

AES_POLY = 0x11B
AES_GENERATOR = 0x03


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


class GaloisField:
    """Order-q field; use :func:`galois_field` to construct."""

    def __init__(self, order: int):
        self.order = order

    def add(self, a, b):
        raise NotImplementedError

    def sub(self, a, b):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def matmul(self, a, b):
        """Matrix product over the field."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
        for k in range(a.shape[1]):
            out = self.add(out, self.mul(a[:, k : k + 1], b[k : k + 1, :]))
        return out

    def _eliminate(self, m: np.ndarray) -> tuple[np.ndarray, list[int]]:
        """Row-reduce in place (copy); returns reduced matrix and pivot columns."""
        m = np.array(m, dtype=np.int64)
        rows, cols = m.shape
        pivots: list[int] = []
        r = 0
        for c in range(cols):
            if r == rows:
                break
            hits = np.flatnonzero(m[r:, c]) + r
            if hits.size == 0:
                continue
            p = int(hits[0])
            if p != r:
                m[[r, p]] = m[[p, r]]
            m[r] = self.mul(m[r], self.inv(m[r, c]))
            others = np.flatnonzero(m[:, c])
            others = others[others != r]
            if others.size:
                m[others] = self.sub(m[others], self.mul(m[others, c : c + 1], m[r : r + 1, :]))
            pivots.append(c)
            r += 1
        return m, pivots

    def rank(self, m) -> int:
        m = np.asarray(m, dtype=np.int64)
        if m.size == 0:
            return 0
        _, pivots = self._eliminate(m)
        return len(pivots)

    def solve(self, a, b):
        """Solve a x = b exactly for a (possibly tall) consistent full-rank system."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64).reshape(-1, 1)
        if a.shape[0] != b.shape[0]:
            raise ValueError("row counts disagree")
        n_unknowns = a.shape[1]
        aug, pivots = self._eliminate(np.hstack([a, b]))
        if any(p == n_unknowns for p in pivots):
            raise SingularSystemError("inconsistent linear system")
        if len(pivots) < n_unknowns:
            raise SingularSystemError(
                f"rank {len(pivots)} < {n_unknowns} unknowns; solution not unique"
            )
        x = np.zeros(n_unknowns, dtype=np.int64)
        for r, c in enumerate(pivots):
            x[c] = aug[r, n_unknowns]
        return x


class PrimeField(GaloisField):
    def __init__(self, order: int):
        if not _is_prime(order):
            raise ValueError(f"{order} is not prime")
        if order > 2**20:
            raise ValueError("prime field order too large for int64 arithmetic")
        super().__init__(order)

    def add(self, a, b):
        return (np.asarray(a, dtype=np.int64) + np.asarray(b, dtype=np.int64)) % self.order

    def sub(self, a, b):
        return (np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)) % self.order

    def mul(self, a, b):
        return (np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)) % self.order

    def inv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a % self.order == 0):
            raise ZeroDivisionError("zero has no inverse")
        flat = a.reshape(-1)
        out = np.array([pow(int(v), self.order - 2, self.order) for v in flat], dtype=np.int64)
        return out.reshape(a.shape) if a.shape else np.int64(out[0])


class GF256(GaloisField):
    def __init__(self):
        super().__init__(256)
        exp = np.zeros(510, dtype=np.int64)
        log = np.zeros(256, dtype=np.int64)
        x = 1
        for i in range(255):
            exp[i] = x
            log[x] = i
            x = self._scalar_mul(x, AES_GENERATOR)
        exp[255:510] = exp[0:255]
        self._exp = exp
        self._log = log

    @staticmethod
    def _scalar_mul(a: int, b: int) -> int:
        acc = 0
        while b:
            if b & 1:
                acc ^= a
            a <<= 1
            if a & 0x100:
                a ^= AES_POLY
            b >>= 1
        return acc

    def add(self, a, b):
        return np.asarray(a, dtype=np.int64) ^ np.asarray(b, dtype=np.int64)

    def sub(self, a, b):
        return self.add(a, b)

    def mul(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
        nz = (a != 0) & (b != 0)
        if np.any(nz):
            av, bv = np.broadcast_arrays(a, b)
            out[nz] = self._exp[self._log[av[nz]] + self._log[bv[nz]]]
        return out

    def inv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("zero has no inverse")
        return self._exp[255 - self._log[a]]


_GF256_SINGLETON: GF256 | None = None


def galois_field(order: int) -> GaloisField:
    """Field of the given order: 256 (AES polynomial) or a prime."""
    global _GF256_SINGLETON
    if order == 256:
        if _GF256_SINGLETON is None:
            _GF256_SINGLETON = GF256()
        return _GF256_SINGLETON
    return PrimeField(order)
