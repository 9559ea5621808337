"""Regenerating-code parameterization, encoding and reconstructability checks.

A code instance distributes M source files over N nodes, each holding
``per_node_files`` random linear combinations over a finite field. Any K
nodes reconstruct the source; a failed node regenerates from any D helpers
at ``per_helper_files`` each. Encoders are seeded random matrices verified
(and redrawn as needed) to satisfy the K-subset full-rank condition, so the
module works with any field of order >= 256 without a bespoke construction.
"""

from __future__ import annotations

import enum
import itertools
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InternalError, SingularSystemError
from .gf import GaloisField, galois_field

STORE_MAGIC = b"GRCS"
STORE_VERSION = 1


class OperatingPoint(enum.Enum):
    MSR = "msr"
    MBR = "mbr"


@dataclass(frozen=True)
class RegenParams:
    n_files: int
    n_nodes: int
    reconstruct_k: int
    repair_d: int
    per_node_files: int
    per_helper_files: int
    file_bits: float = 1.6e8

    def __post_init__(self):
        counts = (
            self.n_files,
            self.n_nodes,
            self.reconstruct_k,
            self.repair_d,
            self.per_node_files,
            self.per_helper_files,
        )
        if any(int(c) != c or c < 1 for c in counts):
            raise ValueError("all code counts must be integers >= 1")
        if self.file_bits <= 0:
            raise ValueError("file size must be positive")

    @property
    def repair_bandwidth_files(self) -> int:
        return self.repair_d * self.per_helper_files


@dataclass(frozen=True)
class ParamReport:
    ok: bool
    violations: tuple[str, ...]
    capacity_sum: int


def validate_params(p: RegenParams) -> ParamReport:
    """Check the regenerating-code feasibility inequalities, report-style."""
    violations = []
    if not p.reconstruct_k <= p.repair_d <= p.n_nodes - 1:
        violations.append(
            f"need K <= D <= N-1, got K={p.reconstruct_k}, D={p.repair_d}, N={p.n_nodes}"
        )
    cap = sum(
        min(p.per_node_files, (p.repair_d - i) * p.per_helper_files)
        for i in range(p.reconstruct_k)
    )
    if p.n_files > cap:
        violations.append(f"M={p.n_files} exceeds the cut-set capacity {cap}")
    return ParamReport(not violations, tuple(violations), cap)


@dataclass(frozen=True)
class CodePoint:
    per_node_files: Fraction
    per_helper_files: Fraction
    repair_bandwidth: Fraction


def msr_point(n_files: int, k: int, d: int) -> CodePoint:
    """Minimum-storage operating point (exact rationals)."""
    if k > d:
        raise ValueError("need K <= D")
    alpha = Fraction(n_files, k)
    gamma = Fraction(n_files * d, (d - k + 1) * k)
    return CodePoint(alpha, gamma / d, gamma)


def mbr_point(n_files: int, k: int, d: int) -> CodePoint:
    """Minimum-repair-bandwidth operating point (exact rationals)."""
    if k > d:
        raise ValueError("need K <= D")
    gamma = Fraction(2 * n_files * d, 2 * k * d - k * k + k)
    return CodePoint(gamma, gamma / d, gamma)


@dataclass(frozen=True)
class RepairPlan:
    helpers: int
    per_helper_files: int
    total_files: int


def repair_requirement(point: OperatingPoint, p: RegenParams) -> RepairPlan:
    """Helper count and traffic to regenerate one node at the given point."""
    alpha, beta = p.per_node_files, p.per_helper_files
    if alpha % beta != 0:
        raise ValueError(f"alpha={alpha} not a multiple of beta={beta}; not at {point.value}")
    if point is OperatingPoint.MSR:
        d = alpha // beta + p.reconstruct_k - 1
    else:
        d = alpha // beta
    return RepairPlan(d, beta, d * beta)


@dataclass(frozen=True)
class CodedStore:
    """Encoded state: per-node encoding matrices and stored payloads."""

    field: GaloisField
    params: RegenParams
    source: np.ndarray
    encoders: tuple[np.ndarray, ...]
    payloads: tuple[np.ndarray, ...]
    seed: int
    attempts: int


def _k_subsets_full_rank(field, encoders, m, k) -> bool:
    for subset in itertools.combinations(range(len(encoders)), k):
        stacked = np.hstack([encoders[i] for i in subset])
        if field.rank(stacked) != m:
            return False
    return True


def encode(
    params: RegenParams,
    field_order: int = 256,
    seed: int = 0,
    source=None,
    min_field_order: int = 256,
    max_attempts: int = 64,
) -> CodedStore:
    """Draw seeded random encoders, verify K-subset reconstructability, store payloads."""
    m, n, k, alpha = params.n_files, params.n_nodes, params.reconstruct_k, params.per_node_files
    if alpha * n < m:
        raise ValueError("total stored files cannot cover the source")
    if field_order < min_field_order:
        raise ValueError(f"field order {field_order} below minimum {min_field_order}")
    field = galois_field(field_order)
    rng = np.random.default_rng(seed)
    if source is None:
        source = rng.integers(0, field_order, size=m, dtype=np.int64)
    else:
        source = np.asarray(source, dtype=np.int64)
        if source.shape != (m,) or np.any(source < 0) or np.any(source >= field_order):
            raise ValueError("source must be M field elements")
    for attempt in range(1, max_attempts + 1):
        encoders = tuple(
            rng.integers(0, field_order, size=(m, alpha), dtype=np.int64) for _ in range(n)
        )
        if _k_subsets_full_rank(field, encoders, m, k):
            payloads = tuple(
                field.matmul(h.T, source.reshape(-1, 1)).reshape(-1) for h in encoders
            )
            return CodedStore(field, params, source, encoders, payloads, seed, attempt)
    raise InternalError(f"no full-rank encoder set found in {max_attempts} attempts")


def _selected_columns(store: CodedStore, mu, selectors):
    """Per-node effective encoding blocks H^(n) A^(n) for the given download counts."""
    mu = np.asarray(mu, dtype=int)
    p = store.params
    if mu.shape != (p.n_nodes,):
        raise ValueError(f"expected {p.n_nodes} download counts")
    if np.any(mu < 0) or np.any(mu > p.per_node_files):
        raise ValueError("download counts must lie in [0, per_node_files]")
    blocks = []
    for i, h in enumerate(store.encoders):
        if selectors is not None and selectors[i] is not None:
            a = np.asarray(selectors[i], dtype=np.int64)
            if a.shape != (p.per_node_files, mu[i]):
                raise ValueError(f"selector {i} must be {p.per_node_files} x {mu[i]}")
            blocks.append(store.field.matmul(h, a))
        else:
            blocks.append(h[:, : mu[i]])
    return mu, blocks


def check_mu_reconstructable(store: CodedStore, mu, selectors=None) -> bool:
    """True iff the per-node download counts allow exact source recovery."""
    mu, blocks = _selected_columns(store, mu, selectors)
    if int(mu.sum()) < store.params.n_files:
        return False
    stacked = np.hstack([b for b in blocks if b.shape[1]])
    return store.field.rank(stacked) == store.params.n_files


def downloads_for(store: CodedStore, mu, selectors=None) -> list[np.ndarray]:
    """Symbols each node transmits for the given download counts."""
    mu, _ = _selected_columns(store, mu, selectors)
    out = []
    for i, payload in enumerate(store.payloads):
        if selectors is not None and selectors[i] is not None:
            a = np.asarray(selectors[i], dtype=np.int64)
            out.append(store.field.matmul(a.T, payload.reshape(-1, 1)).reshape(-1))
        else:
            out.append(payload[: mu[i]].copy())
    return out


def reconstruct(store: CodedStore, downloads, selectors=None) -> np.ndarray:
    """Recover the source symbols from per-node downloaded symbol vectors.

    Raises :class:`SingularSystemError` when the downloads do not determine
    the source uniquely.
    """
    mu = np.array([len(d) for d in downloads], dtype=int)
    mu, blocks = _selected_columns(store, mu, selectors)
    rows = [b.T for b in blocks if b.shape[1]]
    if not rows:
        raise SingularSystemError("no symbols downloaded")
    a = np.vstack(rows)
    b = np.concatenate([np.asarray(d, dtype=np.int64) for d in downloads if len(d)])
    solution = store.field.solve(a, b)
    if not np.array_equal(
        store.field.matmul(a, solution.reshape(-1, 1)).reshape(-1), b
    ):
        raise InternalError("reconstruction residual nonzero")
    return solution


def dump_store(store: CodedStore, path) -> None:
    """Write a store to a little-endian binary file (test-fixture format)."""
    p = store.params
    header = struct.pack(
        "<4sHIIIIq",
        STORE_MAGIC,
        STORE_VERSION,
        store.field.order,
        p.n_files,
        p.n_nodes,
        p.per_node_files,
        store.seed,
    )
    width = "B" if store.field.order <= 256 else "I"
    body = bytearray()
    body += struct.pack(f"<{p.n_files}{width}", *store.source.tolist())
    for h in store.encoders:
        body += struct.pack(f"<{h.size}{width}", *h.reshape(-1).tolist())
    for payload in store.payloads:
        body += struct.pack(f"<{payload.size}{width}", *payload.tolist())
    with open(path, "wb") as fh:
        fh.write(header + bytes(body))


def load_store(path, params: RegenParams) -> CodedStore:
    """Read a store written by :func:`dump_store`; code parameters supplied by caller."""
    with open(path, "rb") as fh:
        raw = fh.read()
    head = struct.calcsize("<4sHIIIIq")
    magic, version, order, m, n, alpha, seed = struct.unpack("<4sHIIIIq", raw[:head])
    if magic != STORE_MAGIC:
        raise ValueError("not a coded-store file")
    if version != STORE_VERSION:
        raise ValueError(f"unsupported store version {version}")
    if (m, n, alpha) != (params.n_files, params.n_nodes, params.per_node_files):
        raise ValueError("file header disagrees with supplied code parameters")
    width = "B" if order <= 256 else "I"
    offset = head

    def take(count):
        nonlocal offset
        vals = struct.unpack_from(f"<{count}{width}", raw, offset)
        offset += struct.calcsize(f"<{count}{width}")
        return np.array(vals, dtype=np.int64)

    source = take(m)
    encoders = tuple(take(m * alpha).reshape(m, alpha) for _ in range(n))
    payloads = tuple(take(alpha) for _ in range(n))
    return CodedStore(galois_field(order), params, source, encoders, payloads, seed, 0)
