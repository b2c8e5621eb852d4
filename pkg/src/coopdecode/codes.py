"""Binary linear codes: parity-check matrices, constructors, encoders and AList I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import AlistParseError, CapacityError, DimensionError, ParameterError

DEFAULT_MAX_ENTRIES = 50_000_000


@dataclass(frozen=True)
class ParityCheckMatrix:
    """Sparse binary matrix H stored as row and column adjacency lists.

    ``rows`` is the number of checks; ``n`` the number of variables.
    Use :meth:`from_rows` unless both supports are already available.
    """

    n: int
    rows: int
    row_support: tuple[tuple[int, ...], ...]
    col_support: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.row_support) != self.rows or len(self.col_support) != self.n:
            raise ParameterError("support list lengths do not match matrix shape")
        for j, row in enumerate(self.row_support):
            if len(row) < 2:
                raise ParameterError(f"check {j} has fewer than 2 variables")
            if any(a >= b for a, b in zip(row, row[1:])):
                raise ParameterError(f"check {j} is not strictly increasing (duplicate or unsorted index)")
            if row[0] < 0 or row[-1] >= self.n:
                raise ParameterError(f"check {j} has a variable index out of range")
        edges = sum(len(r) for r in self.row_support)
        if edges != sum(len(c) for c in self.col_support):
            raise ParameterError("row and column supports have different edge counts")
        rebuilt = _transpose(self.row_support, self.n)
        if rebuilt != self.col_support:
            raise ParameterError("row_support and col_support are not transposes")

    @classmethod
    def from_rows(cls, n: int, rows: Iterable[Iterable[int]]) -> "ParityCheckMatrix":
        row_support = tuple(tuple(sorted(int(v) for v in r)) for r in rows)
        for j, r in enumerate(row_support):
            if len(set(r)) != len(r):
                raise ParameterError(f"check {j} lists a variable twice")
            if r and (r[0] < 0 or r[-1] >= n):
                raise ParameterError(f"check {j} has a variable index out of range")
        return cls(n, len(row_support), row_support, _transpose(row_support, n))

    @classmethod
    def from_dense(cls, dense) -> "ParityCheckMatrix":
        dense = np.asarray(dense)
        return cls.from_rows(dense.shape[1], (np.flatnonzero(r) for r in dense))

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(check index, variable index) per edge, ordered by check then variable."""
        checks = np.repeat(np.arange(self.rows), [len(r) for r in self.row_support])
        variables = np.fromiter((v for r in self.row_support for v in r), dtype=np.int64, count=len(checks))
        return checks, variables

    @property
    def num_edges(self) -> int:
        return len(self.edges[0])

    def to_sparse(self) -> sp.csr_matrix:
        checks, variables = self.edges
        data = np.ones(len(checks), dtype=np.int64)
        return sp.csr_matrix((data, (checks, variables)), shape=(self.rows, self.n))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.rows, self.n), dtype=np.uint8)
        checks, variables = self.edges
        dense[checks, variables] = 1
        return dense

    def four_cycles(self) -> int:
        """Number of length-4 cycles in the Tanner graph."""
        overlap = (self.to_sparse() @ self.to_sparse().T).tocoo()
        mask = overlap.row < overlap.col
        counts = overlap.data[mask]
        return int((counts * (counts - 1) // 2).sum())


def _transpose(row_support, n) -> tuple[tuple[int, ...], ...]:
    cols: list[list[int]] = [[] for _ in range(n)]
    for j, row in enumerate(row_support):
        for v in row:
            cols[v].append(j)
    return tuple(tuple(c) for c in cols)


def syndrome(h: ParityCheckMatrix, x) -> np.ndarray:
    """Parity of ``x`` over every check; accepts a single word or a (B, n) batch."""
    x = np.asarray(x)
    if x.shape[-1] != h.n:
        raise DimensionError(f"word length {x.shape[-1]} does not match n={h.n}")
    checks, variables = h.edges
    bits = x[..., variables].astype(np.int64) & 1
    starts = np.concatenate(([0], np.cumsum([len(r) for r in h.row_support])[:-1]))
    return (np.add.reduceat(bits, starts, axis=-1) & 1).astype(np.uint8)


def rank_gf2(h) -> int:
    """Rank over GF(2) of a ParityCheckMatrix or a dense 0/1 array."""
    if isinstance(h, ParityCheckMatrix):
        supports = h.row_support
    else:
        supports = [np.flatnonzero(np.asarray(r) & 1).tolist() for r in np.atleast_2d(h)]
    # rows packed into python ints; reduce against a basis keyed on leading bit
    basis: dict[int, int] = {}
    for row in supports:
        r = 0
        for v in row:
            r |= 1 << v
        while r:
            top = r.bit_length() - 1
            pivot = basis.get(top)
            if pivot is None:
                basis[top] = r
                break
            r ^= pivot
    return len(basis)


def gf2_rref(dense: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2) with column pivoting, left to right."""
    r = np.array(dense, dtype=bool, copy=True)
    m, n = r.shape
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row == m:
            break
        hits = np.flatnonzero(r[row:, col])
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            r[[row, p]] = r[[p, row]]
        others = np.flatnonzero(r[:, col])
        others = others[others != row]
        r[others] ^= r[row]
        pivots.append(col)
        row += 1
    return r[:row].astype(np.uint8), pivots


class GeneratorEncoder:
    """Systematic encoder: information bits land on the non-pivot columns of rref(H)."""

    def __init__(self, h: ParityCheckMatrix):
        reduced, pivots = gf2_rref(h.to_dense())
        self.n = h.n
        self.pivots = np.array(pivots, dtype=np.int64)
        free = np.setdiff1d(np.arange(h.n), self.pivots)
        self.info_positions = free
        self._parity = reduced[:, free].astype(np.int64)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.int64)
        x = np.zeros(u.shape[:-1] + (self.n,), dtype=np.uint8)
        x[..., self.info_positions] = u
        if self.pivots.size:
            x[..., self.pivots] = (u @ self._parity.T) & 1
        return x


class ProductEncoder:
    """Iterated parity completion for the multidimensional single-parity-check product code."""

    def __init__(self, side: int, dims: int):
        self.side = side
        self.dims = dims
        grid = np.arange(side**dims).reshape((side,) * dims)
        self.info_positions = grid[(slice(0, side - 1),) * dims].ravel()

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.uint8)
        batch = u.shape[:-1]
        s, d = self.side, self.dims
        cube = np.zeros(batch + (s,) * d, dtype=np.uint8)
        lead = (slice(None),) * len(batch)
        cube[lead + (slice(0, s - 1),) * d] = u.reshape(batch + (s - 1,) * d)
        for axis in range(d):
            ax = len(batch) + axis
            body = np.take(cube, np.arange(s - 1), axis=ax)
            parity = np.bitwise_xor.reduce(body, axis=ax)
            idx = [slice(None)] * cube.ndim
            idx[ax] = s - 1
            cube[tuple(idx)] = parity
        return cube.reshape(batch + (s**d,))


@dataclass(frozen=True)
class LinearCode:
    h: ParityCheckMatrix
    dimension: int
    encoder: object = field(repr=False, compare=False)
    info_positions: tuple[int, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.h.n

    @property
    def rate(self) -> float:
        return self.dimension / self.h.n

    def encode(self, u) -> np.ndarray:
        u = np.asarray(u)
        if u.shape[-1] != self.dimension:
            raise DimensionError(f"information word length {u.shape[-1]} != dimension {self.dimension}")
        return self.encoder(u)


def code_from_h(h: ParityCheckMatrix, **meta) -> LinearCode:
    """Wrap an arbitrary H with a systematic encoder from GF(2) elimination."""
    enc = GeneratorEncoder(h)
    return LinearCode(h, len(enc.info_positions), enc, tuple(int(i) for i in enc.info_positions), dict(meta))


def build_product_code(side: int = 8, dims: int = 2, max_entries: int = DEFAULT_MAX_ENTRIES) -> LinearCode:
    """The ``(side, side-1)^dims`` single-parity-check product code.

    Variables are the cells of a ``side^dims`` cube in C order; there is one check per
    axis line, grouped by axis.
    """
    if side < 2 or dims < 1:
        raise ParameterError("product code needs side >= 2 and dims >= 1")
    if dims * side**dims > max_entries:
        raise CapacityError(f"{dims}*{side}^{dims} edges exceeds cap {max_entries}")
    n = side**dims
    grid = np.arange(n).reshape((side,) * dims)
    rows = []
    for axis in range(dims):
        rows.extend(np.moveaxis(grid, axis, -1).reshape(-1, side).tolist())
    h = ParityCheckMatrix.from_rows(n, rows)
    enc = ProductEncoder(side, dims)
    return LinearCode(
        h,
        (side - 1) ** dims,
        enc,
        tuple(int(i) for i in enc.info_positions),
        {"family": "product", "side": side, "dims": dims},
    )


def build_hamming74() -> LinearCode:
    h = ParityCheckMatrix.from_rows(7, [[0, 1, 3, 4], [0, 2, 3, 5], [1, 2, 3, 6]])
    return code_from_h(h, family="hamming74")


def build_gallager_regular(
    n: int,
    col_weight: int,
    row_weight: int,
    seed: int = 0,
    remove_four_cycles: bool = True,
    max_swaps: int = 20_000,
) -> LinearCode:
    """Random (col_weight, row_weight)-regular code from a permuted socket matching.

    Repeated edges are re-drawn; 4-cycles are then removed best-effort by edge
    swaps that keep every degree fixed. ``meta["four_cycles"]`` reports what is left.
    """
    if col_weight < 1 or row_weight < 2 or n < row_weight:
        raise ParameterError("need col_weight >= 1, 2 <= row_weight <= n")
    if (n * col_weight) % row_weight:
        raise ParameterError(f"n*col_weight={n * col_weight} not divisible by row_weight={row_weight}")
    m = n * col_weight // row_weight
    if col_weight > m:
        raise ParameterError("col_weight exceeds the number of checks")
    rng = np.random.default_rng(seed)

    check_of_socket = np.repeat(np.arange(m), row_weight)
    var_of_socket = rng.permutation(np.repeat(np.arange(n), col_weight))
    rows = _resolve_collisions(check_of_socket, var_of_socket, m, rng)

    residual = None
    if remove_four_cycles:
        rows, residual = _remove_four_cycles(rows, n, rng, max_swaps)
    h = ParityCheckMatrix.from_rows(n, rows)
    if residual is None:
        residual = h.four_cycles()
    return code_from_h(
        h,
        family="gallager",
        col_weight=col_weight,
        row_weight=row_weight,
        seed=seed,
        four_cycles=residual,
    )


def _resolve_collisions(check_of_socket, var_of_socket, m, rng, max_rounds=100_000):
    var_of_socket = var_of_socket.copy()
    rows = [set() for _ in range(m)]
    bad = []
    for s, (c, v) in enumerate(zip(check_of_socket, var_of_socket)):
        if v in rows[c]:
            bad.append(s)
        else:
            rows[c].add(int(v))
    total = len(var_of_socket)
    for _ in range(max_rounds):
        if not bad:
            break
        s = bad.pop()
        c, v = check_of_socket[s], int(var_of_socket[s])
        t = int(rng.integers(total))
        c2, v2 = check_of_socket[t], int(var_of_socket[t])
        if t == s or c2 == c or v2 in rows[c] or v in rows[c2] or t in bad:
            bad.append(s)
            continue
        rows[c2].discard(v2)
        rows[c2].add(v)
        rows[c].add(v2)
        var_of_socket[s], var_of_socket[t] = v2, v
    if bad:
        raise ParameterError("could not resolve repeated edges; degrees too dense for n")
    return [sorted(r) for r in rows]


def _count_cycles_through(rows_sets, j, var_checks):
    """4-cycles involving check j."""
    count = 0
    seen: dict[int, int] = {}
    for v in rows_sets[j]:
        for k in var_checks[v]:
            if k != j:
                seen[k] = seen.get(k, 0) + 1
    for shared in seen.values():
        count += shared * (shared - 1) // 2
    return count


def _remove_four_cycles(rows, n, rng, max_swaps):
    rows_sets = [set(r) for r in rows]
    var_checks = [set() for _ in range(n)]
    for j, r in enumerate(rows_sets):
        for v in r:
            var_checks[v].add(j)
    m = len(rows_sets)

    def offending():
        out = []
        for j in range(m):
            for v in sorted(rows_sets[j]):
                for k in var_checks[v]:
                    if k > j and len(rows_sets[j] & rows_sets[k]) >= 2:
                        out.append((j, v))
                        break
        return out

    attempts = 0
    todo = offending()
    while todo and attempts < max_swaps:
        j, v = todo[int(rng.integers(len(todo)))]
        k = int(rng.integers(m))
        candidates = sorted(rows_sets[k] - rows_sets[j])
        attempts += 1
        if k == j or not candidates:
            continue
        v2 = candidates[int(rng.integers(len(candidates)))]
        if v in rows_sets[k]:
            continue
        before = _count_cycles_through(rows_sets, j, var_checks) + _count_cycles_through(rows_sets, k, var_checks)
        _swap(rows_sets, var_checks, j, v, k, v2)
        after = _count_cycles_through(rows_sets, j, var_checks) + _count_cycles_through(rows_sets, k, var_checks)
        if after >= before:
            _swap(rows_sets, var_checks, j, v2, k, v)
            continue
        todo = offending()
    residual = sum(_count_cycles_through(rows_sets, j, var_checks) for j in range(m)) // 2
    return [sorted(r) for r in rows_sets], residual


def _swap(rows_sets, var_checks, j, v, k, v2):
    # edge (j, v), (k, v2) -> (j, v2), (k, v)
    rows_sets[j].remove(v)
    rows_sets[j].add(v2)
    rows_sets[k].remove(v2)
    rows_sets[k].add(v)
    var_checks[v].remove(j)
    var_checks[v].add(k)
    var_checks[v2].remove(k)
    var_checks[v2].add(j)


# -- AList -----------------------------------------------------------------


def alist_write(h: ParityCheckMatrix) -> str:
    max_col = max((len(c) for c in h.col_support), default=0)
    max_row = max(len(r) for r in h.row_support)
    lines = [
        f"{h.n} {h.rows}",
        f"{max_col} {max_row}",
        " ".join(str(len(c)) for c in h.col_support),
        " ".join(str(len(r)) for r in h.row_support),
    ]
    for col in h.col_support:
        lines.append(" ".join(str(j + 1) for j in col) + " 0" * (max_col - len(col)))
    for row in h.row_support:
        lines.append(" ".join(str(v + 1) for v in row) + " 0" * (max_row - len(row)))
    return "\n".join(line.strip() for line in lines) + "\n"


def _ints(tokens: Sequence[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise AlistParseError(f"non-integer token in {' '.join(tokens)!r}", lineno) from None


def alist_read(text: str) -> ParityCheckMatrix:
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if len(lines) < 4:
        raise AlistParseError("file shorter than the 4 header lines", len(lines) or None)
    (l1, t1), (l2, t2), (l3, t3), (l4, t4) = lines[:4]
    header = _ints(t1, l1)
    if len(header) != 2:
        raise AlistParseError("expected 'n rows'", l1)
    n, m = header
    if n < 1 or m < 1:
        raise AlistParseError("n and rows must be positive", l1)
    maxes = _ints(t2, l2)
    if len(maxes) != 2:
        raise AlistParseError("expected 'max_col_weight max_row_weight'", l2)
    col_w = _ints(t3, l3)
    row_w = _ints(t4, l4)
    if len(col_w) != n:
        raise AlistParseError(f"expected {n} column weights, got {len(col_w)}", l3)
    if len(row_w) != m:
        raise AlistParseError(f"expected {m} row weights, got {len(row_w)}", l4)
    if max(col_w) != maxes[0] or max(row_w) != maxes[1]:
        raise AlistParseError("declared maximum weights disagree with the weight lists", l2)
    body = lines[4:]
    if len(body) != n + m:
        where = body[n + m][0] if len(body) > n + m else (body[-1][0] if body else l4)
        raise AlistParseError(f"expected {n + m} adjacency lines, got {len(body)}", where)

    cols = []
    for v, (lineno, tokens) in enumerate(body[:n]):
        entries = _checked_entries(tokens, lineno, col_w[v], maxes[0], m)
        cols.append([e - 1 for e in entries])
    rows = []
    for j, (lineno, tokens) in enumerate(body[n:]):
        entries = _checked_entries(tokens, lineno, row_w[j], maxes[1], n)
        rows.append([e - 1 for e in entries])

    try:
        h = ParityCheckMatrix.from_rows(n, rows)
    except ParameterError as exc:
        raise AlistParseError(str(exc), body[n][0]) from None
    if tuple(tuple(sorted(c)) for c in cols) != h.col_support:
        raise AlistParseError("column lists are inconsistent with row lists", body[0][0])
    return h


def _checked_entries(tokens, lineno, weight, max_weight, bound):
    values = _ints(tokens, lineno)
    entries = [e for e in values if e != 0]
    if len(values) not in (weight, max_weight) or (len(values) == max_weight and len(entries) != weight):
        raise AlistParseError(f"declared degree {weight} but found {len(entries)} entries", lineno)
    if len(entries) != weight:
        raise AlistParseError(f"declared degree {weight} but found {len(entries)} entries", lineno)
    for e in entries:
        if not 1 <= e <= bound:
            raise AlistParseError(f"index {e} outside 1..{bound}", lineno)
    return entries
