"""Generic cooperative optimization over finite domains.

A cost E(x) is split into one sub-cost per variable, E = sum_i E_i, where E_i
involves variable i and a small scope around it. Each variable keeps a soft
decision table c_i(v); one iteration recomputes every table as

    c_i(v) = min over scope_i \\ {i} of (1 - lam) E_i + lam * sum_j w_ij c_j(x_j)

with x_i pinned to v. W is a propagation matrix (nonnegative, irreducible,
unit column sums). Updates are synchronous.

The lower-bound and monotonicity guarantees assume every E_i is nonnegative
when starting from c = 0; shift signed costs by a constant first.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import InfeasibleError, InvariantViolation, ParameterError, TopologyError

COLUMN_SUM_TOL = 1e-12


# -- decomposition contract ------------------------------------------------


class Subproblem(Protocol):
    owner: int
    scope: tuple[int, ...]

    def blended_min(self, own_weight: float, soft: Mapping[int, np.ndarray]) -> np.ndarray:
        """For each value of ``owner``: min over the rest of the scope of
        ``own_weight * E_i + sum_{j in scope} soft[j][x_j]``. Infeasible pins give inf."""

    def marginals(self, own_weight: float, soft: Mapping[int, np.ndarray]) -> dict[int, np.ndarray]:
        """Same objective, minimized over everything but one scope variable, for each."""

    def costs(self, assignments: np.ndarray) -> np.ndarray:
        """E_i at each row of a (B, n) array of full assignments; inf where infeasible."""


@dataclass
class TableSubproblem:
    """Sub-cost given as a dense table over its scope (axes follow ``scope``); inf marks hard violations."""

    owner: int
    scope: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        self.scope = tuple(int(s) for s in self.scope)
        self.table = np.asarray(self.table, dtype=float)
        if self.owner not in self.scope:
            raise ParameterError(f"scope of sub-problem {self.owner} must contain it")
        if self.table.ndim != len(self.scope):
            raise ParameterError("table rank must equal scope size")

    def _objective(self, own_weight, soft):
        total = own_weight * self.table
        for axis, var in enumerate(self.scope):
            s = soft.get(var)
            if s is not None:
                shape = [1] * total.ndim
                shape[axis] = -1
                total = total + np.reshape(s, shape)
        return total

    def blended_min(self, own_weight, soft):
        return self.marginals(own_weight, soft)[self.owner]

    def marginals(self, own_weight, soft):
        total = self._objective(own_weight, soft)
        axes = tuple(range(total.ndim))
        return {
            var: total.min(axis=tuple(a for a in axes if a != k)) if total.ndim > 1 else total.copy()
            for k, var in enumerate(self.scope)
        }

    def costs(self, assignments):
        assignments = np.atleast_2d(assignments)
        return self.table[tuple(assignments[:, v] for v in self.scope)]


@dataclass
class CostDecomposition:
    domains: tuple[int, ...]
    subproblems: list

    def __post_init__(self):
        self.domains = tuple(int(d) for d in self.domains)
        if len(self.subproblems) != len(self.domains):
            raise ParameterError("need exactly one sub-problem per variable")
        for i, sub in enumerate(self.subproblems):
            if sub.owner != i or i not in sub.scope:
                raise ParameterError(f"sub-problem {i} must own variable {i} and contain it in scope")

    @property
    def n(self) -> int:
        return len(self.domains)

    def energies(self, assignments) -> np.ndarray:
        assignments = np.atleast_2d(np.asarray(assignments, dtype=np.int64))
        total = np.zeros(len(assignments))
        for sub in self.subproblems:
            total = total + sub.costs(assignments)
        return total

    def energy(self, x) -> float:
        return float(self.energies(np.asarray(x)[None, :])[0])


def pairwise_decomposition(n: int, factors: Mapping[tuple[int, int], np.ndarray], domain: int = 2) -> CostDecomposition:
    """Split E = sum f_ab(x_a, x_b) by giving half of every factor to each endpoint."""
    neighbours: list[set[int]] = [set() for _ in range(n)]
    for a, b in factors:
        neighbours[a].add(b)
        neighbours[b].add(a)
    subs = []
    for i in range(n):
        scope = tuple(sorted(neighbours[i] | {i}))
        pos = {v: k for k, v in enumerate(scope)}
        table = np.zeros((domain,) * len(scope))
        for (a, b), f in factors.items():
            if i not in (a, b):
                continue
            shape = [1] * len(scope)
            f = np.asarray(f, dtype=float)
            if pos[a] < pos[b]:
                shape[pos[a]], shape[pos[b]] = domain, domain
                table = table + 0.5 * f.reshape(shape)
            else:
                shape[pos[b]], shape[pos[a]] = domain, domain
                table = table + 0.5 * f.T.reshape(shape)
        subs.append(TableSubproblem(i, scope, table))
    return CostDecomposition((domain,) * n, subs)


# -- propagation matrix ----------------------------------------------------


@dataclass(frozen=True)
class PropagationMatrix:
    matrix: sp.csr_matrix

    @classmethod
    def from_dense(cls, dense) -> "PropagationMatrix":
        return cls(sp.csr_matrix(np.asarray(dense, dtype=float)))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        start, stop = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.indices[start:stop], self.matrix.data[start:stop]

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    failed: str | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def validate_propagation_matrix(w: PropagationMatrix, require_symmetric: bool = False) -> ValidationReport:
    m = w.matrix
    if m.shape[0] != m.shape[1]:
        return ValidationReport(False, "square", f"shape {m.shape}")
    if m.nnz and (m.data < 0).any():
        return ValidationReport(False, "nonnegative", "negative entry present")
    sums = np.asarray(m.sum(axis=0)).ravel()
    worst = np.abs(sums - 1.0)
    if (worst > COLUMN_SUM_TOL).any():
        j = int(np.argmax(worst))
        return ValidationReport(False, "column_sums", f"column {j} sums to {sums[j]!r}")
    support = (m != 0).astype(np.int8)
    ncomp, _ = connected_components(support, directed=True, connection="strong")
    if ncomp != 1:
        return ValidationReport(False, "irreducible", f"support graph has {ncomp} strongly connected components")
    if require_symmetric and m.nnz and abs(m - m.T).max() > COLUMN_SUM_TOL:
        return ValidationReport(False, "symmetric", "W differs from its transpose")
    return ValidationReport(True)


def _is_bipartite(neighbours: Sequence[set[int]]) -> bool:
    colour = [-1] * len(neighbours)
    for start in range(len(neighbours)):
        if colour[start] >= 0:
            continue
        colour[start] = 0
        stack = [start]
        while stack:
            u = stack.pop()
            for v in neighbours[u]:
                if colour[v] < 0:
                    colour[v] = 1 - colour[u]
                    stack.append(v)
                elif colour[v] == colour[u]:
                    return False
    return True


def build_propagation_matrix(neighbor_sets: Sequence[Sequence[int]]) -> PropagationMatrix:
    """Symmetric W from a neighbour relation: 1/D off-diagonal, slack on the diagonal.

    D is the largest neighbourhood. A regular bipartite relation would leave a
    zero, periodic diagonal, so D+1 is used instead there.
    """
    n = len(neighbor_sets)
    neighbours = [set(int(j) for j in s) - {i} for i, s in enumerate(neighbor_sets)]
    for i, s in enumerate(neighbours):
        for j in s:
            if not 0 <= j < n:
                raise ParameterError(f"neighbour {j} of {i} out of range")
            if i not in neighbours[j]:
                raise ParameterError(f"neighbour relation not symmetric: {i}->{j}")
    rows = [i for i in range(n) for _ in neighbours[i]]
    cols = [j for i in range(n) for j in sorted(neighbours[i])]
    adjacency = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, labels = connected_components(adjacency, directed=False)
    if ncomp > 1:
        other = sorted(int(v) for v in np.flatnonzero(labels != labels[0]))
        comp = [v for v in other if labels[v] == labels[other[0]]]
        raise TopologyError(f"neighbour graph is disconnected; component {comp} is separated from variable 0", comp)

    degree = np.array([len(s) for s in neighbours], dtype=float)
    delta = degree.max() if n else 0.0
    if delta == 0:
        return PropagationMatrix(sp.identity(n, format="csr"))
    denom = delta
    if np.all(degree == delta) and _is_bipartite(neighbours):
        denom = delta + 1
    diag = 1.0 - degree / denom
    data = np.concatenate((np.full(len(rows), 1.0 / denom), diag))
    r = np.concatenate((rows, np.arange(n)))
    c = np.concatenate((cols, np.arange(n)))
    mat = sp.csr_matrix((data, (r, c)), shape=(n, n))
    mat.eliminate_zeros()
    return PropagationMatrix(mat)


def scope_neighbourhoods(dec: CostDecomposition) -> list[set[int]]:
    """Symmetrised co-scope relation: i ~ j when either scope contains the other."""
    neighbours = [set(sub.scope) - {i} for i, sub in enumerate(dec.subproblems)]
    for i, s in enumerate(list(neighbours)):
        for j in s:
            neighbours[j].add(i)
    return neighbours


# -- state and iteration ---------------------------------------------------


@dataclass(frozen=True)
class AssignmentConstraints:
    values: tuple[np.ndarray, ...]
    k: int = 0

    @classmethod
    def zeros(cls, domains: Sequence[int]) -> "AssignmentConstraints":
        return cls(tuple(np.zeros(d) for d in domains))

    @classmethod
    def random(cls, domains: Sequence[int], rng: np.random.Generator, scale: float = 1.0) -> "AssignmentConstraints":
        return cls(tuple(scale * rng.standard_normal(d) for d in domains))

    def __getitem__(self, i: int) -> np.ndarray:
        return self.values[i]

    def __len__(self):
        return len(self.values)

    def lower_bound(self) -> float:
        return float(sum(float(v.min()) for v in self.values))

    def evaluate(self, assignments) -> np.ndarray:
        """sum_i c_i(x_i) for each row of a (B, n) assignment array."""
        assignments = np.atleast_2d(assignments)
        return sum(v[assignments[:, i]] for i, v in enumerate(self.values))

    def distance(self, other: "AssignmentConstraints") -> float:
        return max(float(np.abs(a - b).max()) for a, b in zip(self.values, other.values))

    def candidate(self) -> np.ndarray:
        return np.array([int(np.argmin(v)) for v in self.values])


@dataclass
class IterationReport:
    k: int
    candidate: np.ndarray
    lower_bound: float
    consensus: bool
    residual: float
    marginals: list[dict[int, np.ndarray]] = field(repr=False, default_factory=list)
    gap_certificate: float | None = None
    candidate_cost: float = math.nan
    lam: float = 0.0


def consensus_check(marginals: Sequence[Mapping[int, np.ndarray]]) -> bool:
    """True when every variable has one strict argmin shared by all sub-problems that see it."""
    choice: dict[int, int] = {}
    for table in marginals:
        for var, g in table.items():
            g = np.asarray(g)
            best = int(np.argmin(g))
            if np.count_nonzero(g == g[best]) > 1:
                return False
            if choice.setdefault(var, best) != best:
                return False
    return True


def _update_one(dec, w, c_prev, lam, i, with_marginals=True):
    sub = dec.subproblems[i]
    in_scope = set(sub.scope)
    soft = {}
    const = 0.0
    cols, weights = w.row(i)
    for j, wij in zip(cols, weights):
        j = int(j)
        if j in in_scope:
            soft[j] = lam * wij * c_prev[j]
        else:
            const += lam * wij * float(c_prev[j].min())
    table = sub.blended_min(1.0 - lam, soft) + const
    if not np.all(np.isfinite(table)):
        raise InfeasibleError(i, int(np.flatnonzero(~np.isfinite(table))[0]))
    if not with_marginals:
        return table, {}
    margs = {var: g + const for var, g in sub.marginals(1.0 - lam, soft).items()}
    return table, margs


def coop_iterate(dec: CostDecomposition, w: PropagationMatrix, c_prev: AssignmentConstraints, lambda_k: float,
                 executor=None, with_marginals: bool = True):
    """One synchronous update. Returns the new tables and an IterationReport.

    With ``with_marginals=False`` the per-scope marginals are skipped and the
    report's consensus flag is always False; the tables are unaffected.
    """
    if not 0.0 <= lambda_k < 1.0:
        raise ParameterError(f"cooperation strength must lie in [0, 1), got {lambda_k}")
    if len(c_prev) != dec.n or w.n != dec.n:
        raise ParameterError("state, propagation matrix and decomposition sizes differ")
    indices = range(dec.n)
    if executor is None:
        results = [_update_one(dec, w, c_prev, lambda_k, i, with_marginals) for i in indices]
    else:
        results = list(executor.map(lambda i: _update_one(dec, w, c_prev, lambda_k, i, with_marginals), indices))
    c_new = AssignmentConstraints(tuple(r[0] for r in results), c_prev.k + 1)
    marginals = [r[1] for r in results]
    report = IterationReport(
        k=c_new.k,
        candidate=c_new.candidate(),
        lower_bound=c_new.lower_bound(),
        consensus=with_marginals and consensus_check(marginals),
        residual=c_new.distance(c_prev),
        marginals=marginals,
        lam=lambda_k,
    )
    return c_new, report


def gap_certificate(e_tilde: float, lower_bound_prev: float, lambda_product: float, tol: float = 1e-9) -> float:
    """Upper bound on E(x~) - E* for a consensus candidate held over a run of steps."""
    if lambda_product == 0:
        return 0.0
    slack = e_tilde - lower_bound_prev
    if slack < -tol * max(1.0, abs(e_tilde)):
        raise InvariantViolation(f"lower bound {lower_bound_prev} exceeds candidate cost {e_tilde}")
    return lambda_product * max(slack, 0.0)


@dataclass(frozen=True)
class CoopConfig:
    lambda_schedule: Callable[[int], float] | float = 0.9
    max_iterations: int = 120
    consensus_window: int = 5
    residual_tolerance: float = 0.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if self.consensus_window < 1:
            raise ParameterError("consensus_window must be >= 1")

    def lam(self, k: int) -> float:
        s = self.lambda_schedule
        value = float(s(k)) if callable(s) else float(s)
        if not 0.0 <= value < 1.0:
            raise ParameterError(f"lambda_{k} = {value} outside [0, 1)")
        return value


@dataclass
class RunResult:
    trace: list[IterationReport]
    final: AssignmentConstraints
    stop_reason: str

    @property
    def candidate(self) -> np.ndarray:
        return self.trace[-1].candidate


def run(dec: CostDecomposition, w: PropagationMatrix, config: CoopConfig = CoopConfig(),
        c0: AssignmentConstraints | None = None, keep_marginals: bool = False, executor=None) -> RunResult:
    c = c0 if c0 is not None else AssignmentConstraints.zeros(dec.domains)
    c = replace(c, k=0)
    trace: list[IterationReport] = []
    prev_bound = c.lower_bound()
    streak = 0
    streak_candidate = None
    lam_product = 1.0
    bound_before = 0.0
    reason = "max_iterations"
    for k in range(1, config.max_iterations + 1):
        lam = config.lam(k)
        c_new, report = coop_iterate(dec, w, c, lam, executor)
        report.candidate_cost = dec.energy(report.candidate)
        if report.consensus:
            if streak and np.array_equal(report.candidate, streak_candidate):
                streak += 1
                lam_product *= lam
            else:
                streak = 1
                streak_candidate = report.candidate
                lam_product = lam
                bound_before = prev_bound
            report.gap_certificate = gap_certificate(report.candidate_cost, bound_before, lam_product)
        else:
            streak = 0
        if not keep_marginals:
            report.marginals = []
        trace.append(report)
        prev_bound = report.lower_bound
        c = c_new
        if streak >= config.consensus_window:
            reason = "consensus"
            break
        if report.residual < config.residual_tolerance:
            reason = "converged"
            break
    return RunResult(trace, c, reason)


TRACE_FIELDS = ("k", "lower_bound", "residual", "consensus", "candidate_cost")


def trace_to_csv(trace: Sequence[IterationReport], out=None) -> str:
    """One row per iteration; written to ``out`` (path or file object) if given, always returned."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_FIELDS)
    for r in trace:
        writer.writerow([r.k, repr(r.lower_bound), repr(r.residual), int(r.consensus), repr(r.candidate_cost)])
    text = buf.getvalue()
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w", newline="") as fh:
            fh.write(text)
    elif out is not None:
        out.write(text)
    return text
