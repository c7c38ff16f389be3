"""Penalty-based pseudo-Boolean polynomials over integer cost matrices.

A cost matrix C (m rows, n columns, non-negative integers) is compressed
into a multilinear polynomial over Boolean variables y_1..y_m: each column
is sorted, the sorted values are turned into first-value-plus-differences,
and every difference becomes the coefficient of the product of the y's of
the rows that precede it in the sort order.  Summing like monomials across
columns ("local aggregation") yields the canonical polynomial.

Because all coefficients are non-negative differences, equal neighbouring
costs contribute nothing: a constant column collapses to its minimum, and a
constant matrix collapses to a single constant.  The maximum monomial size
(the degree) therefore measures how much contrast the matrix contains,
which is what the patch classifier consumes.

Everything here is exact 64-bit integer arithmetic; all values are pure and
immutable so results are identical under any execution order.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import ConsistencyError, ParameterError

# A monomial's variable set: strictly increasing 1-based row indices.
# () is the constant term.
Term = tuple[int, ...]

# Row-major integer grid used for the permutation / sorted / delta displays.
IntMatrix = tuple[tuple[int, ...], ...]

_MAX_CELL = 2**31 - 1
_MAX_CELLS = 2**20


@dataclass(frozen=True)
class CostMatrix:
    """Immutable m x n grid of non-negative integer costs.

    `cells` is stored row-major as nested tuples.  Bounds keep every
    aggregate (at most the sum of all cells) inside a signed 64-bit
    accumulator: each cell <= 2**31 - 1 and m*n <= 2**20.
    """

    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.cells or not self.cells[0]:
            raise ParameterError("cost matrix must have at least one row and column")
        n = len(self.cells[0])
        if len(self.cells) * n > _MAX_CELLS:
            raise ParameterError(f"cost matrix exceeds {_MAX_CELLS} cells")
        for row in self.cells:
            if len(row) != n:
                raise ConsistencyError("cost matrix rows have unequal lengths")
            for v in row:
                if not isinstance(v, int) or isinstance(v, bool):
                    raise ParameterError("cost matrix cells must be integers")
                if v < 0 or v > _MAX_CELL:
                    raise ParameterError(f"cost matrix cell {v} outside [0, {_MAX_CELL}]")

    @classmethod
    def from_rows(cls, rows) -> "CostMatrix":
        return cls(tuple(tuple(int(v) for v in row) for row in rows))

    @property
    def rows(self) -> int:
        return len(self.cells)

    @property
    def cols(self) -> int:
        return len(self.cells[0])

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(row[j] for row in self.cells)


@dataclass(frozen=True)
class PseudoBooleanPolynomial:
    """Canonical reduced polynomial of an m-row cost matrix.

    `terms` maps each monomial's row tuple to its positive coefficient;
    zero coefficients are never stored, and no monomial uses more than
    m - 1 variables.  The mapping must not be mutated after construction.
    """

    m: int
    terms: dict[Term, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ParameterError("polynomial needs at least one row variable")
        for t, c in self.terms.items():
            if c == 0:
                raise ConsistencyError("canonical polynomial stores a zero coefficient")
            if len(t) > self.m - 1:
                raise ConsistencyError(f"term {t} too large for {self.m} rows")
            if any(not 1 <= i <= self.m for i in t) or tuple(sorted(set(t))) != t:
                raise ConsistencyError(f"term {t} is not a sorted set of rows in 1..{self.m}")

    def degree(self) -> int:
        """Largest monomial size; 0 for a constant (or empty) polynomial."""
        return max((len(t) for t in self.terms), default=0)

    def constant(self) -> int:
        return self.terms.get((), 0)

    def evaluate(self, y) -> int:
        """Value at a Boolean assignment, one entry per row variable."""
        ys = tuple(y)
        if len(ys) != self.m:
            raise ConsistencyError(f"assignment has {len(ys)} entries, polynomial has {self.m} rows")
        for v in ys:
            if v not in (0, 1, False, True):
                raise ParameterError("assignment entries must be 0 or 1")
        total = 0
        for t, c in self.terms.items():
            if all(ys[i - 1] for i in t):
                total += c
        return total

    def truncate(self, d: int) -> "PseudoBooleanPolynomial":
        """Copy with every monomial of size >= d removed."""
        if d < 1:
            raise ParameterError("truncation degree must be >= 1")
        return PseudoBooleanPolynomial(self.m, {t: c for t, c in self.terms.items() if len(t) < d})

    def ordered_terms(self) -> list[tuple[Term, int]]:
        """Monomials in display order: by size, then largest row index first.

        This matches the column-sorted layout the reduction produces, e.g.
        y1*y3 before y2*y3 before y1*y4.
        """
        return sorted(self.terms.items(), key=lambda tc: (len(tc[0]), tuple(reversed(tc[0]))))

    def equivalence_key(self, include_constant: bool = True) -> str:
        """Deterministic serialization used to compare reduced polynomials.

        Two polynomials are equal iff their keys are equal.  With
        `include_constant=False` the constant term is ignored, so matrices
        differing only by a uniform brightness shift compare equal.
        """
        parts = []
        for t, c in self.ordered_terms():
            if not t and not include_constant:
                continue
            parts.append(f"{c}:{'.'.join(map(str, t))}")
        return f"{self.m}|" + ";".join(parts)

    def to_text(self) -> str:
        """Human-readable form, e.g. ``11 + 11*y3 + 3*y4 + 2*y1*y3``."""
        if not self.terms:
            return "0"
        chunks = []
        for t, c in self.ordered_terms():
            if not t:
                chunks.append(str(c))
            else:
                chunks.append("*".join([str(c)] + [f"y{i}" for i in t]))
        return " + ".join(chunks)

    def to_json_terms(self) -> list[dict]:
        """JSON-friendly list of ``{"coeff": c, "rows": [...]}`` objects."""
        return [{"coeff": c, "rows": list(t)} for t, c in self.ordered_terms()]


_TERM_RE = re.compile(r"^(\d+)((?:\*y\d+)*)$")


def _infer_rows(terms: dict[Term, int]) -> int:
    """Smallest m admitting these terms: covers every index and size + 1."""
    m = 1
    for t in terms:
        if t:
            m = max(m, t[-1], len(t) + 1)
    return m


def polynomial_from_text(text: str, m: int | None = None) -> PseudoBooleanPolynomial:
    """Parse the `to_text` form back into a polynomial.

    `m` fixes the row count; when omitted it is inferred as the largest row
    index mentioned (1 for a pure constant), which may be smaller than the
    origin matrix's row count.
    """
    terms: dict[Term, int] = {}
    stripped = text.strip()
    if stripped != "0":
        for chunk in stripped.split("+"):
            match = _TERM_RE.match(chunk.strip().replace(" ", ""))
            if match is None:
                raise ParameterError(f"unparseable polynomial chunk: {chunk!r}")
            coeff = int(match.group(1))
            rows = tuple(sorted(int(s) for s in re.findall(r"y(\d+)", match.group(2))))
            if rows in terms:
                raise ParameterError(f"duplicate monomial in text form: {chunk!r}")
            if coeff:
                terms[rows] = coeff
    if m is None:
        m = _infer_rows(terms)
    return PseudoBooleanPolynomial(m, terms)


def polynomial_from_json(items, m: int | None = None) -> PseudoBooleanPolynomial:
    """Inverse of `to_json_terms`; accepts a parsed list or a JSON string."""
    if isinstance(items, str):
        items = json.loads(items)
    terms: dict[Term, int] = {}
    for obj in items:
        rows = tuple(sorted(int(i) for i in obj["rows"]))
        coeff = int(obj["coeff"])
        if rows in terms:
            raise ParameterError(f"duplicate monomial in JSON form: {rows}")
        if coeff:
            terms[rows] = coeff
    if m is None:
        m = _infer_rows(terms)
    return PseudoBooleanPolynomial(m, terms)


def permutation_matrix(c: CostMatrix) -> IntMatrix:
    """Per-column orderings that sort each column non-decreasingly.

    Entry (k, j) is the 1-based row index holding the k-th smallest value of
    column j.  Ties keep ascending row order (stable sort), which pins the
    internal representation; the reduced polynomial is independent of the
    tie-break because equal values yield zero differences.
    """
    m = c.rows
    columns = []
    for j in range(c.cols):
        col = c.column(j)
        columns.append(tuple(i + 1 for i in sorted(range(m), key=col.__getitem__)))
    return tuple(tuple(columns[j][k] for j in range(c.cols)) for k in range(m))


def _check_permutation(c: CostMatrix, pi: IntMatrix) -> None:
    if len(pi) != c.rows or any(len(row) != c.cols for row in pi):
        raise ConsistencyError("permutation matrix shape does not match cost matrix")
    for j in range(c.cols):
        order = [pi[k][j] for k in range(c.rows)]
        if sorted(order) != list(range(1, c.rows + 1)):
            raise ConsistencyError(f"column {j} is not a permutation of 1..{c.rows}")
        values = [c.cells[i - 1][j] for i in order]
        if any(a > b for a, b in zip(values, values[1:])):
            raise ConsistencyError(f"column {j} permutation does not sort the costs")


def sorted_matrix(c: CostMatrix, pi: IntMatrix) -> IntMatrix:
    """Costs rearranged by a sorting permutation: row k holds k-th smallest."""
    _check_permutation(c, pi)
    return tuple(
        tuple(c.cells[pi[k][j] - 1][j] for j in range(c.cols)) for k in range(c.rows)
    )


def delta_matrix(c: CostMatrix, pi: IntMatrix) -> IntMatrix:
    """First sorted value, then successive differences, down each column.

    Entries are non-negative; each column sums to the column maximum of the
    cost matrix and starts at its minimum.
    """
    sc = sorted_matrix(c, pi)
    out = [sc[0]]
    for k in range(1, c.rows):
        out.append(tuple(sc[k][j] - sc[k - 1][j] for j in range(c.cols)))
    return tuple(out)


def terms_matrix(pi: IntMatrix) -> tuple[tuple[Term, ...], ...]:
    """Monomial grid: cell (k, j) multiplies the rows sorted before it.

    Row 0 is all constants (empty products); cell (k, j) is the set of the
    first k entries of column j's permutation.
    """
    m = len(pi)
    if m == 0 or not pi[0]:
        raise ConsistencyError("permutation matrix is empty")
    n = len(pi[0])
    grid: list[tuple[Term, ...]] = [tuple(() for _ in range(n))]
    prefixes: list[set[int]] = [set() for _ in range(n)]
    for k in range(1, m):
        row = []
        for j in range(n):
            prefixes[j].add(pi[k - 1][j])
            row.append(tuple(sorted(prefixes[j])))
        grid.append(tuple(row))
    return tuple(grid)


def _reduce_columns(columns, m: int) -> dict[int, int]:
    """Aggregate sorted-difference coefficients keyed by row bitmask.

    The inner loop of the whole package: each column is sorted stably, the
    running bitmask collects the rows already passed, and strictly positive
    differences land on that mask.  Equal neighbours contribute nothing, so
    the result is canonical (no zero coefficients except possibly the
    constant, which the caller filters).
    """
    acc: dict[int, int] = {0: 0}
    for col in columns:
        order = sorted(range(m), key=col.__getitem__)
        prev = col[order[0]]
        acc[0] += prev
        mask = 0
        for k in range(1, m):
            mask |= 1 << order[k - 1]
            v = col[order[k]]
            if v != prev:
                d = v - prev
                acc[mask] = acc.get(mask, 0) + d
                prev = v
    return acc


def _mask_to_term(mask: int, m: int) -> Term:
    return tuple(i + 1 for i in range(m) if (mask >> i) & 1)


def _masks_to_terms(acc: dict[int, int], m: int) -> dict[Term, int]:
    return {_mask_to_term(mask, m): c for mask, c in acc.items() if c}


def reduce(c: CostMatrix) -> PseudoBooleanPolynomial:
    """Canonical reduced polynomial of a cost matrix.

    Equivalent to summing delta_matrix coefficients over terms_matrix
    monomials and aggregating like terms; implemented in one pass per
    column.  The constant term is the sum of column minima, and the sum of
    all coefficients is the sum of column maxima.
    """
    columns = [c.column(j) for j in range(c.cols)]
    return PseudoBooleanPolynomial(c.rows, _masks_to_terms(_reduce_columns(columns, c.rows), c.rows))


def max_column_degree(columns, m: int, floor: int = 0) -> int:
    """Largest monomial size any column produces, without building terms.

    A column's deepest strict increase at sorted position k yields a
    monomial of k variables; coefficients are non-negative so aggregation
    can never cancel it.  `floor` lets callers skip columns that cannot
    improve a known lower bound.
    """
    best = floor
    for col in columns:
        order = sorted(range(m), key=col.__getitem__)
        for k in range(m - 1, best, -1):
            if col[order[k]] > col[order[k - 1]]:
                best = k
                break
        if best == m - 1:
            break
    return best


@dataclass(frozen=True)
class ColumnPacking:
    """Monomials regrouped into superset chains for compact display.

    Each column lists (term, coefficient) pairs whose row sets strictly
    grow, mirroring how one matrix column generates its monomials.  Used
    for size reporting and the inspect view only; degree and equivalence
    are always computed on the canonical term map.
    """

    columns: tuple[tuple[tuple[Term, int], ...], ...]

    @property
    def width(self) -> int:
        return len(self.columns)


def column_pack(p: PseudoBooleanPolynomial) -> ColumnPacking:
    """Partition the monomials into few superset chains, longest chains first.

    Greedy extraction: repeatedly remove a longest chain under strict set
    containment (ties resolved toward canonically earlier terms), until no
    monomial remains.  Incomparable terms necessarily open new columns.
    """
    ordered = p.ordered_terms()
    masks = [sum(1 << (i - 1) for i in t) for t, _ in ordered]
    alive = list(range(len(ordered)))
    columns: list[tuple[tuple[Term, int], ...]] = []
    while alive:
        # Longest chain by DP over the canonical order; supersets always
        # come later because containment implies larger size.
        length: dict[int, int] = {}
        successor: dict[int, int | None] = {}
        for i in reversed(alive):
            best_len, best_next = 1, None
            for j in alive:
                if j <= i:
                    continue
                if masks[i] & masks[j] == masks[i] and masks[i] != masks[j]:
                    if 1 + length[j] > best_len:
                        best_len, best_next = 1 + length[j], j
            length[i], successor[i] = best_len, best_next
        start = max(alive, key=lambda i: (length[i], -i))
        chain = []
        node: int | None = start
        while node is not None:
            chain.append(node)
            node = successor[node]
        columns.append(tuple(ordered[i] for i in chain))
        removed = set(chain)
        alive = [i for i in alive if i not in removed]
    return ColumnPacking(tuple(columns))
