"""Exact integer-lattice algebra for quotient actions of Z^d.

An action is described only through an integer basis of its kernel ``K``.
From it we read off the free rank ``p``, the torsion order ``l``, a basis
``U`` of a free complement ``F``, coset representatives of ``F + K`` and
the index group ``H = union_k (x_k + F)`` with its addition modulo ``K``,
the quotient sup-norm ``N`` and its balls ``H_n``.

All arithmetic on the algebraic path uses Python integers; results are
exported as ``int64`` arrays after an explicit range check.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CapacityError",
    "InvalidActionError",
    "SmithDecomposition",
    "GroupStructure",
    "HElement",
    "smith_normal_form",
    "hermite_normal_form",
    "analyze_action",
    "trivial_action",
    "project_to_H",
    "project_many",
    "embed",
    "h_add",
    "h_inv",
    "h_norm",
    "enumerate_Hn",
    "count_coset_points",
    "coset_counts",
]

_INT64_MAX = np.iinfo(np.int64).max


class CapacityError(OverflowError):
    """Raised when an exact integer result does not fit the exported width."""


class InvalidActionError(ValueError):
    """Raised for kernel bases that do not describe an admissible action."""


def _to_rows(A) -> list[list[int]]:
    arr = np.asarray(A)
    if arr.size == 0:
        shape = arr.shape if arr.ndim == 2 else (0, 0)
        return [[] for _ in range(shape[0])]
    if arr.ndim != 2:
        raise ValueError("expected a 2-d integer matrix")
    rows = [[int(x) for x in row] for row in arr.tolist()]
    if not np.all(np.asarray(arr, dtype=float) == np.asarray(rows, dtype=float)):
        raise ValueError("matrix entries must be integers")
    return rows


def _export(rows: list[list[int]], ncols: int) -> np.ndarray:
    for row in rows:
        for x in row:
            if abs(x) > _INT64_MAX:
                raise CapacityError(f"entry {x} exceeds 64-bit range")
    return np.array(rows, dtype=np.int64).reshape(len(rows), ncols)


def _identity(n: int) -> list[list[int]]:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def _matmul(A: list[list[int]], B: list[list[int]], inner: int, ncols: int) -> list[list[int]]:
    return [[sum(A[i][k] * B[k][j] for k in range(inner)) for j in range(ncols)] for i in range(len(A))]


def _det(M: list[list[int]]) -> int:
    """Exact determinant by fraction-free Bareiss elimination."""
    n = len(M)
    if n == 0:
        return 1
    A = [row[:] for row in M]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def _adjugate(M: list[list[int]]) -> list[list[int]]:
    n = len(M)
    if n == 1:
        return [[1]]
    adj = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(M) if k != i]
            adj[j][i] = (-1) ** (i + j) * _det(minor)
    return adj


def _rank(M: list[list[int]], ncols: int) -> int:
    from fractions import Fraction

    A = [[Fraction(x) for x in row] for row in M]
    rank = 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(A)) if A[r][c] != 0), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        for r in range(len(A)):
            if r != rank and A[r][c] != 0:
                f = A[r][c] / A[rank][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[rank])]
        rank += 1
    return rank


@dataclass(frozen=True)
class SmithDecomposition:
    """``left @ A @ right == diag-matrix(diag)`` with unimodular ``left``, ``right``."""

    left: np.ndarray
    diag: tuple[int, ...]
    right: np.ndarray

    def diagonal_matrix(self, shape: tuple[int, int]) -> np.ndarray:
        S = np.zeros(shape, dtype=np.int64)
        for i, d in enumerate(self.diag):
            S[i, i] = d
        return S


def smith_normal_form(A) -> SmithDecomposition:
    """Smith normal form of an integer matrix.

    Parameters
    ----------
    A : array_like of int, shape (m, k)
        Any integer matrix, possibly empty or rank deficient.

    Returns
    -------
    SmithDecomposition
        ``P``, ``diag`` and ``Q`` with ``P @ A @ Q`` diagonal, ``diag``
        nonnegative, every nonzero entry dividing the next one, and
        ``|det P| = |det Q| = 1``. ``diag`` has ``min(m, k)`` entries.

    Raises
    ------
    CapacityError
        If an entry of ``P``, ``Q`` or ``diag`` leaves the int64 range.
    """
    arr = np.asarray(A)
    m, k = (arr.shape if arr.ndim == 2 else (0, 0))
    M = _to_rows(arr) if m and k else [[0] * k for _ in range(m)]
    P = _identity(m)
    Q = _identity(k)

    def swap_rows(i, j):
        M[i], M[j] = M[j], M[i]
        P[i], P[j] = P[j], P[i]

    def swap_cols(i, j):
        for row in M:
            row[i], row[j] = row[j], row[i]
        for row in Q:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, c):  # row_dst += c * row_src
        M[dst] = [a + c * b for a, b in zip(M[dst], M[src])]
        P[dst] = [a + c * b for a, b in zip(P[dst], P[src])]

    def add_col(dst, src, c):  # col_dst += c * col_src
        for row in M:
            row[dst] += c * row[src]
        for row in Q:
            row[dst] += c * row[src]

    r = min(m, k)
    for t in range(r):
        while True:
            nz = [(abs(M[i][j]), i, j) for i in range(t, m) for j in range(t, k) if M[i][j] != 0]
            if not nz:
                break
            _, pi, pj = min(nz)
            swap_rows(t, pi)
            swap_cols(t, pj)
            clean = True
            for i in range(t + 1, m):
                if M[i][t]:
                    add_row(i, t, -(M[i][t] // M[t][t]))
                    clean = clean and M[i][t] == 0
            for j in range(t + 1, k):
                if M[t][j]:
                    add_col(j, t, -(M[t][j] // M[t][t]))
                    clean = clean and M[t][j] == 0
            if not clean:
                continue
            # pivot must divide the remaining block
            bad = next(
                (i for i in range(t + 1, m) for j in range(t + 1, k) if M[i][j] % M[t][t]),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, 1)
        if t < m and t < k and M[t][t] < 0:
            M[t] = [-x for x in M[t]]
            P[t] = [-x for x in P[t]]
    diag = tuple(M[i][i] for i in range(r))
    for d in diag:
        if d > _INT64_MAX:
            raise CapacityError(f"invariant factor {d} exceeds 64-bit range")
    return SmithDecomposition(_export(P, m), diag, _export(Q, k))


def hermite_normal_form(B) -> np.ndarray:
    """Column-style Hermite normal form of a full-column-rank integer matrix.

    The columns of the result span the same lattice as those of ``B``; the
    result is lower echelon with positive pivots and reduced entries to the
    left of each pivot.
    """
    rows = _to_rows(B)
    d = len(rows)
    c = len(rows[0]) if rows else 0
    cols = [[rows[i][j] for i in range(d)] for j in range(c)]
    pivot_row = 0
    for j in range(c):
        while pivot_row < d:
            # gcd-combine column j.. on pivot_row
            while True:
                nz = [(abs(cols[jj][pivot_row]), jj) for jj in range(j, c) if cols[jj][pivot_row]]
                if not nz:
                    break
                _, jj = min(nz)
                cols[j], cols[jj] = cols[jj], cols[j]
                done = True
                for jj in range(j + 1, c):
                    if cols[jj][pivot_row]:
                        f = cols[jj][pivot_row] // cols[j][pivot_row]
                        cols[jj] = [a - f * b for a, b in zip(cols[jj], cols[j])]
                        done = done and cols[jj][pivot_row] == 0
                if done:
                    break
            if cols[j][pivot_row] == 0:
                pivot_row += 1
                continue
            if cols[j][pivot_row] < 0:
                cols[j] = [-x for x in cols[j]]
            piv = cols[j][pivot_row]
            for jj in range(j):
                f = cols[jj][pivot_row] // piv
                cols[jj] = [a - f * b for a, b in zip(cols[jj], cols[j])]
            pivot_row += 1
            break
    out = [[cols[j][i] for j in range(c)] for i in range(d)]
    return _export(out, c)


@dataclass(frozen=True)
class HElement:
    """Element of ``H``: coset index ``k`` (0-based) and free coordinates ``z``."""

    coset: int
    free: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "free", tuple(int(x) for x in self.free))


@dataclass(frozen=True, eq=False)
class GroupStructure:
    """Algebraic decomposition ``Z^d / K = F_bar (+) N_bar`` of a quotient action.

    ``U`` (d x p) and ``V`` (d x (d-p)) are integer bases of ``F`` and ``K``;
    ``coset_reps`` (l x d) lists representatives of ``Z^d / (F + K)`` with the
    zero vector first. Coset indices are 0-based in code.
    """

    d: int
    p: int
    l: int
    U: np.ndarray
    V: np.ndarray
    coset_reps: np.ndarray
    _M: tuple = field(repr=False, default=())
    _adj: tuple = field(repr=False, default=())
    _det: int = field(repr=False, default=1)

    @property
    def kernel_rank(self) -> int:
        return self.d - self.p

    @property
    def identity(self) -> HElement:
        return HElement(0, (0,) * self.p)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "p": self.p,
            "l": self.l,
            "U": self.U.tolist(),
            "V": self.V.tolist(),
            "cosetReps": self.coset_reps.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "GroupStructure":
        d = int(data["d"])
        p = int(data["p"])
        U = np.array(data["U"], dtype=np.int64).reshape(d, p)
        V = np.array(data["V"], dtype=np.int64).reshape(d, d - p)
        reps = np.array(data["cosetReps"], dtype=np.int64).reshape(int(data["l"]), d)
        return _build(d, p, U, V, reps)

    def __eq__(self, other):
        if not isinstance(other, GroupStructure):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.to_json())


def _build(d, p, U, V, reps) -> GroupStructure:
    M = np.hstack([V, U]).astype(np.int64)  # columns: kernel first, then free
    Mrows = [[int(x) for x in row] for row in M.tolist()]
    det = _det(Mrows)
    if det == 0:
        raise InvalidActionError("columns of U and V are linearly dependent")
    adj = _adjugate(Mrows)
    return GroupStructure(
        d=d,
        p=p,
        l=len(reps),
        U=U,
        V=V,
        coset_reps=reps,
        _M=tuple(map(tuple, Mrows)),
        _adj=tuple(map(tuple, adj)),
        _det=det,
    )


def _free_complement(V_rows: list[list[int]], d: int, r: int, l: int) -> list[list[int]]:
    """Basis (as columns, d x p) of a free complement F with [Z^d : F+K] = l."""
    p = d - r
    for idx in itertools.combinations(range(d), p):
        cols = [[int(i == j) for i in range(d)] for j in idx]
        Mrows = [V_rows[i] + [c[i] for c in cols] for i in range(d)]
        if abs(_det(Mrows)) == l:
            return [[c[i] for c in cols] for i in range(d)]
    # no coordinate complement: read one off the Smith decomposition
    snf = smith_normal_form(np.array(V_rows, dtype=np.int64).reshape(d, r))
    Pinv = _adjugate([[int(x) for x in row] for row in snf.left.tolist()])
    detP = _det([[int(x) for x in row] for row in snf.left.tolist()])
    Pinv = [[x * detP for x in row] for row in Pinv]  # detP = +-1
    U = [row[r:] for row in Pinv]
    return hermite_normal_form(np.array(U, dtype=object).reshape(d, p)).tolist()


def analyze_action(kernel_basis, d: int | None = None) -> GroupStructure:
    """Group structure of the action whose kernel is spanned by ``kernel_basis``.

    Parameters
    ----------
    kernel_basis : array_like, shape (d, r)
        Integer columns spanning ``K``. An empty basis needs ``d``.
    d : int, optional
        Ambient dimension; required when ``kernel_basis`` has no columns.

    Returns
    -------
    GroupStructure
        With ``p = d - r``, ``V`` the supplied basis, ``U`` a free complement
        (unit vectors whenever they work, otherwise a Hermite-reduced basis)
        and coset representatives in lexicographic order, zero first.

    Raises
    ------
    InvalidActionError
        If ``r >= d`` or the columns are rationally dependent.
    """
    arr = np.asarray(kernel_basis)
    if arr.size == 0:
        if d is None:
            d = arr.shape[0] if arr.ndim == 2 else None
        if not d:
            raise InvalidActionError("empty kernel basis needs the ambient dimension d")
        arr = np.zeros((d, 0), dtype=np.int64)
    if arr.ndim != 2:
        raise InvalidActionError("kernel basis must be a d x r matrix")
    d0, r = arr.shape
    if d is not None and d != d0:
        raise InvalidActionError(f"kernel basis has {d0} rows, expected d={d}")
    d = d0
    if r >= d:
        raise InvalidActionError(f"kernel rank r={r} must be < d={d} so that p >= 1")
    V_rows = _to_rows(arr) if r else [[] for _ in range(d)]
    if r and _rank(V_rows, r) != r:
        raise InvalidActionError("kernel basis columns are linearly dependent")
    snf = smith_normal_form(arr) if r else None
    l = 1
    if snf is not None:
        for x in snf.diag:
            l *= x
    U_rows = _free_complement(V_rows, d, r, l)
    U = np.array(U_rows, dtype=np.int64).reshape(d, d - r)
    V = np.array(V_rows, dtype=np.int64).reshape(d, r)
    reps = _coset_reps(U, V, l)
    return _build(d, d - r, U, V, reps)


def trivial_action(d: int) -> GroupStructure:
    """Trivial kernel: ``H = Z^d``, ``U = I_d``, ``l = 1``."""
    return analyze_action(np.zeros((d, 0), dtype=np.int64), d=d)


def _coset_reps(U: np.ndarray, V: np.ndarray, l: int) -> np.ndarray:
    d = U.shape[0]
    if l == 1:
        return np.zeros((1, d), dtype=np.int64)
    M = np.hstack([V, U])
    Mrows = [[int(x) for x in row] for row in M.tolist()]
    adj = _adjugate(Mrows)
    det = _det(Mrows)

    def key(t):
        c = [sum(adj[i][j] * t[j] for j in range(d)) % abs(det) for i in range(d)]
        return tuple(c)

    found: dict[tuple, tuple] = {}
    for t in itertools.product(range(l), repeat=d):
        k = key(t)
        if k not in found:
            found[k] = t
            if len(found) == l:
                break
    reps = sorted(found.values())
    return np.array(reps, dtype=np.int64).reshape(l, d)


def embed(s: HElement, G: GroupStructure) -> np.ndarray:
    """Lattice point ``x_k + U z`` represented by ``s``."""
    return G.coset_reps[s.coset] + G.U @ np.asarray(s.free, dtype=np.int64).reshape(G.p)


def project_many(ts, G: GroupStructure) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised projection onto ``H``.

    Parameters
    ----------
    ts : array_like of int, shape (m, d)

    Returns
    -------
    coset : ndarray of int64, shape (m,)
    free : ndarray of int64, shape (m, p)
    """
    ts = np.asarray(ts, dtype=np.int64).reshape(-1, G.d)
    adj = np.array(G._adj, dtype=np.int64).reshape(G.d, G.d)
    det = G._det
    bound = int(np.abs(adj).sum(axis=1).max()) * (int(np.abs(ts).max(initial=0)) + int(np.abs(G.coset_reps).max()))
    if bound > _INT64_MAX // 4:
        raise CapacityError("projection would overflow 64-bit arithmetic")
    coset = np.full(ts.shape[0], -1, dtype=np.int64)
    free = np.zeros((ts.shape[0], G.p), dtype=np.int64)
    r = G.kernel_rank
    for k, x in enumerate(G.coset_reps):
        c = (ts - x) @ adj.T  # = det * coefficients in basis [V | U]
        ok = np.all(c % det == 0, axis=1) & (coset < 0)
        coset[ok] = k
        free[ok] = c[ok, r:] // det
    if np.any(coset < 0):  # pragma: no cover - cosets partition Z^d
        raise RuntimeError("coset lookup failed")
    return coset, free


def project_to_H(t, G: GroupStructure) -> HElement:
    """The unique ``s`` in ``H`` with ``t - embed(s)`` in ``K``."""
    coset, free = project_many(np.asarray(t).reshape(1, G.d), G)
    return HElement(int(coset[0]), tuple(int(x) for x in free[0]))


def h_add(s1: HElement, s2: HElement, G: GroupStructure) -> HElement:
    return project_to_H(embed(s1, G) + embed(s2, G), G)


def h_inv(s: HElement, G: GroupStructure) -> HElement:
    return project_to_H(-embed(s, G), G)


def _kernel_box(x: np.ndarray, G: GroupStructure, radius: float) -> list[range]:
    """Integer ranges for lambda covering every ``||x + V lambda||_inf <= radius``."""
    V = G.V.astype(float)
    pinv = np.linalg.pinv(V)
    centre = -pinv @ x.astype(float)
    half = np.abs(pinv).sum(axis=1) * radius
    return [range(int(np.floor(c - h - 1e-9)), int(np.ceil(c + h + 1e-9)) + 1) for c, h in zip(centre, half)]


def h_norm(s: HElement, G: GroupStructure) -> int:
    """Quotient norm ``N(s) = min_{v in K} ||s + v||_inf`` by exact enumeration."""
    x = embed(s, G)
    best = int(np.abs(x).max(initial=0))
    if G.kernel_rank == 0 or best == 0:
        return best
    ranges = _kernel_box(x, G, best)
    lams = np.array(list(itertools.product(*ranges)), dtype=np.int64)
    vals = np.abs(x[None, :] + lams @ G.V.T).max(axis=1)
    return int(min(best, vals.min()))


def _window(n: int, d: int) -> np.ndarray:
    ax = np.arange(-n, n + 1, dtype=np.int64)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _unique_elements(coset: np.ndarray, free: np.ndarray):
    keys = np.concatenate([coset[:, None], free], axis=1)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return uniq, inverse.reshape(-1), counts


def enumerate_Hn(n: int, G: GroupStructure) -> list[HElement]:
    """All ``s`` with ``N(s) <= n``, sorted by (coset, free coordinates).

    ``H_n`` is exactly the image of the window ``[-n, n]^d`` under the
    projection, since ``N(s)`` is the smallest sup-norm in ``s + K``.
    """
    if n < 0:
        return []
    coset, free = project_many(_window(n, G.d), G)
    uniq, _, _ = _unique_elements(coset, free)
    return [HElement(int(row[0]), tuple(int(x) for x in row[1:])) for row in uniq]


def coset_counts(n: int, G: GroupStructure):
    """Window projection table used by the samplers and sums.

    Returns
    -------
    elements : ndarray, shape (|H_n|, 1 + p)
        Rows ``(coset, free...)`` of ``H_n`` in sorted order.
    inverse : ndarray, shape ((2n+1)^d,)
        Index into ``elements`` for each window point (C order).
    counts : ndarray, shape (|H_n|,)
        ``m(s, n)`` for each element.
    """
    coset, free = project_many(_window(n, G.d), G)
    return _unique_elements(coset, free)


def count_coset_points(s: HElement, n: int, G: GroupStructure) -> int:
    """``m(s, n) = |[-n, n]^d  cap  (embed(s) + K)|`` by enumerating ``lambda``."""
    if n < 0:
        return 0
    x = embed(s, G)
    if G.kernel_rank == 0:
        return int(np.abs(x).max(initial=0) <= n)
    ranges = _kernel_box(x, G, n)
    if any(len(r) == 0 for r in ranges):
        return 0
    lams = np.array(list(itertools.product(*ranges)), dtype=np.int64)
    pts = x[None, :] + lams @ G.V.T
    return int(np.count_nonzero(np.abs(pts).max(axis=1) <= n))


def as_elements(rows: Iterable[Sequence[int]]) -> list[HElement]:
    return [HElement(int(r[0]), tuple(int(x) for x in r[1:])) for r in rows]
