"""Vietoris-Rips filtrations and persistence diagrams over the two-element field.

A filtration assigns every simplex the maximum pairwise distance of its
vertices (closed convention: the simplex is present for scales >= its
value) and orders simplices by (value, dimension, lexicographic vertices).
Homology in degrees 0..max_dim needs simplices up to dimension max_dim+1.

Diagrams are computed by the standard column reduction over GF(2), applied
to the anti-transposed boundary matrix (the coboundary blocks) with the
clearing optimization; degree 0 is handled by a union-find pass over the
edges.  Both choices change the work, not the result: the bar multiset is
identical to the one produced by reducing the boundary matrix directly,
and the test suite checks that against an independent rank oracle.
Classes still alive at the filtration cutoff t_max are capped at
t_max + r (r defaults to 2).  Zero-length bars are reduction artifacts:
recorded and serialized, but flagged so feature extraction skips them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numba as nb
import numpy as np

from .embed import PointCloud

__all__ = [
    "Simplex",
    "Filtration",
    "Bar",
    "PersistenceDiagram",
    "rips_filtration",
    "compute_persistence",
    "betti_at",
    "cap_infinite_bars",
    "diagrams_to_csv",
    "diagrams_from_csv",
]

DEFAULT_CAP_MARGIN = 2.0

# Full clique enumeration is O(n^(dim+1)); refuse instead of thrashing.
_MAX_SIMPLICES = 20_000_000


@dataclass(frozen=True)
class Simplex:
    """A simplex with its filtration value (max pairwise vertex distance)."""

    vertices: tuple[int, ...]
    value: float

    @property
    def dimension(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True)
class Bar:
    """One persistence interval [birth, death); capped bars hit the cutoff."""

    dim: int
    birth: float
    death: float
    capped: bool = False

    @property
    def length(self) -> float:
        return self.death - self.birth


@dataclass(frozen=True)
class PersistenceDiagram:
    """Multiset of bars plus the cutoff (t_max) and cap margin (r) used.

    Bars are held in parallel arrays sorted by (dim, birth, death, capped);
    window-sized clouds produce thousands of zero-length artifact bars, so
    per-bar objects are materialized only on access.
    """

    dims: np.ndarray
    births: np.ndarray
    deaths: np.ndarray
    capped_flags: np.ndarray
    t_max: float
    r: float
    n_points: int
    max_dim: int

    @property
    def bars(self) -> tuple[Bar, ...]:
        return tuple(
            Bar(int(d), float(b), float(dth), bool(c))
            for d, b, dth, c in zip(
                self.dims, self.births, self.deaths, self.capped_flags
            )
        )

    def __len__(self) -> int:
        return self.dims.size

    def in_dim(self, dim: int, include_zero: bool = False) -> list[Bar]:
        """Bars of one homology degree; zero-length bars are excluded
        unless asked for."""
        mask = self.dims == dim
        if not include_zero:
            mask &= self.deaths > self.births
        return [
            Bar(dim, float(b), float(d), bool(c))
            for b, d, c in zip(
                self.births[mask], self.deaths[mask], self.capped_flags[mask]
            )
        ]


def _make_diagram(
    dims, births, deaths, capped, t_max: float, r: float, n_points: int, max_dim: int
) -> PersistenceDiagram:
    dims = np.asarray(dims, dtype=np.int8)
    births = np.asarray(births, dtype=float)
    deaths = np.asarray(deaths, dtype=float)
    capped = np.asarray(capped, dtype=bool)
    order = np.lexsort((capped, deaths, births, dims))
    arrays = (dims[order], births[order], deaths[order], capped[order])
    for a in arrays:
        a.flags.writeable = False
    return PersistenceDiagram(
        dims=arrays[0],
        births=arrays[1],
        deaths=arrays[2],
        capped_flags=arrays[3],
        t_max=float(t_max),
        r=float(r),
        n_points=n_points,
        max_dim=max_dim,
    )


@dataclass(frozen=True)
class Filtration:
    """Rips filtration stored columnwise: one vertex/value array per dimension.

    ``simplex_arrays[d]`` has shape (m_d, d+1) with each row sorted
    ascending; rows are ordered by (value, lexicographic vertices), which
    together with increasing d realizes the global (value, dimension, lex)
    order.  Arrays are read-only.
    """

    n_points: int
    max_dim: int
    max_eps: float
    simplex_arrays: tuple[np.ndarray, ...]
    value_arrays: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return sum(v.size for v in self.value_arrays)

    @property
    def simplices(self) -> list[Simplex]:
        """All simplices in global filtration order.

        Materializes Python objects; meant for inspection and tests, not
        for iterating window-sized filtrations in hot loops.
        """
        items = []
        for verts, vals in zip(self.simplex_arrays, self.value_arrays):
            for row, val in zip(verts, vals):
                items.append(Simplex(tuple(int(v) for v in row), float(val)))
        items.sort(key=lambda s: (s.value, s.dimension, s.vertices))
        return items


def _distance_matrix(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff * diff).sum(-1))


@lru_cache(maxsize=64)
def _combination_table(n: int, k: int) -> np.ndarray:
    """All k-subsets of range(n), lexicographic, shape (C(n,k), k)."""
    count = math.comb(n, k)
    if count > _MAX_SIMPLICES:
        raise ValueError(
            f"refusing to enumerate {count} {k - 1}-simplices on {n} points; "
            "reduce the cloud (sample_stride) or max_dim"
        )
    if k == 1:
        table = np.arange(n, dtype=np.int32)[:, None]
    elif k == 2:
        a, b = np.triu_indices(n, k=1)
        table = np.stack([a, b], axis=1).astype(np.int32)
    else:
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.combinations(range(n), k)),
            dtype=np.int32,
            count=count * k,
        )
        table = flat.reshape(count, k)
    table.flags.writeable = False
    return table


def _simplex_values(dist: np.ndarray, verts: np.ndarray) -> np.ndarray:
    vals = np.zeros(verts.shape[0])
    width = verts.shape[1]
    for i in range(width):
        for j in range(i + 1, width):
            np.maximum(vals, dist[verts[:, i], verts[:, j]], out=vals)
    return vals


def _stable_value_order(vals: np.ndarray) -> np.ndarray:
    # distances are non-negative, so their IEEE bit patterns sort like the
    # floats and a radix sort applies; stability keeps lexicographic ties
    return np.argsort(vals.view(np.uint64), kind="stable")


def _as_points(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=float)
    if pts.ndim != 2 or pts.size == 0:
        raise ValueError("cloud must be a nonempty (m, d) array of points")
    return pts


def rips_filtration(cloud, max_eps: float | None = None, max_dim: int = 1) -> Filtration:
    """Build the Vietoris-Rips filtration of a point cloud.

    Contains every simplex of dimension <= max_dim + 1 whose value (max
    pairwise vertex distance) is <= max_eps.  ``max_eps=None`` uses the
    cloud's maximum pairwise distance, i.e. the full filtration.
    """
    pts = _as_points(cloud)
    n = pts.shape[0]
    if n == 0:
        raise ValueError("cannot build a filtration on an empty cloud")
    if max_dim < 0:
        raise ValueError("max_dim must be >= 0")
    dist = _distance_matrix(pts)
    if max_eps is None:
        max_eps = float(dist.max())
    else:
        max_eps = float(max_eps)
        if max_eps <= 0:
            raise ValueError("max_eps must be positive")

    simplex_arrays = []
    value_arrays = []
    for d in range(max_dim + 2):
        if d == 0:
            verts = _combination_table(n, 1).copy()
            vals = np.zeros(n)
        elif n < d + 1:
            verts = np.empty((0, d + 1), dtype=np.int32)
            vals = np.empty(0)
        else:
            table = _combination_table(n, d + 1)
            vals = _simplex_values(dist, table)
            keep = vals <= max_eps
            if not keep.all():
                table = table[keep]
                vals = vals[keep]
            order = _stable_value_order(vals)
            verts = table[order]
            vals = vals[order]
        verts.flags.writeable = False
        vals.flags.writeable = False
        simplex_arrays.append(verts)
        value_arrays.append(vals)
    return Filtration(
        n_points=n,
        max_dim=max_dim,
        max_eps=max_eps,
        simplex_arrays=tuple(simplex_arrays),
        value_arrays=tuple(value_arrays),
    )


@nb.njit(cache=True, nogil=True)
def _merge_edges(n_points: int, edge_a: np.ndarray, edge_b: np.ndarray):
    """Kruskal pass over edges in filtration order.

    Returns a bool array marking edges that merge two components (the
    negative edges); the rest create cycles.
    """
    parent = np.arange(n_points)
    rank = np.zeros(n_points, np.int64)
    merged = np.zeros(edge_a.size, np.bool_)
    for e in range(edge_a.size):
        ra = edge_a[e]
        while parent[ra] != ra:
            parent[ra] = parent[parent[ra]]
            ra = parent[ra]
        rb = edge_b[e]
        while parent[rb] != rb:
            parent[rb] = parent[parent[rb]]
            rb = parent[rb]
        if ra != rb:
            merged[e] = True
            if rank[ra] < rank[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            if rank[ra] == rank[rb]:
                rank[ra] += 1
    return merged


@nb.njit(cache=True, nogil=True)
def _coboundary_csr(cof_verts: np.ndarray, pos_of_face_rank: np.ndarray, n_k: int, binom: np.ndarray):
    """Sparse coboundary columns of the k-simplices, built by scattering
    every (k+1)-simplex into its k+2 faces.

    Column j belongs to the k-simplex processed j-th (reversed filtration
    order); its entries are cofacet indices in reversed filtration order,
    ascending.  Faces are located by colexicographic rank; a valid
    filtration contains every face of its simplices (clique property),
    and a miss returns the sentinel (indptr=[-1], empty rows).
    """
    n_cof, width1 = cof_verts.shape
    counts = np.zeros(n_k + 1, np.int64)
    face_cols = np.empty((n_cof, width1), np.int32)
    pre = np.empty(width1 + 1, np.int64)
    suf = np.empty(width1 + 1, np.int64)
    for p in range(n_cof):
        pre[0] = 0
        for t in range(width1):
            pre[t + 1] = pre[t] + binom[cof_verts[p, t], t + 1]
        suf[width1] = 0
        for t in range(width1 - 1, -1, -1):
            suf[t] = suf[t + 1] + binom[cof_verts[p, t], t]
        for t in range(width1):
            # dropping vertex t shifts the later vertices down one slot
            pos = pos_of_face_rank[pre[t] + suf[t + 1]]
            if pos < 0:
                # face missing from the filtration: contract violation
                return np.full(1, -1, np.int64), np.empty(0, np.int32)
            col = n_k - 1 - pos
            face_cols[p, t] = col
            counts[col + 1] += 1
    indptr = counts
    for i in range(1, n_k + 1):
        indptr[i] += indptr[i - 1]
    rows = np.empty(indptr[n_k], np.int32)
    fill = indptr[:n_k].copy()
    # descending p makes the reversed row index ascend within each column
    for p in range(n_cof - 1, -1, -1):
        row = n_cof - 1 - p
        for t in range(width1):
            col = face_cols[p, t]
            rows[fill[col]] = row
            fill[col] += 1
    return indptr, rows


@nb.njit(cache=True, nogil=True)
def _reduce_gf2(indptr: np.ndarray, rows: np.ndarray, n_rows: int, skip: np.ndarray):
    """Standard left-to-right GF(2) column reduction on sparse columns.

    Columns flagged in ``skip`` are cleared (known to reduce to zero).
    Returns the pivot row of each column, -1 where the column vanishes.
    """
    n_cols = indptr.size - 1
    pivots = np.full(n_cols, -1, np.int64)
    owner = np.full(n_rows, -1, np.int64)
    col_start = np.zeros(n_cols, np.int64)
    col_end = np.zeros(n_cols, np.int64)
    store = np.empty(max(64, rows.size * 2), np.int32)
    used = 0
    buf = np.empty(max(1, n_rows), np.int32)
    tmp = np.empty(max(1, n_rows), np.int32)
    for j in range(n_cols):
        if skip[j]:
            continue
        blen = indptr[j + 1] - indptr[j]
        for i in range(blen):
            buf[i] = rows[indptr[j] + i]
        while blen > 0:
            low = buf[blen - 1]
            k = owner[low]
            if k < 0:
                break
            # symmetric difference with the stored column owning this pivot
            a = 0
            b = col_start[k]
            b_end = col_end[k]
            n_out = 0
            while a < blen and b < b_end:
                va = buf[a]
                vb = store[b]
                if va < vb:
                    tmp[n_out] = va
                    n_out += 1
                    a += 1
                elif vb < va:
                    tmp[n_out] = vb
                    n_out += 1
                    b += 1
                else:
                    a += 1
                    b += 1
            while a < blen:
                tmp[n_out] = buf[a]
                n_out += 1
                a += 1
            while b < b_end:
                tmp[n_out] = store[b]
                n_out += 1
                b += 1
            swap = buf
            buf = tmp
            tmp = swap
            blen = n_out
        if blen > 0:
            low = buf[blen - 1]
            pivots[j] = low
            owner[low] = j
            if used + blen > store.size:
                grown = np.empty(max(store.size * 2, used + blen), np.int32)
                grown[:used] = store[:used]
                store = grown
            col_start[j] = used
            for i in range(blen):
                store[used + i] = buf[i]
            used += blen
            col_end[j] = used
    return pivots


@lru_cache(maxsize=64)
def _binom_table(n: int, max_m: int) -> np.ndarray:
    table = np.zeros((n + 1, max_m + 1), dtype=np.int64)
    for v in range(n + 1):
        for m_ in range(max_m + 1):
            table[v, m_] = math.comb(v, m_)
    table.flags.writeable = False
    return table


def compute_persistence(filtration: Filtration) -> PersistenceDiagram:
    """Persistence diagram of a filtration in degrees 0..max_dim.

    Degree-0 bars come from the union-find pass (every vertex births a
    component at 0; merging edges kill one each).  For degree k >= 1 the
    coboundary block of the k-simplices is reduced; a pivot pairs a
    k-simplex birth with its killing (k+1)-simplex, an unpaired positive
    column is a class alive at t_max and gets capped at t_max + r.
    Zero-length bars (birth == death) are recorded but flagged.
    """
    n = filtration.n_points
    t_max = filtration.max_eps
    r = DEFAULT_CAP_MARGIN
    for verts in filtration.simplex_arrays:
        if verts.size and (verts.min() < 0 or verts.max() >= n):
            raise ValueError("filtration contains vertex ids outside [0, n_points)")
    dims: list[np.ndarray] = []
    births: list[np.ndarray] = []
    deaths: list[np.ndarray] = []
    capped: list[np.ndarray] = []

    def emit(dim, birth_arr, death_arr, capped_flag):
        count = len(birth_arr)
        dims.append(np.full(count, dim, dtype=np.int8))
        births.append(np.asarray(birth_arr, dtype=float))
        deaths.append(np.asarray(death_arr, dtype=float))
        capped.append(np.full(count, capped_flag, dtype=bool))

    edges = filtration.simplex_arrays[1]
    edge_vals = filtration.value_arrays[1]
    merged = _merge_edges(
        n, np.ascontiguousarray(edges[:, 0]), np.ascontiguousarray(edges[:, 1])
    )
    merge_vals = edge_vals[merged]
    emit(0, np.zeros(merge_vals.size), merge_vals, False)
    n_components = n - int(merged.sum())
    emit(0, np.zeros(n_components), np.full(n_components, t_max + r), True)

    # cleared[k] marks k-simplices known to die as destroyers of (k-1)-cycles
    cleared = merged
    for k in range(1, filtration.max_dim + 1):
        verts = filtration.simplex_arrays[k]
        vals = filtration.value_arrays[k]
        cof_verts = filtration.simplex_arrays[k + 1]
        cof_vals = filtration.value_arrays[k + 1]
        m = verts.shape[0]
        n_cof = cof_verts.shape[0]
        if m == 0:
            cleared = np.zeros(0, dtype=bool)
            continue

        order = np.arange(m - 1, -1, -1)  # process in reversed filtration order
        skip = cleared[order]
        if n_cof == 0:
            pivots = np.full(m, -1, dtype=np.int64)
        else:
            binom = _binom_table(n, k + 2)
            k_ranks = np.zeros(m, dtype=np.int64)
            for t in range(k + 1):
                k_ranks += binom[verts[:, t], t + 1]
            pos_of_face_rank = np.full(math.comb(n, k + 1), -1, dtype=np.int32)
            pos_of_face_rank[k_ranks] = np.arange(m, dtype=np.int32)
            indptr, rows = _coboundary_csr(
                np.ascontiguousarray(cof_verts), pos_of_face_rank, m, binom
            )
            if indptr[0] < 0:
                raise ValueError(
                    "filtration is not face-closed: a simplex has a face "
                    "missing from the lower dimension"
                )
            pivots = _reduce_gf2(indptr, rows, n_cof, skip)

        processed = ~skip
        paired = processed & (pivots >= 0)
        unpaired = processed & (pivots < 0)
        death_pos = n_cof - 1 - pivots[paired]
        emit(k, vals[order[paired]], cof_vals[death_pos], False)
        emit(
            k,
            vals[order[unpaired]],
            np.full(int(unpaired.sum()), t_max + r),
            True,
        )
        next_cleared = np.zeros(n_cof, dtype=bool)
        next_cleared[death_pos] = True
        cleared = next_cleared

    return _make_diagram(
        np.concatenate(dims),
        np.concatenate(births),
        np.concatenate(deaths),
        np.concatenate(capped),
        t_max=t_max,
        r=r,
        n_points=n,
        max_dim=filtration.max_dim,
    )


def betti_at(diagram: PersistenceDiagram, eps: float) -> np.ndarray:
    """Betti numbers (degrees 0..max_dim) at one scale: bars with
    birth <= eps < death."""
    if not 0.0 <= eps <= diagram.t_max:
        raise ValueError(f"eps={eps} outside [0, t_max={diagram.t_max}]")
    counts = np.zeros(diagram.max_dim + 1, dtype=np.int64)
    alive = (diagram.births <= eps) & (eps < diagram.deaths)
    for k in range(diagram.max_dim + 1):
        counts[k] = int((alive & (diagram.dims == k)).sum())
    return counts


def cap_infinite_bars(
    diagram: PersistenceDiagram, t_max: float, r: float
) -> PersistenceDiagram:
    """Re-cap the still-alive classes at t_max + r; finite bars untouched."""
    if r <= 0:
        raise ValueError("cap margin r must be positive")
    deaths = diagram.deaths.copy()
    deaths[diagram.capped_flags] = t_max + r
    return _make_diagram(
        diagram.dims,
        diagram.births,
        deaths,
        diagram.capped_flags,
        t_max=float(t_max),
        r=float(r),
        n_points=diagram.n_points,
        max_dim=diagram.max_dim,
    )


def diagrams_to_csv(diagrams: list[PersistenceDiagram], path) -> None:
    """Write ``window_index,dim,birth,death,capped`` rows (capped as 0/1)."""
    with open(path, "w", newline="") as fh:
        fh.write("window_index,dim,birth,death,capped\n")
        for w_idx, diagram in enumerate(diagrams):
            fh.writelines(
                f"{w_idx},{d},{b:.17g},{dth:.17g},{int(c)}\n"
                for d, b, dth, c in zip(
                    diagram.dims, diagram.births, diagram.deaths, diagram.capped_flags
                )
            )


def diagrams_from_csv(path) -> list[PersistenceDiagram]:
    """Load diagrams written by :func:`diagrams_to_csv`.

    Bars round-trip exactly.  t_max and r are not part of the CSV (they
    live in the run manifest), so each loaded diagram reports
    t_max = max recorded death and r = 0.
    """
    import csv

    per_window: dict[int, list[tuple]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            per_window.setdefault(int(row["window_index"]), []).append(
                (
                    int(row["dim"]),
                    float(row["birth"]),
                    float(row["death"]),
                    bool(int(row["capped"])),
                )
            )
    if not per_window:
        raise ValueError(f"{path}: no bars")
    indices = sorted(per_window)
    if indices != list(range(len(indices))):
        raise ValueError(f"{path}: window indices are not contiguous from 0")
    diagrams = []
    for i in indices:
        rows = per_window[i]
        dims = np.array([r_[0] for r_ in rows], dtype=np.int8)
        births = np.array([r_[1] for r_ in rows])
        deaths = np.array([r_[2] for r_ in rows])
        capped = np.array([r_[3] for r_ in rows], dtype=bool)
        diagrams.append(
            _make_diagram(
                dims,
                births,
                deaths,
                capped,
                t_max=float(deaths.max()),
                r=0.0,
                n_points=int((dims == 0).sum()),
                max_dim=int(dims.max()),
            )
        )
    return diagrams
