"""Network topologies, Laplacians and their spectra.

Conventions: an edge ``(source, target)`` is a link from `source` to
`target`, so ``A[target, source] = 1``. The Laplacian is ``L = D_in - A``
with ``D_in`` the in-degree diagonal; its rows sum to zero. Undirected
networks store both orientations of every edge.

Random generators use numpy's PCG64 bit generator seeded with the 64-bit
seed stored on the returned :class:`Network`.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import InvalidInputError, NumericalError

__all__ = [
    "Network",
    "LaplacianSpectrum",
    "REGULAR_KINDS",
    "gen_regular",
    "gen_directed_ring",
    "gen_er",
    "gen_ba",
    "laplacian_spectrum",
    "spectral_radius",
    "sparse_laplacian",
    "is_connected",
    "read_edgelist",
    "write_edgelist",
]

REGULAR_KINDS = ("complete", "undirected_ring", "star", "path")
DIAGONALIZABLE_COND = 1e8
LARGE_GRAPH_WARNING = 8192
SPARSE_MIN_N = 256


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass(frozen=True)
class Network:
    n: int
    edges: tuple[tuple[int, int], ...]
    directed: bool = False
    seed: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.n < 2:
            raise InvalidInputError(f"a network needs n >= 2 nodes, got {self.n}")
        seen = set()
        for s, t in self.edges:
            if not (0 <= s < self.n and 0 <= t < self.n):
                raise InvalidInputError(f"edge ({s}, {t}) out of range for n={self.n}")
            if s == t:
                raise InvalidInputError(f"self-loop at node {s}")
            if (s, t) in seen:
                raise InvalidInputError(f"duplicate edge ({s}, {t})")
            seen.add((s, t))
        if not self.directed:
            for s, t in self.edges:
                if (t, s) not in seen:
                    raise InvalidInputError(f"undirected network missing reverse of ({s}, {t})")

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]], directed: bool = False,
                   seed: int | None = None, name: str = "") -> "Network":
        """Build a network, adding reverse edges when undirected."""
        out = set()
        for s, t in pairs:
            s, t = int(s), int(t)
            out.add((s, t))
            if not directed:
                out.add((t, s))
        return cls(n, tuple(sorted(out)), directed, seed, name)

    @property
    def edge_array(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=np.int64)
        e = self.edge_array
        A[e[:, 1], e[:, 0]] = 1
        return A

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_array[:, 1], minlength=self.n)

    def laplacian(self) -> np.ndarray:
        """Integer Laplacian D_in - A (rows sum to exactly zero)."""
        A = self.adjacency()
        return np.diag(A.sum(axis=1)) - A

    @property
    def g_max(self) -> int:
        return int(self.in_degrees().max())


@dataclass
class LaplacianSpectrum:
    eigenvalues: np.ndarray  # complex, ascending modulus
    rho_L: float
    g_max: int
    diagonalizable: bool
    directed: bool = False
    condition: float = 1.0
    max_residual: float = 0.0

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def zero_tolerance(self) -> float:
        return 1e-9 * max(1.0, self.rho_L)

    def nontrivial(self) -> np.ndarray:
        """Eigenvalues with the single smallest-modulus (zero) one removed."""
        return self.eigenvalues[1:]

    def n_zero(self) -> int:
        return int(np.sum(np.abs(self.eigenvalues) <= self.zero_tolerance()))

    def scaled(self, factor: float) -> "LaplacianSpectrum":
        """Spectrum of factor * L; used to reason about coupling rescalings."""
        return LaplacianSpectrum(self.eigenvalues * factor, self.rho_L * abs(factor),
                                 self.g_max, self.diagonalizable, self.directed,
                                 self.condition, self.max_residual)


def gen_regular(kind: str, n: int) -> Network:
    if kind not in REGULAR_KINDS:
        raise InvalidInputError(f"unknown regular graph kind {kind!r}; choose from {REGULAR_KINDS}")
    if n < 2 or (kind == "star" and n < 3) or (kind == "undirected_ring" and n < 3):
        raise InvalidInputError(f"{kind} graph needs more nodes than n={n}")
    if kind == "complete":
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    elif kind == "undirected_ring":
        pairs = [(i, (i + 1) % n) for i in range(n)]
    elif kind == "star":
        pairs = [(0, j) for j in range(1, n)]
    else:
        pairs = [(i, i + 1) for i in range(n - 1)]
    return Network.from_pairs(n, pairs, directed=False, name=f"{kind}{n}")


def gen_directed_ring(n: int) -> Network:
    if n < 2:
        raise InvalidInputError(f"directed ring needs n >= 2, got {n}")
    return Network.from_pairs(n, [(i, (i + 1) % n) for i in range(n)], directed=True,
                              name=f"directed_ring{n}")


def gen_er(n: int, p: float, seed: int) -> Network:
    """Erdos-Renyi G(n, p): every unordered pair joined independently with probability p."""
    if n < 2:
        raise InvalidInputError(f"ER graph needs n >= 2, got {n}")
    if not 0.0 < p < 1.0:
        raise InvalidInputError(f"ER edge probability must lie in (0, 1), got {p}")
    rng = make_rng(seed)
    pairs = []
    for i in range(n - 1):
        hit = np.flatnonzero(rng.random(n - i - 1) < p)
        pairs.extend((i, i + 1 + int(j)) for j in hit)
    return Network.from_pairs(n, pairs, directed=False, seed=int(seed), name=f"er{n}")


def gen_ba(n: int, seed: int) -> Network:
    """Preferential-attachment tree: start from one edge, each new node attaches once.

    The target is drawn with probability proportional to its current degree
    by sampling uniformly from the list of edge endpoints.
    """
    if n < 2:
        raise InvalidInputError(f"BA graph needs n >= 2, got {n}")
    rng = make_rng(seed)
    endpoints = np.empty(2 * (n - 1), dtype=np.int64)
    endpoints[0], endpoints[1] = 0, 1
    pairs = [(0, 1)]
    for new in range(2, n):
        used = 2 * (new - 1)
        target = int(endpoints[rng.integers(used)])
        pairs.append((target, new))
        endpoints[used], endpoints[used + 1] = target, new
    return Network.from_pairs(n, pairs, directed=False, seed=int(seed), name=f"ba{n}")


def _order_by_modulus(vals: np.ndarray) -> np.ndarray:
    return np.lexsort((vals.imag, vals.real, np.round(np.abs(vals), 12)))


def laplacian_spectrum(net: Network, vectors: bool = True) -> LaplacianSpectrum:
    """Eigen-decomposition of the network Laplacian.

    Undirected graphs use the symmetric solver; directed graphs use the
    general solver and are flagged non-diagonalizable when the eigenvector
    matrix has condition number >= 1e8. With ``vectors=False`` only
    eigenvalues of an undirected graph are computed (no residual check).
    """
    L = net.laplacian().astype(float)
    if not net.directed:
        if vectors:
            w, V = np.linalg.eigh(L)
            resid = np.linalg.norm(L @ V - V * w, axis=0).max()
        else:
            w = np.linalg.eigvalsh(L)
            resid = 0.0
        vals = w.astype(complex)
        cond = 1.0
        diag = True
    else:
        w, V = np.linalg.eig(L)
        resid = float(np.linalg.norm(L @ V - V * w, axis=0).max())
        cond = float(np.linalg.cond(V))
        diag = bool(np.isfinite(cond) and cond < DIAGONALIZABLE_COND)
        vals = w.astype(complex)
    vals = vals[_order_by_modulus(vals)]
    rho = float(np.abs(vals).max())
    rho_scale = max(1.0, rho)
    if resid > 1e-8 * rho_scale:
        raise NumericalError(f"Laplacian eigen-residual {resid:.3e} exceeds tolerance")
    return LaplacianSpectrum(vals, rho, net.g_max, diag, net.directed, cond, float(resid))


def sparse_laplacian(net: Network) -> scipy.sparse.csr_matrix:
    e = net.edge_array
    A = scipy.sparse.csr_matrix((np.ones(len(e)), (e[:, 1], e[:, 0])), shape=(net.n, net.n))
    return (scipy.sparse.diags(np.asarray(A.sum(axis=1)).ravel()) - A).tocsr()


def spectral_radius(net: Network) -> float:
    """Largest Laplacian eigenvalue of an undirected network.

    Small graphs use the dense symmetric solver; larger ones use Lanczos on
    the sparse Laplacian with a fixed start vector (reproducible), falling
    back to the dense solver if Lanczos does not converge.
    """
    if net.directed:
        return laplacian_spectrum(net).rho_L
    if net.n > SPARSE_MIN_N:
        v0 = make_rng(0).uniform(-1.0, 1.0, net.n)
        try:
            top = scipy.sparse.linalg.eigsh(sparse_laplacian(net), k=1, which="LA", v0=v0, tol=0,
                                            return_eigenvectors=False)
            return float(top[0])
        except scipy.sparse.linalg.ArpackNoConvergence:
            pass
    L = net.laplacian().astype(float)
    top = scipy.linalg.eigh(L, eigvals_only=True, subset_by_index=[net.n - 1, net.n - 1])
    return float(top[0])


def is_connected(net: Network) -> bool:
    """Spanning traversal; directed graphs are tested for weak connectivity."""
    adj: list[list[int]] = [[] for _ in range(net.n)]
    for s, t in net.edges:
        adj[s].append(t)
        adj[t].append(s)
    seen = [False] * net.n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count == net.n


def write_edgelist(net: Network, path) -> None:
    """Header ``n <count> directed <0|1>`` then one ``src dst`` pair per line.

    Undirected networks are written with each edge once (src < dst).
    """
    lines = [f"n {net.n} directed {int(net.directed)}"]
    for s, t in net.edges:
        if net.directed or s < t:
            lines.append(f"{s} {t}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path) -> Network:
    text = Path(path).read_text().splitlines()
    rows = [ln.split() for ln in text if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 4 or rows[0][0] != "n" or rows[0][2] != "directed":
        raise InvalidInputError(f"{path}: expected header 'n <count> directed <0|1>'")
    try:
        n = int(rows[0][1])
        directed = {"0": False, "1": True}[rows[0][3]]
        pairs = [(int(a), int(b)) for a, b in rows[1:]]
    except (ValueError, KeyError) as exc:
        raise InvalidInputError(f"{path}: malformed edge list ({exc})") from exc
    return Network.from_pairs(n, pairs, directed=directed, name=Path(path).stem)


def expected_ring_moduli(n: int) -> np.ndarray:
    """|1 - exp(2 pi i k / n)| for k = 0..n-1 (directed ring closed form)."""
    k = np.arange(n)
    return np.abs(1.0 - np.exp(2j * math.pi * k / n))
