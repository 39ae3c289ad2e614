"""Explicit 2D configurations under the resonance rules.

Sites are ``(row, col)`` with the test spin at ``(0, 0)``.  Whether a site may
flip depends only on its nearest neighbours: two of four up in the body and
one of three on an edge.  The test spin itself never flips.

A finite grid also has far corners with two neighbours.  They have no
counterpart in the one-corner geometry and stay frozen by default; with
``flip_corners=True`` they flip with one neighbour up, which is the resonance
condition of a finite physical sample.

These brute-force objects check the reduced descriptions in ``young`` and
``chain``: the reachable configurations are staircases labelled by
partitions, the number of monotone flip paths to a staircase is its Young
weight, and a Lanczos sweep started from the single-box state recovers the
``Omega * sqrt(k + 1)`` hops.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import BoundaryTouchError, ConfigError, NumericalBreakdownError
from .young import Partition

CORNER = (0, 0)


@dataclass(frozen=True)
class LatticeConfig:
    """Spin configuration on a ``height x width`` grid.

    Parameters
    ----------
    width, height : int
        Grid size. Columns run along ``width``.
    up : frozenset of (row, col)
        Sites whose spin is up.
    """

    width: int
    height: int
    up: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        for name in ("width", "height"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        up = frozenset((int(r), int(c)) for r, c in self.up)
        for r, c in up:
            if not (0 <= r < self.height and 0 <= c < self.width):
                raise ConfigError(f"site {(r, c)} outside {self.height}x{self.width} grid")
        object.__setattr__(self, "up", up)

    @classmethod
    def corner_only(cls, width: int, height: int, corner_up: bool = True) -> "LatticeConfig":
        return cls(width, height, frozenset({CORNER}) if corner_up else frozenset())

    @classmethod
    def from_grid(cls, grid) -> "LatticeConfig":
        g = np.asarray(grid, dtype=bool)
        if g.ndim != 2:
            raise ConfigError("grid must be two-dimensional")
        rows, cols = np.nonzero(g)
        return cls(g.shape[1], g.shape[0], frozenset(zip(rows.tolist(), cols.tolist())))

    @classmethod
    def from_partition(cls, lam: Partition, width: int, height: int) -> "LatticeConfig":
        """Staircase whose column ``j`` holds ``lam[j]`` up spins from the top."""
        return cls(width, height, frozenset((r, j) for j, h in enumerate(lam) for r in range(h)))

    @property
    def grid(self) -> np.ndarray:
        g = np.zeros((self.height, self.width), dtype=bool)
        for r, c in self.up:
            g[r, c] = True
        return g

    @property
    def n_up(self) -> int:
        return len(self.up)

    @property
    def corner_up(self) -> bool:
        return CORNER in self.up

    def flipped(self, site) -> "LatticeConfig":
        if tuple(site) == CORNER:
            raise ConfigError("the test spin is frozen")
        return LatticeConfig(self.width, self.height, self.up ^ {tuple(site)})

    def neighbours(self, site):
        r, c = site
        for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= rr < self.height and 0 <= cc < self.width:
                yield rr, cc

    def touches_far_boundary(self) -> bool:
        return any(r == self.height - 1 or c == self.width - 1 for r, c in self.up)

    def bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.grid.ravel())


def is_flippable(config: LatticeConfig, site, flip_corners: bool = False) -> bool:
    site = tuple(site)
    if site == CORNER:
        return False
    nbrs = list(config.neighbours(site))
    ups = sum(1 for s in nbrs if s in config.up)
    # 2 of 4 in the body, 1 of 3 on an edge, optionally 1 of 2 at a far corner
    if len(nbrs) == 2 and not flip_corners:
        return False
    return len(nbrs) > 1 and ups == len(nbrs) // 2


def allowed_flips(config: LatticeConfig, flip_corners: bool = False) -> list[tuple[int, int]]:
    """Every site whose flip is resonant, in row-major order."""
    return [
        (r, c)
        for r in range(config.height)
        for c in range(config.width)
        if is_flippable(config, (r, c), flip_corners)
    ]


def config_partition(config: LatticeConfig) -> Partition | None:
    """Column heights of a corner staircase, or ``None`` for any other shape."""
    g = config.grid
    heights = []
    for j in range(config.width):
        col = g[:, j]
        h = int(col.sum())
        if h and not col[:h].all():
            return None
        heights.append(h)
    while heights and heights[-1] == 0:
        heights.pop()
    if any(h == 0 for h in heights) or any(a < b for a, b in zip(heights, heights[1:])):
        return None
    return Partition(tuple(heights))


@dataclass
class ReachableBasis:
    """Breadth-first closure from the corner, ordered by level then discovery.

    ``path_counts[i]`` is the number of flip sequences that reach ``configs[i]``
    from the seed while raising the up count by one at every step.
    """

    configs: list[LatticeConfig]
    path_counts: list[int]
    flip_corners: bool = False

    def __post_init__(self):
        self.index = {c: i for i, c in enumerate(self.configs)}

    def __len__(self) -> int:
        return len(self.configs)

    def levels(self) -> dict[int, list[LatticeConfig]]:
        out: dict[int, list[LatticeConfig]] = {}
        for c in self.configs:
            out.setdefault(c.n_up, []).append(c)
        return out

    def level_sizes(self) -> list[int]:
        lv = self.levels()
        return [len(lv[k]) for k in sorted(lv)]

    def dump(self) -> str:
        """One line per configuration: row-major bitstring and partition label."""
        lines = []
        for c in self.configs:
            lam = config_partition(c)
            label = "-" if lam is None else (str(lam) or "0")
            lines.append(f"{c.bitstring()}\t{label}")
        return "\n".join(lines) + "\n"


def _near_far_edge(config: LatticeConfig) -> bool:
    # a staircase reaching the second-to-last row or column has a child in
    # the last one, where the one-corner picture no longer holds
    return any(r >= config.height - 2 or c >= config.width - 2 for r, c in config.up)


def reachable_states(width: int, height: int, max_n: int, corner_up: bool = True,
                     allow_boundary: bool = False,
                     flip_corners: bool = False) -> ReachableBasis:
    """Configurations reachable from the corner state with at most ``max_n`` up spins.

    ``max_n`` counts the test spin, so level ``n`` holds the staircases of
    ``n`` boxes.  If growth below ``max_n`` would reach the last row or column,
    the one-corner picture breaks and :class:`BoundaryTouchError` is raised
    unless ``allow_boundary`` is set (used for exact comparisons on tiny
    grids).
    """
    if isinstance(max_n, bool) or int(max_n) != max_n or max_n < 1:
        raise ConfigError(f"max_n must be a positive integer, got {max_n!r}")
    seed = LatticeConfig.corner_only(width, height, corner_up)
    configs = [seed]
    counts = {seed: 1}
    seen = {seed}
    queue = deque([seed])
    while queue:
        cur = queue.popleft()
        if not allow_boundary and cur.n_up < max_n and _near_far_edge(cur):
            raise BoundaryTouchError(
                f"level {cur.n_up + 1} would need the edge of the {height}x{width} grid")
        for site in allowed_flips(cur, flip_corners):
            nxt = cur.flipped(site)
            if nxt.n_up > max_n:
                continue
            if nxt.n_up > cur.n_up:
                counts[nxt] = counts.get(nxt, 0) + counts.get(cur, 0)
            if nxt in seen:
                continue
            if not allow_boundary and nxt.touches_far_boundary():
                raise BoundaryTouchError(
                    f"level {nxt.n_up} reaches the edge of the {height}x{width} grid")
            seen.add(nxt)
            configs.append(nxt)
            queue.append(nxt)
    # levels come out in order when every state is reached by growth alone;
    # the stable sort keeps the basis grouped by level on bounded grids too
    order = sorted(range(len(configs)), key=lambda i: configs[i].n_up)
    configs = [configs[i] for i in order]
    return ReachableBasis(configs, [counts.get(c, 0) for c in configs], flip_corners)


@dataclass
class RuleHamiltonian:
    """``Omega`` times the adjacency matrix of the flip graph on ``basis``."""

    basis: ReachableBasis
    omega: float
    matrix: sp.csr_matrix

    @property
    def dim(self) -> int:
        return len(self.basis)


def build_rule_hamiltonian(basis: ReachableBasis, omega: float = 1.0) -> RuleHamiltonian:
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega!r}")
    rows, cols = [], []
    for i, c in enumerate(basis.configs):
        for site in allowed_flips(c, basis.flip_corners):
            j = basis.index.get(c.flipped(site))
            if j is not None:
                rows.append(i)
                cols.append(j)
    n = len(basis)
    M = sp.csr_matrix((np.full(len(rows), float(omega)), (rows, cols)), shape=(n, n))
    return RuleHamiltonian(basis, float(omega), M)


def tridiagonalize_from_seed(H: RuleHamiltonian, seed: LatticeConfig | None = None,
                             steps: int | None = None, ortho_tol: float = 1e-10):
    """Lanczos with full reorthogonalisation started from ``seed``.

    Returns ``(alphas, betas)`` where ``betas[k]`` links Krylov vectors ``k``
    and ``k + 1``.  Iteration stops early if the Krylov space is exhausted.
    """
    seed = seed if seed is not None else H.basis.configs[0]
    i0 = H.basis.index.get(seed)
    if i0 is None:
        raise ConfigError("seed configuration is not in the basis")
    n = H.dim
    steps = n if steps is None else min(int(steps), n)
    Q = np.zeros((n, steps))
    Q[i0, 0] = 1.0
    alphas, betas = [], []
    A = H.matrix
    for k in range(steps):
        w = A @ Q[:, k]
        alphas.append(float(Q[:, k] @ w))
        for _ in range(2):  # classical Gram-Schmidt, twice
            w -= Q[:, : k + 1] @ (Q[:, : k + 1].T @ w)
        beta = float(np.linalg.norm(w))
        if k + 1 == steps or beta < 1e-12 * max(1.0, H.omega):
            break
        betas.append(beta)
        Q[:, k + 1] = w / beta
    m = len(alphas)
    G = Q[:, :m].T @ Q[:, :m]
    loss = float(np.max(np.abs(G - np.eye(m))))
    if loss > ortho_tol:
        raise NumericalBreakdownError(f"Lanczos lost orthogonality ({loss:.2e})")
    return np.array(alphas), np.array(betas)
