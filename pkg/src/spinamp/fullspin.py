"""Full state-vector checks of the resonance rules on a handful of spins.

Both models live in the frame rotating with the bulk drive, where the
Hamiltonian is ``J sum sz_a sz_b + Omega sum sx_i`` over nearest-neighbour
bonds.  Flipping a spin up costs ``2 J S`` with ``S`` the sum of its
neighbours' ``sz``, so the bulk drive is resonant for ``S = 0`` only.

On the 2D grid an edge spin with one neighbour up and two down has
``S = -1``.  A second tone at ``2 J`` below the bulk drive addresses it; in
this frame that tone reads ``Omega (cos(2 J t) sx - sin(2 J t) sy)`` and is
kept time dependent.

The test spin is frozen and removed from the state vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .chain import _check_grid
from .errors import ConfigError, IntegratorError
from .lattice import CORNER, build_rule_hamiltonian, reachable_states

MAX_SPINS = 12


@dataclass(frozen=True)
class FullSpinState:
    """Amplitudes over ``2**n_spins`` basis states; bit ``i`` set means spin ``i`` up."""

    n_spins: int
    amps: np.ndarray

    def __post_init__(self):
        if not 0 <= self.n_spins <= MAX_SPINS:
            raise ConfigError(f"at most {MAX_SPINS} free spins, got {self.n_spins}")
        if self.amps.shape != (2 ** self.n_spins,):
            raise ConfigError("amplitude vector has the wrong length")
        if abs(float(np.vdot(self.amps, self.amps).real) - 1.0) > 1e-9:
            raise ConfigError("state is not normalised")


class _SpinModel:
    """Diagonal Ising energies and flip tables for spins on a graph.

    ``frozen`` maps site index to a fixed ``sz`` value; the other sites are
    the free spins, numbered in the order given.
    """

    def __init__(self, n_sites: int, bonds, frozen: dict[int, int], J: float):
        self.free = [s for s in range(n_sites) if s not in frozen]
        nf = len(self.free)
        if nf > MAX_SPINS:
            raise ConfigError(f"at most {MAX_SPINS} free spins, got {nf}")
        self.n_free = nf
        dim = 2 ** nf
        states = np.arange(dim)
        sz = np.empty((n_sites, dim))
        for s, v in frozen.items():
            sz[s] = v
        for i, s in enumerate(self.free):
            sz[s] = np.where(states >> i & 1, 1.0, -1.0)
        self.diag = J * sum(sz[a] * sz[b] for a, b in bonds)
        self.flip = [states ^ (1 << i) for i in range(nf)]
        self.is_up = [(states >> i & 1).astype(bool) for i in range(nf)]
        self.n_up = sum(u.astype(float) for u in self.is_up) if nf else np.zeros(1)

    @property
    def dim(self) -> int:
        return self.diag.size

    def static_hamiltonian(self, omega: float) -> np.ndarray:
        H = np.diag(self.diag).astype(float)
        cols = np.arange(self.dim)
        for f in self.flip:
            H[f, cols] += omega
        return H


@dataclass(frozen=True)
class LeakageSeries:
    """Population outside the rule subspace; ``subspace`` optionally holds
    the populations of the subspace states, one row per time."""

    times: np.ndarray
    leakage: np.ndarray
    subspace: np.ndarray | None = None

    def time_average(self) -> float:
        t, y = self.times, self.leakage
        if t.size < 2:
            return float(y[0])
        return float(np.trapezoid(y, t) / (t[-1] - t[0]))


def _check_params(J, omega, ratio_max=None):
    if not J > 0:
        raise ConfigError(f"J must be positive, got {J!r}")
    if not omega >= 0:
        raise ConfigError(f"omega must be >= 0, got {omega!r}")
    if ratio_max is not None and omega / J > ratio_max:
        raise ConfigError(f"Omega/J = {omega / J:g} exceeds {ratio_max}")


def rwa_validate_1d(n_spins: int, J: float, omega: float, t_grid) -> LeakageSeries:
    """Leakage out of the domain-wall states of an open chain.

    Spin 1 is frozen up and the rest start down.  The domain-wall states
    (first ``k`` spins up) are the 1D analogue of the partition states.
    """
    if not 2 <= n_spins <= 10:
        raise ConfigError(f"n_spins must lie in [2, 10], got {n_spins!r}")
    _check_params(J, omega, ratio_max=0.1)
    t = _check_grid(t_grid)
    model = _SpinModel(n_spins, [(i, i + 1) for i in range(n_spins - 1)], {0: 1}, J)
    walls = [(1 << k) - 1 for k in range(n_spins)]  # first k free spins up
    outside = np.ones(model.dim, bool)
    outside[walls] = False
    E, V = np.linalg.eigh(model.static_hamiltonian(omega))
    c0 = V[0].conj()  # all free spins down is index 0
    leak = np.empty(t.size)
    sub = np.empty((t.size, n_spins))
    for k, tk in enumerate(t):
        p = np.abs(V @ (np.exp(-1j * E * tk) * c0)) ** 2
        leak[k] = float(np.sum(p[outside]))
        sub[k] = p[walls]
    return LeakageSeries(t, leak, sub)


@dataclass(frozen=True)
class TwoToneResult:
    """Full two-tone dynamics against the rule Hamiltonian.

    ``leakage`` is the full-state population outside the reachable rule
    basis, ``rule_l1`` the L1 distance between full and rule populations
    (leakage included) and ``up_population`` the expected number of free
    spins up.
    """

    times: np.ndarray
    leakage: np.ndarray
    rule_l1: np.ndarray
    up_population: np.ndarray

    def as_leakage_series(self) -> LeakageSeries:
        return LeakageSeries(self.times, self.leakage)


#: Up-spin population (and subspace leakage) accepted as "no dynamics".
LEAKAGE_TOLERANCE = 0.05


def _grid_model(width, height, J, corner_up):
    if width < 1 or height < 1 or not 2 <= width * height <= MAX_SPINS + 1:
        raise ConfigError(f"grid {height}x{width} is outside 2 <= W*H <= {MAX_SPINS + 1}")

    def sid(r, c):
        return r * width + c

    bonds = [(sid(r, c), sid(r, c + 1)) for r in range(height) for c in range(width - 1)]
    bonds += [(sid(r, c), sid(r + 1, c)) for r in range(height - 1) for c in range(width)]
    model = _SpinModel(width * height, bonds, {sid(*CORNER): 1 if corner_up else -1}, J)
    return model, sid


def two_tone_states(width: int, height: int, J: float, omega: float, t_grid,
                    corner_up: bool = True, rtol: float = 1e-9,
                    second_tone: bool = True) -> np.ndarray:
    """Full state vectors (one column per grid time) from all free spins down."""
    _check_params(J, omega)
    t = _check_grid(t_grid)
    model, _ = _grid_model(width, height, J, corner_up)
    delta = 2.0 * J
    tone2 = 1.0 if second_tone else 0.0

    def rhs(tt, psi):
        out = model.diag * psi
        rot = tone2 * np.exp(1j * delta * tt)
        up_w, dn_w = omega * (1 + rot), omega * (1 + np.conj(rot))
        for f, up in zip(model.flip, model.is_up):
            out += np.where(up, up_w, dn_w) * psi[f]
        return -1j * out

    psi0 = np.zeros(model.dim, complex)
    psi0[0] = 1.0
    if omega == 0:
        return np.repeat(psi0[:, None], t.size, axis=1)
    sol = solve_ivp(rhs, (0.0, float(t[-1])), psi0, method="DOP853", t_eval=t,
                    rtol=rtol, atol=rtol * 1e-3)
    if not sol.success:
        raise IntegratorError(sol.message, float(sol.t[-1]) if sol.t.size else 0.0)
    return sol.y


def two_tone_validate_2d(width: int, height: int, J: float, omega: float, t_grid,
                         corner_up: bool = True, rtol: float = 1e-9,
                         second_tone: bool = True) -> TwoToneResult:
    """Evolve the full grid with both tones and compare with the rule engine."""
    t = _check_grid(t_grid)
    full = two_tone_states(width, height, J, omega, t, corner_up, rtol, second_tone)
    model, sid = _grid_model(width, height, J, corner_up)

    # rule side: basis states mapped onto full-state indices
    # the grid is a finite sample, so its far corners are resonant too
    basis = reachable_states(width, height, max_n=width * height, corner_up=corner_up,
                             allow_boundary=True, flip_corners=True)
    free_bit = {s: i for i, s in enumerate(model.free)}
    idx = np.array([sum(1 << free_bit[sid(*x)] for x in c.up if x != CORNER)
                    for c in basis.configs])
    if len(basis) > 1 and omega > 0:
        Hr = build_rule_hamiltonian(basis, omega).matrix.toarray()
        E, V = np.linalg.eigh(Hr)
        rule = V @ (np.exp(-1j * np.outer(E, t)) * V[0].conj()[:, None])
    else:
        rule = np.zeros((len(basis), t.size), complex)
        rule[0] = 1.0

    p_full = np.abs(full) ** 2
    p_sub = p_full[idx]
    outside = np.ones(model.dim, bool)
    outside[idx] = False
    leak = p_full[outside].sum(axis=0)
    l1 = np.abs(p_sub - np.abs(rule) ** 2).sum(axis=0) + leak
    up = model.n_up @ p_full
    return TwoToneResult(t, leak, l1, up)
