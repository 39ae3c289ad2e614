"""Collective dephasing on the number-state chain.

The noise operator ``L = sum_n n |n><n|`` damps the coherence between
``|n>`` and ``|m>`` at rate ``Gamma (n - m)**2``, so neighbouring states lose
phase at rate ``Gamma``::

    d rho/dt = -i [H, rho] + Gamma (2 L rho L - L^2 rho - rho L^2) / 2 * 2

which element-wise reads ``d rho_nm/dt = -i [H, rho]_nm - Gamma (n-m)^2 rho_nm``.
The overall factor 2 sets the nearest-neighbour coherence decay to ``Gamma``.
When ``Gamma`` dominates the hops ``g_n`` the coherences follow the
populations adiabatically and the populations obey a classical master
equation with symmetric rates ``2 g_n^2 / Gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .chain import (
    GUARD,
    Dimension,
    LEAKAGE_TOL,
    ChainSpec,
    PolarisationSeries,
    _check_grid,
    default_t_max,
    _check_tol,
)
from .errors import ConfigError, IntegratorError


@dataclass(frozen=True)
class DephasingSpec:
    chain: ChainSpec
    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0 or not math.isfinite(self.gamma):
            raise ConfigError(f"gamma must be finite and >= 0, got {self.gamma!r}")

    @property
    def noise_op(self) -> np.ndarray:
        """Diagonal of ``L`` in the number basis."""
        return np.arange(1, self.chain.length + 1, dtype=float)

    def decay_rates(self) -> np.ndarray:
        """``Gamma (n - m)^2`` for every pair of sites."""
        L = self.noise_op
        return self.gamma * (L[:, None] - L[None, :]) ** 2


@dataclass(frozen=True)
class DensityMatrix:
    rho: np.ndarray
    time: float

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()

    def trace_error(self) -> float:
        return abs(float(np.real(np.trace(self.rho))) - 1.0)

    def mean_n(self) -> float:
        return float(np.arange(1, self.rho.shape[0] + 1) @ self.populations)

    def leakage(self, guard: int = GUARD) -> float:
        return float(np.sum(self.populations[-guard:]))


def _phi_functions(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``exp(z)`` and ``phi_1..phi_3`` for real ``z <= 0``."""
    z = np.asarray(z, float)
    ez = np.exp(z)
    phi = [None, None, None]
    small = np.abs(z) < 1.0
    # Taylor series where the closed forms cancel: phi_k = sum z^j / (j+k)!
    zs = z[small]
    for k in (1, 2, 3):
        out = np.empty_like(z)
        term = np.full_like(zs, 1.0 / math.factorial(k))
        acc = term.copy()
        for j in range(1, 25):
            term = term * zs / (j + k)
            acc += term
        out[small] = acc
        phi[k - 1] = out
    zb = z[~small]
    p1 = np.expm1(zb) / zb
    p2 = (p1 - 1.0) / zb
    p3 = (p2 - 0.5) / zb
    phi[0][~small], phi[1][~small], phi[2][~small] = p1, p2, p3
    return ez, phi[0], phi[1], phi[2]


class _ETDRK4:
    """Cox-Matthews ETDRK4 for ``y' = c * y + F(y)`` with diagonal ``c``.

    ``c`` depends only on ``|n - m|``, so the exponential factors are built
    per distance and gathered into full matrices.
    """

    def __init__(self, rates_by_distance: np.ndarray, dist: np.ndarray, F):
        self.c = -rates_by_distance
        self.dist = dist
        self.F = F
        self._cache: dict[float, tuple] = {}

    def _coeffs(self, h: float):
        hit = self._cache.get(h)
        if hit is not None:
            return hit
        e, p1, p2, p3 = _phi_functions(self.c * h)
        e2, q1, _, _ = _phi_functions(self.c * h / 2)
        f1 = p1 - 3 * p2 + 4 * p3
        f2 = p2 - 2 * p3
        f3 = -p2 + 4 * p3
        d = self.dist
        out = (e[d], e2[d], (h / 2 * q1)[d], (h * f1)[d], (h * f2)[d], (h * f3)[d])
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[h] = out
        return out

    def step(self, u: np.ndarray, h: float) -> np.ndarray:
        E, E2, Q, f1, f2, f3 = self._coeffs(h)
        F = self.F
        Nu = F(u)
        a = E2 * u + Q * Nu
        Na = F(a)
        b = E2 * u + Q * Na
        Nb = F(b)
        c = E2 * a + Q * (2 * Nb - Nu)
        Nc = F(c)
        return E * u + f1 * Nu + 2 * f2 * (Na + Nb) + f3 * Nc


def _commutator_rhs(g: np.ndarray):
    gc = g[:, None]

    def F(rho):
        # -i [H, rho] with A = H rho and rho H = A^dagger for Hermitian rho
        A = np.zeros_like(rho)
        A[:-1] += gc * rho[1:]
        A[1:] += gc * rho[:-1]
        return -1j * (A - A.conj().T)

    return F


def iter_lindblad(spec: DephasingSpec, t_grid, tol: float = 1e-9,
                  max_steps: int = 2_000_000):
    """Yield the density matrix at each grid time, starting from ``|1><1|``.

    Steps are chosen by step doubling: a full ETDRK4 step is compared with
    two half steps and accepted when the largest element difference is below
    ``tol``.  The accepted state is the two-half-step result, made exactly
    Hermitian.
    """
    t = _check_grid(t_grid)
    tol = _check_tol(tol)
    N = spec.chain.length
    idx = np.arange(N)
    dist = np.abs(idx[:, None] - idx[None, :])
    rates = spec.gamma * np.arange(N, dtype=float) ** 2
    solver = _ETDRK4(rates, dist, _commutator_rhs(spec.chain.couplings))

    rho = np.zeros((N, N), dtype=complex)
    rho[0, 0] = 1.0
    now = 0.0
    h = 0.1 / max(1.0, float(spec.chain.couplings.max()))
    steps = 0
    for target in t:
        while now < target:
            if steps >= max_steps:
                raise IntegratorError("step budget exhausted", now)
            hh = min(h, target - now)
            full = solver.step(rho, hh)
            half = solver.step(solver.step(rho, hh / 2), hh / 2)
            err = float(np.max(np.abs(full - half)))
            steps += 1
            if not np.isfinite(err):
                raise IntegratorError("non-finite state", now)
            if err <= tol:
                rho = 0.5 * (half + half.conj().T)
                now = target if hh == target - now else now + hh
            factor = 0.9 * (tol / err) ** 0.2 if err > 0 else 4.0
            h_new = hh * min(4.0, max(0.2, factor))
            if err <= tol and hh < h:
                h_new = max(h_new, h)  # a short step to hit the grid
            h = h_new
            if h < 1e-14 * max(1.0, now):
                raise IntegratorError("step size underflow", now)
        yield DensityMatrix(rho.copy(), float(target))


def lindblad_evolve(spec: DephasingSpec, t_grid, tol: float = 1e-9) -> list[DensityMatrix]:
    """Density matrices on ``t_grid`` (dense ``N x N`` storage, ``N <= 512``)."""
    if spec.chain.length > 512:
        raise ConfigError("dense Lindblad evolution is limited to N <= 512")
    return list(iter_lindblad(spec, t_grid, tol))


@dataclass(frozen=True)
class LindbladSeries(PolarisationSeries):
    trace_err: np.ndarray = None


def run_lindblad(spec: DephasingSpec, t_grid, tol: float = 1e-9,
                 guard: int = GUARD,
                 stop_when_contaminated: bool = False) -> LindbladSeries:
    if spec.chain.length > 512:
        raise ConfigError("dense Lindblad evolution is limited to N <= 512")
    rows = []
    for dm in iter_lindblad(spec, t_grid, tol):
        rows.append((dm.time, dm.mean_n(), dm.leakage(guard), dm.trace_error()))
        if stop_when_contaminated and rows[-1][2] > LEAKAGE_TOL:
            break
    t, m, lk, te = (np.array(c) for c in zip(*rows))
    return LindbladSeries(t, m, lk, trace_err=te)


# -- classical limit ---------------------------------------------------------

@dataclass(frozen=True)
class MarkovSpec:
    """Symmetric hop rates ``w_n`` between ``|n>`` and ``|n+1>``."""

    rates: np.ndarray

    @property
    def length(self) -> int:
        return self.rates.size + 1

    def generator(self) -> np.ndarray:
        w = self.rates
        Q = np.diag(w, 1) + np.diag(w, -1)
        Q[np.diag_indices_from(Q)] = -Q.sum(axis=0)
        return Q


def markov_rates(spec: DephasingSpec) -> MarkovSpec:
    """Heavy-dephasing rates ``2 g_n^2 / Gamma``."""
    if not spec.gamma > 0:
        raise ConfigError("the Markov limit needs gamma > 0")
    w = 2.0 * spec.chain.couplings ** 2 / spec.gamma
    return MarkovSpec(w)


@dataclass(frozen=True)
class ProbabilityVector:
    p: np.ndarray
    time: float

    def mean_n(self) -> float:
        return float(np.arange(1, self.p.size + 1) @ self.p)

    def leakage(self, guard: int = GUARD) -> float:
        return float(np.sum(self.p[-guard:]))


def markov_evolve(m: MarkovSpec, t_grid) -> list[ProbabilityVector]:
    """Solve ``dp_n/dt = sum_{m = n +- 1} w (p_m - p_n)`` from ``p = delta_1``.

    Both ends are reflecting, so probability is conserved; the far end is
    monitored through the guard population.  The symmetric generator is
    diagonalised once and the solution is exact up to rounding.  Negative
    rounding residue (order 1e-17) is clipped to zero.
    """
    t = _check_grid(t_grid)
    w = m.rates
    diag = np.zeros(m.length)
    diag[:-1] -= w
    diag[1:] -= w
    lam, V = eigh_tridiagonal(diag, w)
    lam = np.minimum(lam, 0.0)
    coef = V[0]  # V^T p0 for p0 = delta_1
    out = []
    for tk in t:
        p = V @ (np.exp(lam * tk) * coef)
        np.clip(p, 0.0, None, out=p)
        if tk == 0:
            p = np.zeros(m.length)
            p[0] = 1.0
        out.append(ProbabilityVector(p, float(tk)))
    return out


def run_markov(m: MarkovSpec, t_grid, guard: int = GUARD) -> PolarisationSeries:
    probs = markov_evolve(m, t_grid)
    return PolarisationSeries(
        np.array([p.time for p in probs]),
        np.array([p.mean_n() for p in probs]),
        np.array([p.leakage(guard) for p in probs]),
    )


def default_dephased_t_max(spec: DephasingSpec) -> float:
    """A final time by which the dephased front has crossed the chain.

    Uses the Markov drift: diffusive ``n ~ sqrt(Omega^2 t / Gamma)`` in 1D and
    ``n ~ Omega^2 t / Gamma`` or faster above, never less than the coherent
    estimate.
    """
    c = spec.chain
    coherent = default_t_max(c.dimension, c.length, c.omega)
    scale = spec.gamma / c.omega ** 2
    if c.dimension is Dimension.D1:
        diffusive = 0.05 * scale * c.length ** 2
    elif c.dimension is Dimension.D2:
        diffusive = 0.25 * scale * c.length
    else:
        diffusive = 0.5 * scale * c.length ** (2 / 3)
    return float(max(coherent, diffusive))


def compare_lindblad_markov(spec: DephasingSpec, t_grid, tol: float = 1e-9) -> float:
    """Largest L1 distance between ``diag(rho)`` and the Markov populations."""
    probs = markov_evolve(markov_rates(spec), t_grid)
    rhos = iter_lindblad(spec, t_grid, tol)
    return max(float(np.sum(np.abs(r.populations - p.p))) for r, p in zip(rhos, probs))
