"""Coherent propagation along the effective semi-infinite chains.

The driven lattice reduces to a chain of number states ``|1>, |2>, ...``
(``|n>`` has ``n`` flipped spins) with real hops ``g_n`` between ``|n>`` and
``|n+1>``:

=====  ========================
dim    g_n
=====  ========================
1      Omega
2      Omega * sqrt(n + 1)
3      Omega * (n + 1) ** (2/3)
=====  ========================

The 3D law is a boundary-scaling ansatz, not a microscopic reduction.  The
chain is truncated at ``N`` sites; the population on the last ``guard`` sites
certifies which times are free of reflections.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import special
from scipy.integrate import solve_ivp

from .errors import ConfigError, InsufficientDataError, IntegratorError

# the slow 1/t approach of the 2D and 3D exponents needs long chains
DEFAULT_LENGTH = {1: 512, 2: 4096, 3: 32768}
GUARD = 8
LEAKAGE_TOL = 1e-6
MIN_FIT_POINTS = 8
WINDOW_FRACTION = 0.5


class Dimension(enum.IntEnum):
    D1 = 1
    D2 = 2
    D3 = 3


def _as_dimension(dim) -> Dimension:
    if isinstance(dim, str):
        dim = dim.upper().lstrip("D")
    try:
        return Dimension(int(dim))
    except (ValueError, TypeError):
        raise ConfigError(f"dimension must be 1, 2 or 3, got {dim!r}") from None


def hop_couplings(dimension, length: int, omega: float) -> np.ndarray:
    """Hop amplitudes ``g_1 .. g_{N-1}`` for the given lattice dimension."""
    dim = _as_dimension(dimension)
    n = np.arange(1, length, dtype=float)
    if dim is Dimension.D1:
        return np.full(length - 1, float(omega))
    if dim is Dimension.D2:
        return omega * np.sqrt(n + 1)
    return omega * (n + 1) ** (2.0 / 3.0)


@dataclass(frozen=True)
class ChainSpec:
    """A truncated effective chain.

    ``build_chain`` is the validating constructor.
    """

    dimension: Dimension
    length: int
    omega: float
    couplings: np.ndarray = field(repr=False, compare=False)

    def hamiltonian(self) -> np.ndarray:
        """Dense real symmetric tridiagonal Hamiltonian (zero diagonal)."""
        return np.diag(self.couplings, 1) + np.diag(self.couplings, -1)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """``H @ psi`` for a vector (or the leading axis of an array)."""
        g = self.couplings
        out = np.zeros_like(psi)
        out[:-1] += (g * psi[1:].T).T
        out[1:] += (g * psi[:-1].T).T
        return out

    @property
    def sites(self) -> np.ndarray:
        return np.arange(1, self.length + 1)


def build_chain(dimension, length: int, omega: float = 1.0) -> ChainSpec:
    dim = _as_dimension(dimension)
    if isinstance(length, bool) or int(length) != length or length < 2:
        raise ConfigError(f"chain length must be an integer >= 2, got {length!r}")
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega!r}")
    length = int(length)
    g = hop_couplings(dim, length, float(omega))
    g.setflags(write=False)
    return ChainSpec(dim, length, float(omega), g)


@dataclass(frozen=True)
class ChainState:
    amps: np.ndarray
    time: float

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))


def initial_state(spec: ChainSpec) -> ChainState:
    amps = np.zeros(spec.length, dtype=complex)
    amps[0] = 1.0
    return ChainState(amps, 0.0)


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ConfigError("time grid must be a non-empty 1D sequence")
    if t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ConfigError("time grid must be non-negative and strictly increasing")
    return t


def _check_tol(tol: float) -> float:
    if not 1e-12 <= tol <= 1e-6:
        raise ConfigError(f"tolerance must lie in [1e-12, 1e-6], got {tol!r}")
    return float(tol)


def _dop853_states(spec, t, tol):
    N = spec.length
    g = spec.couplings

    def rhs(_, y):
        re, im = y[:N], y[N:]
        out = np.zeros_like(y)
        # d re/dt = H im,  d im/dt = -H re
        out[:N - 1] += g * im[1:]
        out[1:N] += g * im[:-1]
        out[N:-1] -= g * re[1:]
        out[N + 1:] -= g * re[:-1]
        return out

    y0 = np.zeros(2 * N)
    y0[0] = 1.0
    sol = solve_ivp(rhs, (0.0, t[-1]), y0, method="DOP853", t_eval=t,
                    rtol=tol * 0.05, atol=tol * 1e-5)
    if not sol.success:
        last = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegratorError(sol.message, last)
    for k, tk in enumerate(t):
        yield ChainState(sol.y[:N, k] + 1j * sol.y[N:, k], float(tk))


@numba.njit(cache=True)
def _chebyshev_sum(psi, g, scale, coeffs):
    """``sum_k coeffs[k] T_k(H / scale) psi`` for tridiagonal ``H``."""
    n = psi.size
    prev = psi.copy()
    cur = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        v = 0j
        if i > 0:
            v += g[i - 1] * psi[i - 1]
        if i < n - 1:
            v += g[i] * psi[i + 1]
        cur[i] = v / scale
    acc = coeffs[0] * prev + coeffs[1] * cur
    nxt = np.empty(n, dtype=np.complex128)
    for k in range(2, coeffs.size):
        c = coeffs[k]
        for i in range(n):
            v = 0j
            if i > 0:
                v += g[i - 1] * cur[i - 1]
            if i < n - 1:
                v += g[i] * cur[i + 1]
            nxt[i] = 2.0 * v / scale - prev[i]
            acc[i] += c * nxt[i]
        prev, cur, nxt = cur, nxt, prev
    return acc


def _chebyshev_coeffs(x: float, eps: float) -> np.ndarray:
    """Expansion coefficients of ``exp(-i x y)`` on ``y`` in [-1, 1]."""
    kmax = int(x + 20 + 8 * max(x, 1.0) ** (1 / 3))
    k = np.arange(kmax + 1)
    jk = special.jv(k, x)
    big = np.nonzero(np.abs(jk) > eps)[0]
    keep = max(int(big[-1]) + 2 if big.size else 2, 2)
    c = 2.0 * (-1j) ** k[:keep] * jk[:keep]
    c[0] = jk[0]
    return c.astype(np.complex128)


def _chebyshev_states(spec, t, tol):
    N = spec.length
    g = np.ascontiguousarray(spec.couplings, dtype=float)
    psi = np.zeros(N, dtype=complex)
    psi[0] = 1.0
    support = 1  # psi vanishes at and beyond this index
    eps = tol * 1e-3
    t_prev = 0.0
    for tk in t:
        dt = tk - t_prev
        if dt > 0:
            # bound the active window, then grow it by the number of terms
            hi = min(N, support + 1)
            for _ in range(3):
                scale = 2.0 * float(g[:hi - 1].max()) if hi > 1 else 1.0
                coeffs = _chebyshev_coeffs(scale * dt, eps)
                new_hi = min(N, support + coeffs.size + 1)
                if new_hi == hi:
                    break
                hi = new_hi
            scale = 2.0 * float(g[:hi - 1].max())
            coeffs = _chebyshev_coeffs(scale * dt, eps)
            psi[:hi] = _chebyshev_sum(psi[:hi], g[:hi - 1], scale, coeffs)
            nz = np.nonzero(np.abs(psi[:hi]) > 1e-30)[0]
            support = int(nz[-1]) + 1 if nz.size else 1
            t_prev = tk
        yield ChainState(psi.copy(), float(tk))


METHODS = ("chebyshev", "dop853")


def iter_states(spec: ChainSpec, t_grid, tol: float = 1e-9,
                method: str = "chebyshev"):
    """Yield the evolved state from ``|1>`` at each time of ``t_grid``.

    ``chebyshev`` expands the propagator between grid points in Chebyshev
    polynomials, truncating once the Bessel coefficients fall below
    ``tol * 1e-3``; it only touches the part of the chain the wave can
    have reached.  ``dop853`` is the explicit adaptive Runge-Kutta scheme
    on the stacked real and imaginary parts.
    """
    t = _check_grid(t_grid)
    tol = _check_tol(tol)
    if method == "chebyshev":
        return _chebyshev_states(spec, t, tol)
    if method == "dop853":
        if t[-1] == 0.0:
            return iter(initial_state(spec) for _ in t)
        return _dop853_states(spec, t, tol)
    raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")


def evolve(spec: ChainSpec, t_grid, tol: float = 1e-9,
           method: str = "chebyshev") -> list[ChainState]:
    """Integrate ``i d psi/dt = H psi`` from ``|1>`` onto ``t_grid``."""
    return list(iter_states(spec, t_grid, tol, method))


def mean_excitation(state: ChainState) -> float:
    """Expected number of flipped spins, ``sum_n n |a_n|^2``."""
    p = np.abs(state.amps) ** 2
    return float(np.dot(np.arange(1, p.size + 1), p))


def boundary_leakage(state: ChainState, guard: int = GUARD) -> float:
    """Population on the last ``guard`` sites of the truncated chain."""
    if not 0 < guard < state.amps.size:
        raise ConfigError(f"guard must lie in [1, N-1], got {guard}")
    p = np.abs(state.amps[-guard:]) ** 2
    return float(min(1.0, np.sum(p)))


def energy(spec: ChainSpec, state: ChainState) -> float:
    return float(np.real(np.vdot(state.amps, spec.apply(state.amps))))


@dataclass(frozen=True)
class PolarisationSeries:
    """Mean excitation and guard leakage on a time grid."""

    times: np.ndarray
    mean_n: np.ndarray
    leakage: np.ndarray
    leak_tol: float = LEAKAGE_TOL

    @property
    def certified(self) -> np.ndarray:
        """Mask of times before the first guard breach."""
        ok = self.leakage <= self.leak_tol
        return np.logical_and.accumulate(ok)

    @property
    def contaminated(self) -> bool:
        return not bool(self.certified.all())

    @property
    def t_guard(self) -> float:
        """Last certified time (nan if even the first point is breached)."""
        cert = self.certified
        return float(self.times[cert][-1]) if cert.any() else float("nan")


def polarisation_series(states, guard: int = GUARD,
                        leak_tol: float = LEAKAGE_TOL) -> PolarisationSeries:
    return PolarisationSeries(
        times=np.array([s.time for s in states]),
        mean_n=np.array([mean_excitation(s) for s in states]),
        leakage=np.array([boundary_leakage(s, guard) for s in states]),
        leak_tol=leak_tol,
    )


def run_chain(spec: ChainSpec, t_grid, tol: float = 1e-9, guard: int = GUARD,
              method: str = "chebyshev",
              stop_when_contaminated: bool = False) -> PolarisationSeries:
    """Polarisation series without keeping the states in memory.

    With ``stop_when_contaminated`` the run ends at the first grid time whose
    guard leakage exceeds the tolerance (that point is kept).
    """
    times, mean_n, leak = [], [], []
    for state in iter_states(spec, t_grid, tol, method):
        times.append(state.time)
        mean_n.append(mean_excitation(state))
        leak.append(boundary_leakage(state, guard))
        if stop_when_contaminated and leak[-1] > LEAKAGE_TOL:
            break
    return PolarisationSeries(np.array(times), np.array(mean_n), np.array(leak))


def default_t_max(dimension, length: int, omega: float = 1.0) -> float:
    """A final time just beyond the expected arrival of the front at ``N``.

    Front positions: ``2 Omega t`` (1D), about ``(Omega t)^2`` (2D) and
    ``(2 Omega t / 3)^3`` (3D).
    """
    dim = _as_dimension(dimension)
    if dim is Dimension.D1:
        return 0.6 * length / omega
    if dim is Dimension.D2:
        return 1.2 * np.sqrt(length) / omega
    return 1.8 * length ** (1 / 3) / omega


def default_grid(t_max: float, points: int = 400) -> np.ndarray:
    return np.linspace(0.0, t_max, points + 1)


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    stderr: float
    n_points: int
    window: tuple[float, float]


def loglog_slope(x, y) -> tuple[float, float]:
    """OLS slope of ``log y`` on ``log x`` and its standard error."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    n = lx.size
    if n < 3:
        raise InsufficientDataError(f"need at least 3 points, got {n}")
    xm = lx - lx.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ (ly - ly.mean())) / sxx
    resid = ly - ly.mean() - slope * xm
    stderr = float(np.sqrt(max(resid @ resid, 0.0) / (n - 2) / sxx))
    return slope, stderr


def fit_exponent(series: PolarisationSeries, window=None,
                 min_points: int = MIN_FIT_POINTS,
                 window_fraction: float = WINDOW_FRACTION) -> ExponentFit:
    """Power-law exponent of ``mean_n(t)`` over a certified window.

    The default window is ``[window_fraction * t_guard, t_guard]``.  Points with
    ``mean_n < 2`` (early transient), ``t <= 0`` and uncertified points are
    always dropped.
    """
    t, m = series.times, series.mean_n
    mask = series.certified & (m >= 2) & (t > 0)
    if window is None:
        if not mask.any():
            raise InsufficientDataError("no certified points with mean_n >= 2")
        hi = float(t[mask][-1])
        window = (window_fraction * hi, hi)
    lo, hi = float(window[0]), float(window[1])
    mask &= (t >= lo) & (t <= hi)
    if mask.sum() < min_points:
        raise InsufficientDataError(
            f"{int(mask.sum())} usable points in window [{lo:g}, {hi:g}], "
            f"need {min_points}")
    slope, err = loglog_slope(t[mask], m[mask])
    return ExponentFit(slope, err, int(mask.sum()), (lo, hi))
