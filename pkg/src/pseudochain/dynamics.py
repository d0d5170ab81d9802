"""Time evolution, moments and infinite-temperature end-site correlators.

Conventions: states evolve with ``exp(-iHt)``; Heisenberg operators with
``exp(iHt) O exp(-iHt)``.  The correlators are

    g_X(t) = Tr(X_1 X_1(t)) / 2^M,      g_Y(t) = Tr(Y_1 X_1(t)) / 2^M,

with ``X_1`` the Pauli X on the first spin.  Writing ``X_1 = R + R^T`` with
``R`` the raising operator of spin 1 (``Y_1 = iR - iR^T``), both follow from a
single trace ``z(t) = Tr(R^T R(t))``:

    g_X = 2 Re z / 2^M,   g_Y = 2 Im z / 2^M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import CapExceeded, ConvergenceFailure, DimensionMismatch, OutOfRange
from .hilbert import (
    ChainLike,
    _as_pseudo,
    build_hamiltonian,
    end_operator,
    end_pair_state,
    enumerate_sector,
    single_excitation_state,
)

DENSE_MAX_DIM = 4000
TRACE_MAX_SPINS = 16
NORM_TOL = 1e-10


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values)
        if times.shape != values.shape[:1]:
            raise DimensionMismatch(f"{len(times)} times but {len(values)} values")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise OutOfRange("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.times)

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            if np.iscomplexobj(self.values):
                fh.write("t,re,im\n")
                for t, v in zip(self.times, self.values):
                    fh.write(f"{t:.17g},{v.real:.17g},{v.imag:.17g}\n")
            else:
                fh.write("t,value\n")
                for t, v in zip(self.times, self.values):
                    fh.write(f"{t:.17g},{v:.17g}\n")


@dataclass(frozen=True)
class SeriesCoefficients:
    """Taylor coefficients ``c_n`` of a function of time about ``t = 0``."""

    coefficients: np.ndarray
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float))

    def __getitem__(self, n: int) -> float:
        return float(self.coefficients[n])

    def __len__(self) -> int:
        return len(self.coefficients)

    @property
    def max_order(self) -> int:
        return len(self.coefficients) - 1

    def __sub__(self, other: SeriesCoefficients) -> SeriesCoefficients:
        n = min(len(self), len(other))
        return SeriesCoefficients(self.coefficients[:n] - other.coefficients[:n], self.note)

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, self.coefficients)

    def to_json(self) -> list[dict]:
        return [{"order": n, "value": float(c)} for n, c in enumerate(self.coefficients)]


# ---------------------------------------------------------------------------
# state evolution


class Propagator:
    """Applies ``exp(-iHt)`` for a fixed sparse Hermitian ``H``.

    Dense eigendecomposition below ``DENSE_MAX_DIM``, Lanczos-Krylov stepping above.
    """

    def __init__(self, h: sp.spmatrix, krylov_dim: int = 30, tol: float = 1e-12):
        self.h = sp.csr_matrix(h)
        self.dim = self.h.shape[0]
        self.krylov_dim = krylov_dim
        self.tol = tol
        self._eig = None
        if self.dim <= DENSE_MAX_DIM:
            self._eig = np.linalg.eigh(self.h.toarray())

    def __call__(self, state: np.ndarray, t: float) -> np.ndarray:
        state = np.asarray(state)
        if state.shape[0] != self.dim:
            raise DimensionMismatch(f"state has dimension {state.shape[0]}, operator {self.dim}")
        if t == 0:
            return state.astype(complex)
        if self._eig is not None:
            w, v = self._eig
            return v @ (np.exp(-1j * w * t) * (v.conj().T @ state))
        return self._krylov(state.astype(complex), t)

    def series(self, state: np.ndarray, times) -> np.ndarray:
        """Evolved states for every time in ``times`` (rows)."""
        times = np.asarray(times, dtype=float)
        if self._eig is not None:
            w, v = self._eig
            c = v.conj().T @ np.asarray(state)
            return (np.exp(-1j * np.outer(times, w)) * c) @ v.T
        out, psi, t_prev = [], np.asarray(state, dtype=complex), 0.0
        for t in times:
            psi = self._krylov(psi, t - t_prev)
            t_prev = t
            out.append(psi)
        return np.array(out)

    def _krylov(self, psi: np.ndarray, t: float) -> np.ndarray:
        norm0 = np.linalg.norm(psi)
        if norm0 == 0:
            return psi
        remaining, tau = t, t
        while abs(remaining) > 0:
            tau = math.copysign(min(abs(tau), abs(remaining)), t)
            new, err, lucky = self._lanczos_step(psi, tau)
            if err > self.tol * max(abs(tau), 1e-300) and not lucky:
                tau /= 2
                if abs(tau) < 1e-12 * max(abs(t), 1.0):
                    raise ConvergenceFailure("Krylov step size collapsed")
                continue
            psi = new
            remaining -= tau
            if err < 0.1 * self.tol * abs(tau):
                tau *= 1.5
        if abs(np.linalg.norm(psi) - norm0) > NORM_TOL * max(norm0, 1.0):
            raise ConvergenceFailure("Krylov propagation lost unitarity")
        return psi

    def _lanczos_step(self, psi: np.ndarray, tau: float):
        beta0 = np.linalg.norm(psi)
        m = min(self.krylov_dim, self.dim)
        basis = np.zeros((m + 1, self.dim), dtype=complex)
        alpha, beta = np.zeros(m), np.zeros(m)
        basis[0] = psi / beta0
        lucky = False
        k = m
        for j in range(m):
            w = self.h @ basis[j]
            alpha[j] = np.vdot(basis[j], w).real
            w = w - alpha[j] * basis[j] - (beta[j - 1] * basis[j - 1] if j else 0)
            w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            beta[j] = np.linalg.norm(w)
            if beta[j] < 1e-13:
                lucky, k = True, j + 1
                break
            basis[j + 1] = w / beta[j]
        tri = np.diag(alpha[:k]) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
        w_t, v_t = np.linalg.eigh(tri)
        coeff = v_t @ (np.exp(-1j * w_t * tau) * v_t[0])
        err = 0.0 if lucky else abs(beta[k - 1] * coeff[-1]) * beta0
        return beta0 * (basis[:k].T @ coeff), err, lucky


def evolve(h: sp.spmatrix, state: np.ndarray, t: float) -> np.ndarray:
    """``exp(-iHt) state``."""
    return Propagator(h)(state, t)


def moment(h: sp.spmatrix, state: np.ndarray, n: int) -> float:
    """``<state|H^n|state>`` by repeated products (splitting the power in half)."""
    if n < 0:
        raise OutOfRange("moment order must be non-negative")
    state = np.asarray(state)
    if state.shape[0] != h.shape[0]:
        raise DimensionMismatch(f"state has dimension {state.shape[0]}, operator {h.shape[0]}")
    left = state
    for _ in range(n // 2):
        left = h @ left
    right = h @ left if n % 2 else left
    return float(np.vdot(left, right).real)


def moments(h: sp.spmatrix, state: np.ndarray, max_order: int) -> np.ndarray:
    out = np.empty(max_order + 1)
    vec = np.asarray(state, dtype=float)
    powers = [vec]
    for _ in range((max_order + 1) // 2):
        powers.append(h @ powers[-1])
    for n in range(max_order + 1):
        a, b = powers[n // 2], powers[n - n // 2]
        out[n] = float(np.dot(a, b))
    return out


def survival_amplitude(spec: ChainLike, times) -> TimeSeries:
    """One-excitation return amplitude ``<e_1|exp(-iHt)|e_1>`` of the first spin."""
    h = build_hamiltonian(spec, 1)
    e1 = single_excitation_state(spec, 0)
    psi = Propagator(h).series(e1, times)
    return TimeSeries(times, psi @ e1)


def transfer_probability(spec: ChainLike, times) -> TimeSeries:
    """One-excitation probability to find the first spin's excitation on the last spin."""
    spec = _as_pseudo(spec)
    h = build_hamiltonian(spec, 1)
    psi = Propagator(h).series(single_excitation_state(spec, 0), times)
    return TimeSeries(times, np.abs(psi[:, -1]) ** 2)


def return_probability(spec: ChainLike, times) -> TimeSeries:
    """``|<psi|exp(-iHt)|psi>|^2`` for ``psi`` the two end spins excited."""
    spec = _as_pseudo(spec)
    if spec.n_spins < 2:
        raise OutOfRange("two end excitations need at least two spins")
    h = build_hamiltonian(spec, 2)
    psi0 = end_pair_state(spec)
    amp = Propagator(h).series(psi0, times) @ psi0
    return TimeSeries(times, np.clip(np.abs(amp) ** 2, 0.0, 1.0))


def return_probability_series(spec: ChainLike, max_order: int) -> SeriesCoefficients:
    """Taylor coefficients of the two-end-excitation return probability."""
    spec = _as_pseudo(spec)
    h = build_hamiltonian(spec, 2)
    m = moments(h, end_pair_state(spec), max_order)
    return probability_series_from_moments(m)


def probability_series_from_moments(m) -> SeriesCoefficients:
    """Series of ``|sum_n (-it)^n m_n / n!|^2`` truncated at ``len(m) - 1``."""
    m = np.asarray(m, dtype=float)
    n = np.arange(len(m))
    fact = np.array([math.factorial(k) for k in n], dtype=float)
    # real and imaginary parts of the amplitude coefficients (-i)^n m_n / n!
    phase = (-1j) ** n
    a = phase * m / fact
    prob = np.convolve(a, a.conj())[: len(m)]
    return SeriesCoefficients(prob.real, note="return probability")


# ---------------------------------------------------------------------------
# infinite-temperature correlators


def _check_trace_cap(n_spins: int) -> None:
    if n_spins > TRACE_MAX_SPINS:
        raise CapExceeded(f"exact traces over {n_spins} spins exceed the {TRACE_MAX_SPINS}-spin cap")


@dataclass
class _CorrelatorSpectrum:
    """Weights and frequencies with ``z(t) = sum w exp(i omega t)``."""

    n_spins: int
    weights: np.ndarray
    freqs: np.ndarray = field(repr=False)


def _correlator_spectrum(spec: ChainLike) -> _CorrelatorSpectrum:
    spec = _as_pseudo(spec)
    m = spec.n_spins
    _check_trace_cap(m)
    eig = [np.linalg.eigh(build_hamiltonian(spec, k).toarray()) for k in range(m + 1)]
    weights, freqs = [], []
    for k in range(m):
        raise_k = end_operator(m, "X", 0, k, k + 1)
        lam_lo, v_lo = eig[k]
        lam_hi, v_hi = eig[k + 1]
        rt = v_hi.T @ (raise_k @ v_lo)
        w = rt**2
        keep = w > 1e-30
        weights.append(w[keep])
        freqs.append((lam_hi[:, None] - lam_lo[None, :])[keep])
    return _CorrelatorSpectrum(m, np.concatenate(weights), np.concatenate(freqs))


def _merge_modes(spectrum: _CorrelatorSpectrum, decimals: int = 12):
    """Sum weights over (numerically) equal frequencies to shrink the mode list."""
    key = np.round(spectrum.freqs, decimals)
    uniq, inv = np.unique(key, return_inverse=True)
    w = np.bincount(inv, weights=spectrum.weights)
    return w, uniq


def mixed_correlators(spec: ChainLike, times) -> tuple[TimeSeries, TimeSeries]:
    """``(g_X, g_Y)`` sampled at ``times``; exact traces over all sectors."""
    spectrum = _correlator_spectrum(spec)
    w, omega = _merge_modes(spectrum)
    times = np.asarray(times, dtype=float)
    z = np.array([np.dot(w, np.exp(1j * omega * t)) for t in times])
    scale = 2.0 / 2**spectrum.n_spins
    return TimeSeries(times, scale * z.real), TimeSeries(times, scale * z.imag)


def mixed_correlator(spec: ChainLike, probe: str, times) -> TimeSeries:
    """``Tr(P_1 X_1(t)) / 2^M`` for ``probe`` P in {"X", "Y"}."""
    probe = probe.upper()
    if probe not in ("X", "Y"):
        raise OutOfRange(f"probe must be X or Y, got {probe!r}")
    gx, gy = mixed_correlators(spec, times)
    return gx if probe == "X" else gy


def correlator_spectrum_at(spec: ChainLike, t_complex) -> tuple[np.ndarray, np.ndarray]:
    """Analytic continuation of ``(g_X, g_Y)`` to complex times (used for contour checks)."""
    spectrum = _correlator_spectrum(spec)
    w, omega = _merge_modes(spectrum)
    t_complex = np.asarray(t_complex, dtype=complex)
    z = np.exp(1j * np.outer(t_complex, omega)) @ w
    zbar = np.exp(-1j * np.outer(t_complex, omega)) @ w
    scale = 1.0 / 2**spectrum.n_spins
    # Re/Im continued analytically: Re z -> (z + z*)/2 with z*(t) = sum w exp(-i omega t)
    return scale * (z + zbar), scale * (z - zbar) / 1j


def correlator_series(spec: ChainLike, max_order: int) -> tuple[SeriesCoefficients, SeriesCoefficients]:
    """Exact Taylor coefficients of ``(g_X, g_Y)`` through ``max_order``.

    Uses nested commutators ``C_n = [H, C_{n-1}]`` with ``C_0 = R``, so that
    ``z(t) = sum_n (it)^n Tr(R^T C_n) / n!``.  Everything is real arithmetic on
    the sector-coupling blocks of ``R``.
    """
    spec = _as_pseudo(spec)
    m = spec.n_spins
    _check_trace_cap(m)
    if max_order < 0:
        raise OutOfRange("max_order must be non-negative")
    hams = [build_hamiltonian(spec, k) for k in range(m + 1)]
    raises = [end_operator(m, "X", 0, k, k + 1) for k in range(m)]
    blocks = [r.toarray() for r in raises]
    traces = np.zeros(max_order + 1)
    for n in range(max_order + 1):
        if n:
            # [H, C] restricted to the (k+1 <- k) block; H is symmetric
            blocks = [hams[k + 1] @ c - (hams[k] @ c.T).T for k, c in enumerate(blocks)]
        traces[n] = sum(r.multiply(c).sum() for r, c in zip(raises, blocks))
    orders = np.arange(max_order + 1)
    fact = np.array([math.factorial(n) for n in orders], dtype=float)
    z = (1j) ** orders * traces / fact
    scale = 2.0 / 2**m
    gx = SeriesCoefficients(scale * z.real, note="g_X, normalised to 1 at t=0")
    gy = SeriesCoefficients(scale * z.imag, note="g_Y, normalised to 1 at t=0 of g_X")
    return gx, gy


def correlator_series_single(spec: ChainLike, probe: str, max_order: int) -> SeriesCoefficients:
    gx, gy = correlator_series(spec, max_order)
    return gx if probe.upper() == "X" else gy


def correlator_series_contour(
    spec: ChainLike, max_order: int, radius: float | None = None, n_nodes: int = 64
) -> tuple[SeriesCoefficients, SeriesCoefficients]:
    """Taylor coefficients of ``(g_X, g_Y)`` by Cauchy integrals on a circle in complex time.

    Independent of the commutator recursion: samples the spectral form at
    ``radius * exp(2 pi i k / n_nodes)`` and reads coefficients off an FFT.
    Aliasing from orders ``>= n_nodes`` is negligible once ``n_nodes`` well
    exceeds ``radius * (spectral width)``.
    """
    if max_order >= n_nodes:
        raise OutOfRange("need more contour nodes than requested orders")
    spec = _as_pseudo(spec)
    if radius is None:
        radius = 1.0 / max([abs(j) for j in spec.inter_couplings] + [1.0])
    nodes = radius * np.exp(2j * np.pi * np.arange(n_nodes) / n_nodes)
    gx, gy = correlator_spectrum_at(spec, nodes)
    scale = radius ** -np.arange(max_order + 1)
    cx = (np.fft.fft(gx) / n_nodes)[: max_order + 1] * scale
    cy = (np.fft.fft(gy) / n_nodes)[: max_order + 1] * scale
    return (
        SeriesCoefficients(cx.real, note="g_X by contour integral"),
        SeriesCoefficients(cy.real, note="g_Y by contour integral"),
    )
