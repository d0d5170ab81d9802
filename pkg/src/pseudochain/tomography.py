"""One-excitation Hamiltonian tomography of the effective linear chain.

The survival amplitude of an excitation injected at the first spin is
``f(t) = sum_k w_k exp(-i lambda_k t)`` with ``lambda_k`` the eigenvalues of
the tridiagonal one-excitation matrix and ``w_k`` the squared first
components of its eigenvectors.  ``estimate_spectrum`` recovers those modes
(matrix pencil, then a nonlinear least-squares polish) and
``reconstruct_jacobi`` inverts them with a Lanczos recurrence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .dynamics import TimeSeries
from .errors import Breakdown, NonPositiveWeights, RankDeficient
from .topology import ModelChainSpec

log = logging.getLogger(__name__)

WEIGHT_THRESHOLD = 1e-6
PENCIL_MAX_SAMPLES = 2400
CHI2_GAIN = 50.0
PIN_STIFFNESS = 1e8


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    weights: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        order = np.argsort(self.eigenvalues)
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float)[order])
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float)[order])

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def amplitude(self, times) -> np.ndarray:
        return np.exp(-1j * np.outer(np.asarray(times), self.eigenvalues)) @ self.weights


def spectral_data(model: ModelChainSpec) -> SpectralData:
    """Forward map: eigenvalues and first-site weights of the model chain."""
    from .modelchain import oes_matrix

    lam, vec = np.linalg.eigh(oes_matrix(model).toarray())
    return SpectralData(lam, vec[0] ** 2)


def _pencil_rank(s: np.ndarray, rank_tol: float | None, noise: float | None) -> int:
    if noise is not None:
        return int(np.sum(s > noise))
    tol = 1e-9 if rank_tol is None else rank_tol
    return int(np.sum(s > tol * s[0]))


def _pencil_seed(t, y, n_modes, rank_tol, noise_sd):
    dt = t[1] - t[0]
    head = y[:PENCIL_MAX_SAMPLES]
    pencil = max(len(head) // 3, 1)
    hankel = np.lib.stride_tricks.sliding_window_view(head, pencil + 1)
    _, s, vh = np.linalg.svd(hankel, full_matrices=False)
    floor = None
    if noise_sd is not None:
        # edge of the noise singular-value bulk, with a safety margin
        floor = 1.5 * noise_sd * (np.sqrt(hankel.shape[0]) + np.sqrt(hankel.shape[1]))
    r = n_modes if n_modes is not None else _pencil_rank(s, rank_tol, floor)
    if r < 1:
        raise RankDeficient("no signal above the rank threshold")
    if r >= min(hankel.shape):
        raise RankDeficient(f"model order {r} saturates the pencil; use a longer grid")
    v = vh[:r].T  # columns span the shift-invariant signal space
    z = np.linalg.eigvals(np.linalg.pinv(v[:-1]) @ v[1:])
    lam = -np.angle(z) / dt
    vander = np.exp(-1j * np.outer(t[: len(head)] - t[0], lam))
    amp, *_ = np.linalg.lstsq(vander, head, rcond=None)
    # amplitudes referenced to t = 0
    return lam, (amp * np.exp(1j * lam * t[0])).real


def _progressive_polish(t, y, lam, w, sigma, total_weight=None):
    """Least-squares polish on geometrically growing prefixes of the record."""
    n = len(t)
    size = min(n, PENCIL_MAX_SAMPLES)
    while True:
        sig = None if sigma is None else np.asarray(sigma)[:size]
        lam, w, chi2 = _polish(t[:size], y[:size], lam, w, sig, total_weight)
        if size == n:
            return lam, w, chi2
        size = min(n, 3 * size)


def _complete_modes(t, y, lam, w, chi2, sigma, total_weight, max_new: int = 4):
    """Add modes the pencil missed, seeded from peaks of the residual periodogram.

    A candidate is kept only if all weights stay positive, it does not duplicate
    an existing frequency, and the weighted chi-square drops by more than
    ``CHI2_GAIN`` (two extra parameters).
    """
    n = len(t)
    dt = t[1] - t[0]
    n_fft = 1 << int(np.ceil(np.log2(8 * n)))
    resolution = 2 * np.pi / (n * dt)
    for _ in range(max_new):
        r = y - np.exp(-1j * np.outer(t, lam)) @ w
        spec = np.fft.fft(r, n_fft) / n
        k = int(np.argmax(np.abs(spec)))
        # a residual exp(-i lam t) peaks where 2 pi k / n_fft = lam dt (mod 2 pi)
        new_lam = np.angle(np.exp(2j * np.pi * k / n_fft)) / dt
        new_w = (spec[k] * np.exp(1j * new_lam * t[0])).real
        try:
            cand = _progressive_polish(t, y, np.append(lam, new_lam), np.append(w, abs(new_w)), sigma, total_weight)
        except (ValueError, np.linalg.LinAlgError):
            break
        c_lam, c_w, c_chi2 = cand
        gaps = np.diff(np.sort(c_lam))
        if np.any(c_w <= 0) or np.min(gaps) < resolution or chi2 - c_chi2 < CHI2_GAIN:
            break
        log.debug("added a missed mode at %.4f with weight %.2e", new_lam, new_w)
        lam, w, chi2 = cand
    return lam, w


def estimate_spectrum(
    series: TimeSeries,
    n_modes: int | None = None,
    rank_tol: float | None = None,
    polish: bool = True,
    sigma=None,
    total_weight: float | None = None,
) -> SpectralData:
    """Recover ``(lambda_k, w_k)`` from samples of ``sum_k w_k exp(-i lambda_k t)``.

    The grid must be uniform.  ``n_modes`` fixes the model order; otherwise it
    is read off the Hankel singular values relative to the largest one
    (``rank_tol``), or against the noise bulk when ``sigma`` is given.
    ``sigma`` holds per-sample standard deviations of the real and imaginary
    parts (as one complex array); it also weights the polish and turns on a
    periodogram search for modes the pencil missed.  ``total_weight`` pins
    ``sum(w)`` during the polish when it is known in advance.
    """
    t = series.times
    y = np.asarray(series.values, dtype=complex)
    n = len(t)
    if n < 3:
        raise RankDeficient("need at least three samples")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
        raise RankDeficient("matrix pencil needs a uniform time grid")
    noise_sd = None if sigma is None else float(np.sqrt(np.mean(np.abs(np.asarray(sigma)) ** 2)))
    lam, w = _pencil_seed(t, y, n_modes, rank_tol, noise_sd)
    if polish:
        lam, w, chi2 = _progressive_polish(t, y, lam, w, sigma, total_weight)
        if sigma is not None and n_modes is None:
            lam, w = _complete_modes(t, y, lam, w, chi2, sigma, total_weight)
    resid = float(np.linalg.norm(np.exp(-1j * np.outer(t, lam)) @ w - y) / np.sqrt(n))
    if np.any(w < -max(WEIGHT_THRESHOLD, 10 * resid)):
        raise NonPositiveWeights(f"negative weights {w[w < 0]} signal a model violation")
    keep = w > WEIGHT_THRESHOLD
    lam, w = lam[keep], w[keep]
    log.debug("spectrum: %d samples, %d modes, residual %.2e", n, len(lam), resid)
    return SpectralData(lam, w, resid)


def _polish(t, y, lam, w, sigma=None, total_weight=None):
    k = len(lam)
    # a stiff extra row pins sum(w) when the total weight is known
    pin = np.zeros(0) if total_weight is None else np.array([PIN_STIFFNESS])
    if sigma is None:
        inv_re = inv_im = np.ones(len(t))
    else:
        sigma = np.asarray(sigma, dtype=complex)
        inv_re = 1.0 / np.maximum(sigma.real, 1e-12)
        inv_im = 1.0 / np.maximum(sigma.imag, 1e-12)

    def residual(p):
        r = np.exp(-1j * np.outer(t, p[:k])) @ p[k:] - y
        extra = pin * (np.sum(p[k:]) - (total_weight or 0.0))
        return np.concatenate([r.real * inv_re, r.imag * inv_im, extra])

    def jac(p):
        e = np.exp(-1j * np.outer(t, p[:k]))
        d_lam = -1j * t[:, None] * e * p[k:]
        full = np.hstack([d_lam, e])
        rows = [full.real * inv_re[:, None], full.imag * inv_im[:, None]]
        if len(pin):
            rows.append(np.concatenate([np.zeros(k), np.full(k, pin[0])])[None, :])
        return np.vstack(rows)

    sol = least_squares(residual, np.concatenate([lam, w]), jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return sol.x[:k], sol.x[k:], 2.0 * sol.cost


def reconstruct_jacobi(data: SpectralData, breakdown_tol: float = 1e-12) -> ModelChainSpec:
    """Tridiagonal matrix with spectrum ``eigenvalues`` and first-site weights ``weights``.

    Lanczos on ``diag(lambda)`` from the start vector ``sqrt(w)``, fully
    reorthogonalised.  Couplings come out positive.
    """
    lam = np.asarray(data.eigenvalues, dtype=float)
    w = np.asarray(data.weights, dtype=float)
    if np.any(w <= 0):
        raise NonPositiveWeights("weights must be positive")
    if len(lam) > 1 and np.min(np.diff(np.sort(lam))) < 1e-12:
        raise Breakdown("degenerate eigenvalues cannot come from a connected chain")
    n = len(lam)
    q = np.sqrt(w / w.sum())
    basis = [q]
    alpha, beta = [], []
    for j in range(n):
        v = lam * basis[j]
        alpha.append(float(basis[j] @ v))
        if j == n - 1:
            break
        v = v - alpha[j] * basis[j] - (beta[j - 1] * basis[j - 1] if j else 0.0)
        for u in basis:
            v -= (u @ v) * u
        b = float(np.linalg.norm(v))
        if b < breakdown_tol:
            raise Breakdown(f"Lanczos broke down at step {j + 1} of {n}")
        beta.append(b)
        basis.append(v / b)
    return ModelChainSpec(tuple(beta), tuple(alpha))


@dataclass
class TomographyReport:
    model: ModelChainSpec
    spectrum: SpectralData
    dt: float
    n_points: int
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "J": list(self.model.couplings),
            "B_eff": list(self.model.effective_fields),
            "eigenvalues": self.spectrum.eigenvalues.tolist(),
            "weights": self.spectrum.weights.tolist(),
            "residual": self.spectrum.residual,
            "dt": self.dt,
            "n_points": self.n_points,
        }


def run_tomography(
    box, dt: float = 0.05, n_points: int | None = None, max_points: int | None = None
) -> TomographyReport:
    """Tomography of the effective chain behind ``box`` from its survival amplitude.

    A first pass on the given grid locates the modes; the grid is then adapted so
    the step resolves the largest frequency and the window covers several
    periods of the smallest gap.  Sampled data uses longer grids by default:
    the estimator error falls with the total number of shots.
    """
    sampled = getattr(box, "mode", "exact") == "sampled"
    if n_points is None:
        n_points = 30000 if sampled else 400
    if max_points is None:
        max_points = 60000 if sampled else 4000
    history = []
    spectrum = None
    for _ in range(3):
        times = dt * np.arange(n_points)
        f = box.query_survival(times)
        if sampled:
            # binomial spread of each quadrature, floored to keep weights finite
            sd_re = np.sqrt(np.maximum(1.0 - f.values.real**2, 1.0 / box.shots) / box.shots)
            sd_im = np.sqrt(np.maximum(1.0 - f.values.imag**2, 1.0 / box.shots) / box.shots)
            spectrum = estimate_spectrum(f, sigma=sd_re + 1j * sd_im, total_weight=1.0)
        else:
            spectrum = estimate_spectrum(f)
        history.append({"dt": dt, "n_points": n_points, "modes": len(spectrum), "residual": spectrum.residual})
        lam = spectrum.eigenvalues
        new_dt = min(dt, 0.4 * np.pi / max(np.max(np.abs(lam)), 1e-3))
        gap = np.min(np.diff(lam)) if len(lam) > 1 else 1.0
        window = 4 * np.pi / max(gap, 1e-3)
        new_points = int(min(max_points, max(n_points, np.ceil(window / new_dt))))
        if np.isclose(new_dt, dt) and new_points <= n_points:
            break
        dt, n_points = new_dt, new_points
    model = reconstruct_jacobi(spectrum)
    return TomographyReport(model, spectrum, dt, n_points, history)


def cramer_rao_bound(model: ModelChainSpec, dt: float, n_points: int, shots: int, step: float = 1e-6) -> np.ndarray:
    """Standard-deviation floor on ``(J, B')`` for an unbiased sampled-mode estimate.

    Each grid point contributes the binomial Fisher information of both
    quadratures of ``f``; derivatives are central differences of the forward map.
    """
    t = dt * np.arange(n_points)
    p = np.concatenate([model.couplings, model.effective_fields])
    k = len(model.couplings)

    def amp(q):
        return spectral_data(ModelChainSpec(tuple(q[:k]), tuple(q[k:]))).amplitude(t)

    f0 = amp(p)
    jac = []
    for i in range(len(p)):
        dp = np.zeros_like(p)
        dp[i] = step
        jac.append((amp(p + dp) - amp(p - dp)) / (2 * step))
    d = np.array(jac).T
    var_re = np.maximum(1 - f0.real**2, 1.0 / shots) / shots
    var_im = np.maximum(1 - f0.imag**2, 1.0 / shots) / shots
    fisher = (d.real.T / var_re) @ d.real + (d.imag.T / var_im) @ d.imag
    return np.sqrt(np.diag(np.linalg.inv(fisher)))
