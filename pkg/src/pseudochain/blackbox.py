"""End-site access to a hidden pseudo-chain.

Inference code talks to the true system only through ``BlackBoxChain``:
preparations of the fully magnetized or maximally mixed state, evolution,
and measurements on the two end spins.  In ``exact`` mode every query returns
the ideal expectation value; in ``sampled`` mode each point is estimated from
``shots`` projective measurements drawn from a seeded generator.

Exact mode additionally hands out Taylor coefficients of its probe signals
(``*_series`` methods).  That is the idealised limit of fitting noiseless data
and is refused in sampled mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dynamics
from .dynamics import Propagator, SeriesCoefficients, TimeSeries
from .errors import PseudoChainError
from .hilbert import build_hamiltonian, enumerate_sector
from .topology import PseudoChainSpec, validate


class ModeError(PseudoChainError):
    pass


@dataclass(frozen=True)
class Measurement:
    outcome: int
    probabilities: dict
    state: np.ndarray


class BlackBoxChain:
    def __init__(self, hidden: PseudoChainSpec, mode: str = "exact", shots: int = 10**5, seed: int | None = None):
        validate(hidden)
        if mode not in ("exact", "sampled"):
            raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
        self.__hidden = hidden
        self.mode = mode
        self.shots = int(shots)
        self.rng = np.random.default_rng(seed)
        self.__propagators: dict[int, Propagator] = {}

    def __repr__(self) -> str:
        return f"BlackBoxChain(mode={self.mode!r}, shots={self.shots})"

    def _propagator(self, k: int) -> Propagator:
        if k not in self.__propagators:
            self.__propagators[k] = Propagator(build_hamiltonian(self.__hidden, k))
        return self.__propagators[k]

    def _require_exact(self, what: str) -> None:
        if self.mode != "exact":
            raise ModeError(f"{what} is only available in exact mode")

    def _estimate_mean(self, mean: np.ndarray) -> np.ndarray:
        """Average of ``shots`` +-1 outcomes whose expectation is ``mean``."""
        p_plus = np.clip((1.0 + np.asarray(mean)) / 2.0, 0.0, 1.0)
        return 2.0 * self.rng.binomial(self.shots, p_plus) / self.shots - 1.0

    # -- fully magnetized state, one injected excitation -------------------

    def query_survival(self, times) -> TimeSeries:
        """Complex return amplitude of an excitation injected at the first spin.

        The two quadratures are the X and Y expectations of the first spin after
        preparing it in (|0> + |1>)/sqrt(2).
        """
        exact = dynamics.survival_amplitude(self.__hidden, times)
        if self.mode == "exact":
            return exact
        re = self._estimate_mean(exact.values.real)
        im = self._estimate_mean(exact.values.imag)
        return TimeSeries(exact.times, re + 1j * im)

    # -- both ends excited ---------------------------------------------------

    def query_two_excitation_return(self, times) -> TimeSeries:
        exact = dynamics.return_probability(self.__hidden, times)
        if self.mode == "exact":
            return exact
        return TimeSeries(exact.times, self.rng.binomial(self.shots, exact.values) / self.shots)

    def two_excitation_return_series(self, max_order: int) -> SeriesCoefficients:
        self._require_exact("two_excitation_return_series")
        return dynamics.return_probability_series(self.__hidden, max_order)

    # -- maximally mixed state -------------------------------------------------

    def query_mixed_correlator(self, probe: str, times) -> TimeSeries:
        """Mean of ``a * b(t)``: ``a`` from X on spin 1 at time 0, ``b`` from ``probe`` on spin 1 at ``t``."""
        exact = dynamics.mixed_correlator(self.__hidden, probe, times)
        if self.mode == "exact":
            return exact
        return TimeSeries(exact.times, self._estimate_mean(exact.values))

    def mixed_correlator_series(self, max_order: int) -> tuple[SeriesCoefficients, SeriesCoefficients]:
        self._require_exact("mixed_correlator_series")
        return dynamics.correlator_series(self.__hidden, max_order)

    # -- trap experiments --------------------------------------------------------

    def sector_dim(self, k: int) -> int:
        return enumerate_sector(self.__hidden.n_spins, k).dim

    def measure_end_Z(self, state: np.ndarray, n_excitations: int, t: float) -> Measurement:
        """Evolve ``state`` (in the given sector) for ``t`` and measure Z on the last spin.

        Outcome -1 means the last spin is excited.  The returned state is the
        normalised post-measurement state.
        """
        m = self.__hidden.n_spins
        psi = self._propagator(n_excitations)(state, t)
        basis = enumerate_sector(m, n_excitations)
        excited = (basis.states >> np.uint64(m - 1)) & np.uint64(1) == 1
        p_minus = float(np.sum(np.abs(psi[excited]) ** 2))
        p_minus = min(max(p_minus, 0.0), 1.0)
        probs = {+1: 1.0 - p_minus, -1: p_minus}
        outcome = -1 if self.rng.random() < p_minus else +1
        keep = excited if outcome == -1 else ~excited
        post = np.where(keep, psi, 0.0)
        norm = np.linalg.norm(post)
        return Measurement(outcome, probs, post / norm if norm > 0 else post)
