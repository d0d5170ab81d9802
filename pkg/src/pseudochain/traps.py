"""Trapped excitations: dark block states and the trap-flushing protocol.

A single excitation in block ``i`` decomposes into the block-symmetric state,
which couples to the rest of the chain, and ``N_i - 1`` dark states, which do
not.  A dark excitation is trapped; it changes how a later excitation injected
at the first spin propagates, so one-excitation transfer becomes a mixture of
two evolutions.  At a discrimination time the trapped branch delivers
(almost) nothing to the last spin, so detecting the excitation there rules
the trapped branch out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .dynamics import Propagator, TimeSeries
from .errors import NotABlock, OutOfRange
from .hilbert import build_hamiltonian, enumerate_sector
from .topology import PseudoChainSpec, SiteMap, validate

CERTIFY_TOL = 1e-12


def _block_sites(spec: PseudoChainSpec, block: int) -> range:
    validate(spec)
    if not 0 <= block < spec.n_blocks:
        raise OutOfRange(f"block {block} out of range")
    return SiteMap(spec.sizes).block_sites(block)


def dark_states(spec: PseudoChainSpec, block: int) -> np.ndarray:
    """Orthonormal one-excitation states of ``block`` orthogonal to its symmetric state.

    Rows are vectors in the one-excitation basis (one entry per spin), built
    from the Helmert contrasts ``(1, .., 1, -k, 0, ..) / sqrt(k (k + 1))``.
    """
    sites = _block_sites(spec, block)
    n = len(sites)
    if n < 2:
        raise NotABlock(f"block {block} holds a single spin and has no dark states")
    out = np.zeros((n - 1, spec.n_spins))
    for k in range(1, n):
        row = np.zeros(n)
        row[:k] = 1.0
        row[k] = -k
        out[k - 1, sites.start : sites.stop] = row / math.sqrt(k * (k + 1))
    return out


def symmetric_state(spec: PseudoChainSpec, block: int) -> np.ndarray:
    sites = _block_sites(spec, block)
    v = np.zeros(spec.n_spins)
    v[sites.start : sites.stop] = 1.0 / math.sqrt(len(sites))
    return v


def flip_decomposition(spec: PseudoChainSpec, block: int, member: int) -> tuple[float, float]:
    """(escape weight, trapped weight) of a bit flip on ``member`` of ``block``: (1/N, (N-1)/N)."""
    sites = _block_sites(spec, block)
    if not 0 <= member < len(sites):
        raise OutOfRange(f"member {member} out of range for block of size {len(sites)}")
    flip = np.zeros(spec.n_spins)
    flip[sites.start + member] = 1.0
    escape = float(symmetric_state(spec, block) @ flip) ** 2
    trapped = float(np.sum((dark_states(spec, block) @ flip) ** 2)) if len(sites) > 1 else 0.0
    return escape, trapped


@dataclass(frozen=True)
class TrapScenario:
    spec: PseudoChainSpec
    block: int
    trapped_state: np.ndarray  # one-excitation vector inside the block
    p: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise OutOfRange("trap occupation probability must lie in [0, 1]")
        v = np.asarray(self.trapped_state, dtype=float)
        sites = _block_sites(self.spec, self.block)
        outside = np.delete(v, list(sites))
        if np.any(np.abs(outside) > 1e-12):
            raise OutOfRange("trapped state must be supported on its block")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise OutOfRange("trapped state must be normalised")
        if abs(symmetric_state(self.spec, self.block) @ v) > 1e-12:
            raise OutOfRange("trapped state overlaps the block-symmetric state")
        object.__setattr__(self, "trapped_state", v)

    @classmethod
    def build(cls, spec: PseudoChainSpec, block: int, p: float = 0.5, rng=None) -> TrapScenario:
        """Scenario with the first dark state, or a uniformly random dark-space vector if ``rng`` is given."""
        dark = dark_states(spec, block)
        if rng is None or len(dark) == 1:
            v = dark[0]
        else:
            c = rng.standard_normal(len(dark))
            v = (c / np.linalg.norm(c)) @ dark
        return cls(spec, block, v, p)

    def trapped_branch_state(self) -> np.ndarray:
        """Two-excitation state: dark excitation in the block plus one injected at spin 0."""
        m = self.spec.n_spins
        basis = enumerate_sector(m, 2)
        psi = np.zeros(basis.dim)
        for site in np.nonzero(self.trapped_state)[0]:
            psi[basis.rank(1 | (1 << int(site)))] += self.trapped_state[site]
        return psi

    def untrapped_branch_state(self) -> np.ndarray:
        return enumerate_sector(self.spec.n_spins, 1).basis_vector(1)


@dataclass
class _BranchEvolution:
    scenario: TrapScenario
    _props: dict = field(default_factory=dict)

    def _prop(self, k: int) -> Propagator:
        if k not in self._props:
            self._props[k] = Propagator(build_hamiltonian(self.scenario.spec, k))
        return self._props[k]

    def _last_excited(self, k: int) -> np.ndarray:
        m = self.scenario.spec.n_spins
        states = enumerate_sector(m, k).states
        return ((states >> np.uint64(m - 1)) & np.uint64(1)) == 1

    def probabilities(self, times) -> tuple[np.ndarray, np.ndarray]:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        tr = self._prop(2).series(self.scenario.trapped_branch_state(), times)
        un = self._prop(1).series(self.scenario.untrapped_branch_state(), times)
        p_tr = np.sum(np.abs(tr[:, self._last_excited(2)]) ** 2, axis=1)
        p_un = np.sum(np.abs(un[:, self._last_excited(1)]) ** 2, axis=1)
        return p_tr, p_un


def branch_probabilities(scenario: TrapScenario, times) -> tuple[TimeSeries, TimeSeries]:
    """Probability that the last spin is excited, for the trapped and untrapped branches."""
    p_tr, p_un = _BranchEvolution(scenario).probabilities(times)
    return TimeSeries(times, p_tr), TimeSeries(times, p_un)


def transfer_probability_with_trap(scenario: TrapScenario, times) -> TimeSeries:
    """Mixture ``p * P_trapped + (1 - p) * P_untrapped`` of the two branches."""
    p_tr, p_un = _BranchEvolution(scenario).probabilities(times)
    return TimeSeries(times, scenario.p * p_tr + (1.0 - scenario.p) * p_un)


@dataclass(frozen=True)
class DiscriminationTime:
    t: float
    p_trapped: float
    p_untrapped: float

    @property
    def certifying(self) -> bool:
        """True when the trapped branch cannot produce a detection at ``t`` (numerically zero)."""
        return self.p_trapped <= CERTIFY_TOL


def find_discrimination_time(
    scenario: TrapScenario,
    window: tuple[float, float] = (0.0, 30.0),
    eps: float = 1e-3,
    theta: float = 0.2,
    n_grid: int = 3001,
) -> DiscriminationTime | None:
    """A time with ``P_trapped <= eps`` and ``P_untrapped >= theta``, or None.

    Dense grid scan for the feasible point with the widest margin
    ``P_untrapped - P_trapped``, then a bounded local refinement of that margin.
    """
    if not (0 < eps < 1 and 0 < theta < 1 and eps < theta):
        raise OutOfRange("need 0 < eps < theta < 1")
    lo, hi = window
    evo = _BranchEvolution(scenario)
    grid = np.linspace(lo, hi, n_grid)
    p_tr, p_un = evo.probabilities(grid)
    feasible = (p_tr <= eps) & (p_un >= theta)
    if not np.any(feasible):
        return None
    margin = np.where(feasible, p_un - p_tr, -np.inf)
    k = int(np.argmax(margin))
    best = DiscriminationTime(float(grid[k]), float(p_tr[k]), float(p_un[k]))
    step = grid[1] - grid[0] if n_grid > 1 else 0.0
    if step > 0:

        def neg_margin(t):
            a, b = evo.probabilities(t)
            return a[0] - b[0]

        res = minimize_scalar(
            neg_margin,
            bounds=(max(lo, grid[k] - step), min(hi, grid[k] + step)),
            method="bounded",
            options={"xatol": 1e-10},
        )
        a, b = evo.probabilities(res.x)
        if a[0] <= eps and b[0] >= theta and b[0] - a[0] > best.p_untrapped - best.p_trapped:
            best = DiscriminationTime(float(res.x), float(a[0]), float(b[0]))
    return best


# ---------------------------------------------------------------------------
# flushing protocol


def posterior_update(prior: float, outcome: int, p_trapped: float, p_untrapped: float) -> float:
    """Posterior that the trap is occupied after one Z measurement on the last spin.

    ``outcome == -1`` is a detection.  A trapped-branch detection probability
    at or below ``CERTIFY_TOL`` counts as an exact zero, so a detection
    certifies the untrapped branch.
    """
    a = 0.0 if p_trapped <= CERTIFY_TOL else p_trapped
    like_tr, like_un = (a, p_untrapped) if outcome == -1 else (1.0 - a, 1.0 - p_untrapped)
    num = prior * like_tr
    den = num + (1.0 - prior) * like_un
    if den == 0.0:
        return prior
    return num / den


@dataclass
class FlushResult:
    trapped: bool
    t_star: float
    outcomes: list[int]
    posteriors: list[float]

    def rows(self):
        return [(r + 1, o, q) for r, (o, q) in enumerate(zip(self.outcomes, self.posteriors))]

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("round,outcome,posterior\n")
            for r, o, q in self.rows():
                fh.write(f"{r},{o},{q:.17g}\n")


def flush_protocol(
    box,
    scenario: TrapScenario,
    rounds: int,
    discrimination: DiscriminationTime | None = None,
    trapped: bool | None = None,
) -> FlushResult:
    """Repeated inject-evolve-measure cycles with a Bayesian trap-occupancy posterior.

    The hidden branch is drawn from the prior ``scenario.p`` with the box's
    generator unless ``trapped`` fixes it.  Each round re-injects an excitation
    at the first spin, evolves for ``t*`` and measures Z on the last spin.
    """
    if discrimination is None:
        discrimination = find_discrimination_time(scenario)
        if discrimination is None:
            raise OutOfRange("no discrimination time in the default window")
    if trapped is None:
        trapped = bool(box.rng.random() < scenario.p)
    state, k = (
        (scenario.trapped_branch_state(), 2) if trapped else (scenario.untrapped_branch_state(), 1)
    )
    q = scenario.p
    outcomes, posteriors = [], []
    for _ in range(rounds):
        meas = box.measure_end_Z(state, k, discrimination.t)
        q = posterior_update(q, meas.outcome, discrimination.p_trapped, discrimination.p_untrapped)
        outcomes.append(meas.outcome)
        posteriors.append(q)
    return FlushResult(trapped, discrimination.t, outcomes, posteriors)


def flush_monte_carlo(box, scenario: TrapScenario, rounds: int, runs: int, discrimination=None) -> np.ndarray:
    """Posterior trajectories (``runs`` x ``rounds``) of independent protocol runs."""
    if discrimination is None:
        discrimination = find_discrimination_time(scenario)
    return np.array(
        [flush_protocol(box, scenario, rounds, discrimination).posteriors for _ in range(runs)]
    ).reshape(runs, rounds)


def flush_exact_statistics(prior: float, p_trapped: float, p_untrapped: float, rounds: int):
    """Exact mean and variance of the posterior after each round, by summing over detection counts.

    Returns ``(mean, var, certified)`` arrays of length ``rounds``; ``certified``
    is the probability that the posterior is exactly zero after that round.
    """
    a = 0.0 if p_trapped <= CERTIFY_TOL else p_trapped
    b = p_untrapped
    mean, var, cert = np.zeros(rounds), np.zeros(rounds), np.zeros(rounds)
    for r in range(1, rounds + 1):
        m1 = m2 = c = 0.0
        for d in range(r + 1):
            w_tr = prior * a**d * (1 - a) ** (r - d)
            w_un = (1 - prior) * b**d * (1 - b) ** (r - d)
            prob = math.comb(r, d) * (w_tr + w_un)
            if prob == 0.0:
                continue
            q = w_tr / (w_tr + w_un)
            m1 += prob * q
            m2 += prob * q * q
            if q == 0.0:
                c += prob
        mean[r - 1], var[r - 1], cert[r - 1] = m1, m2 - m1 * m1, c
    return mean, var, cert
