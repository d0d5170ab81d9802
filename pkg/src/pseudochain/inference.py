"""Structure finding from end-site data.

Two probes sit on top of a tomographed model chain ``(J, B')``:

* the two-excitation probe compares the return probability of the
  both-ends-excited state with the model's.  The first surviving difference is
  at order ``2N - 2`` and equals ``2 (-1)^(N-1) D / (2N-2)!`` with
  ``D = 2 prod(J^2) sum_i binom(N-1, i-1)^2 (N_i - 1) / N_i``
  (``pattern_difference``), independent of fields and intra-block couplings;
* the mixed-state probe compares the ``g_X``/``g_Y`` correlators.  The first
  oversized block ``i`` (one-based, counted from the probed end) shows up at
  order ``2i - 1`` in ``g_Y`` and ``2i`` in ``g_X``, with coefficients given
  by ``odd_onset_coefficient`` and ``even_onset_coefficient``.

Block positions in this module are one-based (``block_index``) because the
onset orders are expressed through them; splicing converts to the zero-based
indices of ``topology``.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .errors import (
    AmbiguousStructure,
    EmptySelection,
    FitIllConditioned,
    NoConsistentSolution,
    NoSignal,
    OutOfRange,
)
from .modelchain import heisenberg_series
from .tomography import TomographyReport, run_tomography
from .topology import BlockSpec, ModelChainSpec, PseudoChainSpec, validate

log = logging.getLogger(__name__)

EXACT_SIGNAL_TOL = 1e-9  # relative to the natural scale Lambda^n / n! of order n
SOLVE_RTOL = 1e-6
SIGNAL_SIGMAS = 5.0
SELECT_RTOL = 1e-9
NUISANCE_TERMS = 2


# ---------------------------------------------------------------------------
# two-excitation probe


def pattern_difference(sizes, couplings) -> float:
    """``D`` for block sizes ``sizes`` (end blocks 1) and inter-block couplings."""
    sizes = tuple(int(s) for s in sizes)
    n = len(sizes)
    if len(couplings) != n - 1:
        raise OutOfRange(f"{n} blocks need {n - 1} couplings")
    prod = math.prod(float(j) ** 2 for j in couplings)
    return 2.0 * prod * sum(math.comb(n - 1, i) ** 2 * (s - 1) / s for i, s in enumerate(sizes))


@dataclass(frozen=True)
class CandidateTable:
    couplings: tuple[float, ...]
    entries: dict

    def to_dict(self) -> dict:
        return {"J": list(self.couplings), "entries": [{"sizes": list(k), "D": v} for k, v in self.entries.items()]}


def build_candidate_table(model: ModelChainSpec, size_bound: int = 4) -> CandidateTable:
    """Predicted ``D`` for every block pattern over the model's sites with inner sizes up to ``size_bound``."""
    if size_bound < 2:
        raise OutOfRange("size_bound must be at least 2")
    n = model.n_sites
    entries = {}
    for inner in itertools.product(range(1, size_bound + 1), repeat=max(n - 2, 0)):
        sizes = (1,) + inner + (1,) if n >= 2 else (1,)
        entries[sizes] = pattern_difference(sizes, model.couplings)
    return CandidateTable(tuple(model.couplings), entries)


@dataclass(frozen=True)
class CandidateSelection:
    ranked: list  # (sizes, D) pairs, closest first
    measured: float
    rationale: str = (
        "finite-window fits underestimate D: the next orders enter with the opposite sign, "
        "so admissible patterns lie at or below the measured value"
    )

    @property
    def patterns(self) -> list:
        return [p for p, _ in self.ranked]


def select_candidates(table: CandidateTable, measured: float) -> CandidateSelection:
    if not table.entries:
        raise EmptySelection("candidate table is empty")
    bound = abs(measured) * (1 + SELECT_RTOL) + 1e-12
    admissible = [(p, d) for p, d in table.entries.items() if d <= bound]
    if not admissible:
        raise EmptySelection(f"every tabulated value exceeds the measured {measured:.6g}")
    admissible.sort(key=lambda pd: (abs(measured) - pd[1], pd[0]))
    return CandidateSelection(admissible, float(measured))


@dataclass(frozen=True)
class TwoExcitationDifference:
    order: int
    coefficient: float
    uncertainty: float
    lower_orders: float  # largest magnitude below ``order``; zero up to noise

    @property
    def D(self) -> float:
        """Coefficient converted to the table scale."""
        return self.coefficient * math.factorial(self.order) / 2 * (-1) ** (self.order // 2)


def _fit_powers(t, y, sigma, powers, n_boot: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Weighted least squares on monomials ``t^p`` with pairs-bootstrap spreads."""
    t = np.asarray(t, dtype=float)
    if len(t) <= len(powers) or np.ptp(t) <= 0:
        raise FitIllConditioned("too few distinct sample times for the fit")
    scale = np.max(np.abs(t))
    design = (t[:, None] / scale) ** np.asarray(powers)[None, :]
    wts = 1.0 / np.asarray(sigma, dtype=float)
    a = design * wts[:, None]
    if np.linalg.cond(a) > 1e12:
        raise FitIllConditioned("polynomial fit is ill-conditioned; shrink the degree or widen the window")
    unscale = scale ** -np.asarray(powers, dtype=float)
    coef = np.linalg.lstsq(a, y * wts, rcond=None)[0] * unscale
    boots = []
    for _ in range(n_boot):
        idx = rng.integers(0, len(t), len(t))
        boots.append(np.linalg.lstsq(a[idx], (y * wts)[idx], rcond=None)[0] * unscale)
    spread = np.std(boots, axis=0, ddof=1) if n_boot > 1 else np.full(len(powers), np.nan)
    return coef, spread


def _max_coupling(model: ModelChainSpec) -> float:
    return max([abs(j) for j in model.couplings] + [1e-3])


def two_excitation_difference(
    box,
    model: ModelChainSpec,
    *,
    tmax: float | None = None,
    n_points: int = 200,
    n_boot: int = 200,
    seed: int | None = 0,
) -> TwoExcitationDifference:
    """Order-``2N - 2`` coefficient of measured minus model return probability."""
    n = model.n_sites
    if n < 2:
        raise OutOfRange("the two-excitation probe needs at least two sites")
    order = 2 * n - 2
    reference = model.as_pseudo_chain()
    if box.mode == "exact":
        diff = box.two_excitation_return_series(order) - dynamics.return_probability_series(reference, order)
        lower = max((abs(diff[k]) for k in range(order)), default=0.0)
        scale = max(1.0, abs(diff[order]))
        return TwoExcitationDifference(order, float(diff[order]), 1e-12 * scale, float(lower))
    if tmax is None:
        tmax = 1.0 / _max_coupling(model)
    if tmax <= 0:
        raise FitIllConditioned("fit window must be positive")
    t = np.linspace(tmax / n_points, tmax, n_points)
    measured = box.query_two_excitation_return(t).values
    model_p = dynamics.return_probability(reference, t).values
    sigma = np.sqrt(np.maximum(measured * (1 - measured), 1.0 / box.shots) / box.shots)
    # the difference is even in t and starts at the target order
    powers = [order, order + 2, order + 4]
    coef, spread = _fit_powers(t, measured - model_p, sigma, powers, n_boot, np.random.default_rng(seed))
    return TwoExcitationDifference(order, float(coef[0]), float(spread[0]), float("nan"))


# ---------------------------------------------------------------------------
# onset laws of the mixed-state probe


def odd_onset_coefficient(model: ModelChainSpec, block_index: int, size: int, intra: float) -> float:
    """Order ``2i - 1`` coefficient of the ``g_Y`` difference for a first oversized block ``i``."""
    i = block_index
    prod = math.prod(j**2 for j in model.couplings[: i - 1])
    return (-1) ** i * prod * (size - 1) * intra / math.factorial(2 * i - 1)


def even_onset_coefficient(model: ModelChainSpec, block_index: int, size: int, intra: float) -> float:
    """Order ``2i`` coefficient of the ``g_X`` difference for a first oversized block ``i``.

    The bracket ``3 J_{i-1}^2 - J_i^2 + N^2 K^2 - 2 N K sum_{j<=i} B'_j`` is the
    calibrated form (see ``calibration``).
    """
    i, n, k = block_index, size, intra
    j = model.couplings
    prod = math.prod(c**2 for c in j[: i - 1])
    field_sum = sum(model.effective_fields[:i])
    bracket = 3 * j[i - 2] ** 2 - j[i - 1] ** 2 + n**2 * k**2 - 2 * n * k * field_sum
    return (-1) ** i * prod * (n - 1) / n * bracket / math.factorial(2 * i)


def quoted_even_bracket(model: ModelChainSpec, block_index: int, size: int, intra: float) -> float:
    """The bracket in the form usually quoted for this coefficient, kept for comparison."""
    i, n, k = block_index, size, intra
    j = model.couplings
    field_sum = sum(model.effective_fields[:i])
    return 3 * j[i - 2] ** 2 - j[i - 1] ** 2 + n * k * ((3 * n - 2) * k - 2 * field_sum)


# ---------------------------------------------------------------------------
# mixed-state probe


@dataclass(frozen=True)
class ProbeResult:
    block_index: int
    c_odd: float
    c_even: float
    sigma_odd: float = 0.0
    sigma_even: float = 0.0

    @property
    def onset_order(self) -> int:
        return 2 * self.block_index - 1 if self.c_odd != 0 else 2 * self.block_index

    def to_dict(self) -> dict:
        return {
            "block_index": self.block_index,
            "c_odd": self.c_odd,
            "c_even": self.c_even,
            "sigma_odd": self.sigma_odd,
            "sigma_even": self.sigma_even,
        }


def _reference_series(reference, max_order: int):
    if isinstance(reference, ModelChainSpec):
        return heisenberg_series(reference, max_order).correlators()
    return dynamics.correlator_series(reference, max_order)


def _natural_scale(reference) -> float:
    spec = reference.as_pseudo_chain() if isinstance(reference, ModelChainSpec) else reference
    j = max([abs(c) for c in spec.inter_couplings] + [0.0])
    b = max(abs(x) for x in spec.fields)
    k = max(abs(blk.intra_coupling) * blk.size for blk in spec.blocks)
    return max(1.0, 2 * j + b + k)


def _sites(reference) -> int:
    return reference.n_sites if isinstance(reference, ModelChainSpec) else reference.n_blocks


def mixed_probe(
    box,
    reference,
    *,
    measured=None,
    tmax: float | None = None,
    n_points: int = 200,
    n_boot: int = 200,
    seed: int | None = 0,
) -> ProbeResult:
    """First block at which the box's correlators leave those of ``reference``.

    ``reference`` is the model chain or the current pseudo-chain estimate.  In
    exact mode the Taylor coefficients are compared directly (``measured`` may
    carry the box's ``(g_X, g_Y)`` series to avoid recomputing them); in
    sampled mode polynomials are fitted to the sampled differences.
    """
    n = _sites(reference)
    if n < 3:
        raise NoSignal("chains shorter than three sites cannot hold an inner block")
    if box.mode == "exact":
        return _mixed_probe_exact(box, reference, measured)
    return _mixed_probe_sampled(box, reference, tmax, n_points, n_boot, seed)


def _mixed_probe_exact(box, reference, measured) -> ProbeResult:
    n = _sites(reference)
    order = 2 * n
    if measured is None or measured[0].max_order < order:
        measured = box.mixed_correlator_series(order)
    ref_x, ref_y = _reference_series(reference, order)
    dx, dy = measured[0] - ref_x, measured[1] - ref_y
    lam = _natural_scale(reference)
    for k in range(1, order + 1):
        tol = EXACT_SIGNAL_TOL * lam**k / math.factorial(k)
        d = dy[k] if k % 2 else dx[k]
        if abs(d) > tol:
            i = (k + 1) // 2
            return ProbeResult(i, float(dy[2 * i - 1]), float(dx[2 * i]), tol, tol)
    raise NoSignal("correlator differences vanish through order %d" % order)


def _mixed_probe_sampled(box, reference, tmax, n_points, n_boot, seed) -> ProbeResult:
    spec = reference.as_pseudo_chain() if isinstance(reference, ModelChainSpec) else reference
    if tmax is None:
        tmax = 0.3 / max([abs(j) for j in spec.inter_couplings] + [1e-3])
    t = np.linspace(tmax / n_points, tmax, n_points)
    ref_x, ref_y = dynamics.mixed_correlators(spec, t)
    gx = box.query_mixed_correlator("X", t).values
    gy = box.query_mixed_correlator("Y", t).values
    sx = np.sqrt(np.maximum(1 - gx**2, 1.0 / box.shots) / box.shots)
    sy = np.sqrt(np.maximum(1 - gy**2, 1.0 / box.shots) / box.shots)
    rng = np.random.default_rng(seed)
    for i in range(1, _sites(reference) - 1 + 1):
        # two powers beyond the tested one absorb the next terms of the series
        odd_powers = list(range(1, 2 * i + 2 + 2 * NUISANCE_TERMS, 2))
        even_powers = list(range(2, 2 * i + 3 + 2 * NUISANCE_TERMS, 2))
        cy, ey = _fit_powers(t, gy - ref_y.values, sy, odd_powers, n_boot, rng)
        cx, ex = _fit_powers(t, gx - ref_x.values, sx, even_powers, n_boot, rng)
        odd, even = cy[i - 1], cx[i - 1]
        if abs(odd) > SIGNAL_SIGMAS * ey[i - 1] or abs(even) > SIGNAL_SIGMAS * ex[i - 1]:
            return ProbeResult(i, float(odd), float(even), float(ey[i - 1]), float(ex[i - 1]))
    raise NoSignal("no correlator difference above the noise floor")


# ---------------------------------------------------------------------------
# block solving


@dataclass(frozen=True)
class StructureHypothesis:
    block_index: int
    size: int
    intra_coupling: float
    residual_odd: float
    residual_even: float

    def __post_init__(self):
        if not (math.isfinite(self.residual_odd) and math.isfinite(self.residual_even)):
            raise NoConsistentSolution("hypothesis residuals must be finite")

    @property
    def residual(self) -> float:
        return max(self.residual_odd, self.residual_even)

    def to_dict(self) -> dict:
        return {
            "block_index": self.block_index,
            "N": self.size,
            "K": self.intra_coupling,
            "residual_odd": self.residual_odd,
            "residual_even": self.residual_even,
        }


def _relative(pred: float, meas: float, floor: float) -> float:
    return abs(pred - meas) / max(abs(meas), floor)


def _rank(hyps: list) -> list:
    # positive couplings win ties
    return sorted(hyps, key=lambda h: (round(h.residual, 12), h.intra_coupling < 0, h.size))


def solve_block(
    c_odd: float,
    c_even: float,
    model: ModelChainSpec,
    block_index: int,
    size_bound: int = 4,
    rtol: float = SOLVE_RTOL,
    floor: float = 1e-12,
) -> list[StructureHypothesis]:
    """Hypotheses ``(N_i, K_i)`` for the first oversized block at ``block_index``.

    ``K`` is solved from the odd coefficient for each ``N`` (both signs of the
    magnitude) and every candidate is scored against the even coefficient.
    Returns an empty list when both coefficients vanish.
    """
    i = block_index
    if not 2 <= i <= model.n_sites - 1:
        raise OutOfRange(f"block index {i} is not an inner site of a {model.n_sites}-site chain")
    if abs(c_odd) <= floor and abs(c_even) <= floor:
        return []
    prod = math.prod(j**2 for j in model.couplings[: i - 1])
    hyps = []
    for n in range(2, size_bound + 1):
        magnitude = abs(c_odd) * math.factorial(2 * i - 1) / (prod * (n - 1))
        for k in {magnitude, -magnitude}:
            odd = odd_onset_coefficient(model, i, n, k)
            even = even_onset_coefficient(model, i, n, k)
            h = StructureHypothesis(i, n, float(k), _relative(odd, c_odd, floor), _relative(even, c_even, floor))
            if h.residual <= rtol:
                hyps.append(h)
    if not hyps:
        raise NoConsistentSolution(f"no (N, K) with N <= {size_bound} reproduces both onset coefficients")
    return _rank(hyps)


def solve_block_by_simulation(
    c_odd: float,
    c_even: float,
    estimate: PseudoChainSpec,
    block_index: int,
    size_bound: int = 4,
    rtol: float = SOLVE_RTOL,
    floor: float = 1e-12,
) -> list[StructureHypothesis]:
    """Like ``solve_block`` for a block behind already-resolved blocks.

    The closed forms only hold for the first oversized block, so candidates
    are spliced into ``estimate`` and their onset coefficients simulated.
    For each ``N`` the odd coefficient is interpolated as a quadratic in ``K``
    to propose roots, which are then checked by direct simulation.
    """
    i = block_index
    if not 2 <= i <= estimate.n_blocks - 1:
        raise OutOfRange(f"block index {i} is not an inner block")
    if abs(c_odd) <= floor and abs(c_even) <= floor:
        return []
    b_eff = estimate.blocks[i - 1].effective_field
    scale = max([abs(j) for j in estimate.inter_couplings] + [1.0])

    def onset(spec):
        gx, gy = dynamics.correlator_series(spec, 2 * i)
        return np.array([gy[2 * i - 1], gx[2 * i]])

    base = onset(estimate)

    def coefficients(n, k):
        # the measured coefficients are differences against ``estimate``
        return onset(estimate.replace_block(i - 1, BlockSpec(n, b_eff - (n - 1) * k, k))) - base

    hyps = []
    for n in range(2, size_bound + 1):
        probes = np.array([-scale, 0.0, scale])
        samples = np.array([coefficients(n, k) for k in probes])
        roots = []
        for col, target in ((0, c_odd), (1, c_even)):
            poly = np.polyfit(probes, samples[:, col], 2)
            poly[-1] -= target
            if np.max(np.abs(poly[:-1])) * scale < floor:
                continue  # this coefficient does not depend on K
            roots = [r.real for r in np.roots(np.trim_zeros(poly, "f")) if abs(r.imag) <= 1e-9 * scale]
            break
        for k in roots:
            odd, even = coefficients(n, k)
            h = StructureHypothesis(i, n, float(k), _relative(odd, c_odd, floor), _relative(even, c_even, floor))
            if h.residual <= rtol:
                hyps.append(h)
    if not hyps:
        raise NoConsistentSolution(f"no (N, K) with N <= {size_bound} reproduces both onset coefficients")
    return _rank(hyps)


def splice(estimate: PseudoChainSpec, hypothesis: StructureHypothesis) -> PseudoChainSpec:
    """Insert a resolved block, keeping its effective field ``B' = B + (N - 1) K``."""
    idx = hypothesis.block_index - 1
    b_eff = estimate.blocks[idx].effective_field
    n, k = hypothesis.size, hypothesis.intra_coupling
    return estimate.replace_block(idx, BlockSpec(n, b_eff - (n - 1) * k, k))


# ---------------------------------------------------------------------------
# iteration


@dataclass
class InferenceReport:
    tomography: dict | None = None
    history: list = field(default_factory=list)
    hypotheses: list = field(default_factory=list)
    discrepancies: list = field(default_factory=list)
    verification: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    estimate: PseudoChainSpec | None = None
    status: str = "running"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "estimate": None if self.estimate is None else self.estimate.to_dict(),
            "tomography": self.tomography,
            "history": self.history,
            "hypotheses": self.hypotheses,
            "discrepancies": self.discrepancies,
            "verification": self.verification,
            "notes": self.notes,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


class StructureAmbiguity(AmbiguousStructure):
    """``AmbiguousStructure`` carrying the partial report."""

    def __init__(self, message: str, report: InferenceReport):
        super().__init__(message)
        self.report = report


def iterate_structure(
    box,
    size_bound: int = 4,
    tomography: TomographyReport | None = None,
) -> InferenceReport:
    """Tomography, then probe, solve and splice one block at a time until no signal remains.

    Exact-mode reference pipeline.  The final estimate is checked against the
    two-excitation probe and against the box's observables.
    """
    report = InferenceReport()
    if tomography is None:
        tomography = run_tomography(box)
    model = tomography.model
    report.tomography = tomography.to_dict()
    estimate = model.as_pseudo_chain()
    report.estimate = estimate
    measured = None
    if box.mode == "exact" and model.n_sites >= 3:
        measured = box.mixed_correlator_series(2 * model.n_sites)
    last_index = 1
    while True:
        try:
            probe = mixed_probe(box, estimate, measured=measured)
        except NoSignal:
            break
        entry = {"estimate": estimate.to_dict(), "probe": probe.to_dict()}
        report.history.append(entry)
        if probe.block_index <= last_index:
            report.status = "ambiguous"
            raise StructureAmbiguity(
                f"block {probe.block_index} still disagrees after it was resolved", report
            )
        upstream_resolved = any(b.size > 1 for b in estimate.blocks[: probe.block_index - 1])
        try:
            if upstream_resolved:
                hyps = solve_block_by_simulation(probe.c_odd, probe.c_even, estimate, probe.block_index, size_bound)
            else:
                hyps = solve_block(probe.c_odd, probe.c_even, model, probe.block_index, size_bound)
                _log_bracket(report, model, probe, hyps)
        except NoConsistentSolution as exc:
            report.status = "ambiguous"
            report.notes.append(f"block {probe.block_index}: {exc}; the size bound may be too small")
            raise StructureAmbiguity(str(exc), report) from exc
        entry["hypotheses"] = [h.to_dict() for h in hyps]
        report.hypotheses.append([h.to_dict() for h in hyps])
        distinct = {(h.size, round(h.intra_coupling, 9)) for h in hyps if h.residual <= hyps[0].residual + 1e-12}
        if len(distinct) > 1:
            report.status = "ambiguous"
            raise StructureAmbiguity(f"block {probe.block_index} admits {len(distinct)} solutions", report)
        estimate = splice(estimate, hyps[0])
        validate(estimate)
        report.estimate = estimate
        last_index = probe.block_index
    _verify(box, model, estimate, report, size_bound)
    report.status = "ok"
    return report


def _log_bracket(report, model, probe, hyps) -> None:
    """Record the calibrated and the commonly quoted even-order brackets side by side."""
    for h in hyps:
        i, n, k = h.block_index, h.size, h.intra_coupling
        prefactor = (-1) ** i * math.prod(j**2 for j in model.couplings[: i - 1]) * (n - 1) / n / math.factorial(2 * i)
        report.discrepancies.append(
            {
                "block_index": i,
                "measured_even": probe.c_even,
                "calibrated_even": even_onset_coefficient(model, i, n, k),
                "bracket_from_measurement": probe.c_even / prefactor,
                "bracket_quoted": quoted_even_bracket(model, i, n, k),
            }
        )


def _verify(box, model, estimate, report, size_bound) -> None:
    if model.n_sites >= 2:
        diff = two_excitation_difference(box, model)
        table = build_candidate_table(model, size_bound)
        predicted = pattern_difference(estimate.sizes, estimate.inter_couplings)
        try:
            selection = select_candidates(table, diff.D)
            top = selection.patterns[0]
        except EmptySelection:
            selection, top = None, None
        agree = math.isclose(diff.D, predicted, rel_tol=1e-6, abs_tol=1e-9)
        report.verification["two_excitation"] = {
            "measured_D": diff.D,
            "predicted_D": predicted,
            "consistent": agree,
            "table_top": None if top is None else list(top),
            "same_value_patterns": [
                list(p) for p, d in table.entries.items() if math.isclose(d, predicted, rel_tol=1e-9, abs_tol=1e-12)
            ],
        }
        mirrored = tuple(reversed(estimate.sizes))
        if mirrored != estimate.sizes:
            report.notes.append(
                f"the two-excitation probe cannot tell {estimate.sizes} from its mirror {mirrored}; "
                "the order comes from the one-sided mixed-state probe"
            )
        if not agree:
            report.notes.append("two-excitation probe disagrees with the recovered block sizes")
    report.verification["observables"] = observable_mismatch(box, estimate)


def observable_mismatch(box, estimate: PseudoChainSpec, n_times: int = 25) -> dict:
    """Largest deviations between ``estimate`` and the box on the end-site probes."""
    tmax = 4.0 / max([abs(j) for j in estimate.inter_couplings] + [1.0])
    t = np.linspace(0.0, tmax, n_times)
    out = {
        "survival": float(np.max(np.abs(box.query_survival(t).values - dynamics.survival_amplitude(estimate, t).values)))
    }
    if estimate.n_spins >= 2:
        out["two_excitation"] = float(
            np.max(np.abs(box.query_two_excitation_return(t).values - dynamics.return_probability(estimate, t).values))
        )
    if estimate.n_spins <= dynamics.TRACE_MAX_SPINS:
        ex, ey = dynamics.mixed_correlators(estimate, t)
        out["g_X"] = float(np.max(np.abs(box.query_mixed_correlator("X", t).values - ex.values)))
        out["g_Y"] = float(np.max(np.abs(box.query_mixed_correlator("Y", t).values - ey.values)))
    return out
