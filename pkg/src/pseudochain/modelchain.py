"""Reference dynamics of the linear model chain.

``heisenberg_series`` fills the two coefficient ladders of the Heisenberg
expansion of ``X_1(t)`` under the linear chain::

    delta[i][j] = (-1)^i     (J_{i-1} delta[i-1][j-1] + J_i delta[i+1][j-1] + B'_i gamma[i][j-1])
    gamma[i][j] = (-1)^(i+1) (J_{i-1} gamma[i-1][j-1] + J_i gamma[i+1][j-1] + B'_i delta[i][j-1])

with one-based sites, ``delta[1][0] = 1`` and every other initial entry zero.
Out-of-range couplings and table entries count as zero.  The ``alpha_1`` and
``beta_1`` polynomials built from the first row are the ``g_X`` and ``g_Y``
correlators of the chain, up to the stored convention factors (both 1 after
checking against exact traces).

Arithmetic is generic: integer or ``Fraction`` inputs give exact rational
tables, floats give floats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
import scipy.sparse as sp

from .dynamics import SeriesCoefficients
from .topology import ModelChainSpec

# Factors relating the recursion above to the exact-trace correlators:
# g_X = ALPHA_CONVENTION * alpha_1 and g_Y = BETA_CONVENTION * beta_1.
# Checked order by order on random chains; no correction was needed.
ALPHA_CONVENTION = 1
BETA_CONVENTION = 1


def oes_matrix(model: ModelChainSpec) -> sp.csr_matrix:
    """Tridiagonal one-excitation matrix: diagonal ``B'_i``, off-diagonal ``J_i``."""
    j = np.asarray(model.couplings, dtype=float)
    b = np.asarray(model.effective_fields, dtype=float)
    return sp.diags([j, b, j], [-1, 0, 1], shape=(len(b), len(b))).tocsr()


@dataclass(frozen=True)
class HeisenbergSeries:
    max_order: int
    delta: tuple[tuple, ...]  # delta[i][j], zero-based site i
    gamma: tuple[tuple, ...]

    @property
    def n_sites(self) -> int:
        return len(self.delta)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Rational) for row in self.delta for v in row)

    def alpha_coefficients(self, site: int = 0) -> list:
        """Taylor coefficients ``delta[site][j] / j!`` of ``alpha_{site+1}(t)``."""
        return [_div(d, math.factorial(j)) for j, d in enumerate(self.delta[site])]

    def beta_coefficients(self, site: int = 0) -> list:
        return [_div(g, math.factorial(j)) for j, g in enumerate(self.gamma[site])]

    def alpha(self, t, site: int = 0):
        return np.polynomial.polynomial.polyval(t, [float(c) for c in self.alpha_coefficients(site)])

    def beta(self, t, site: int = 0):
        return np.polynomial.polynomial.polyval(t, [float(c) for c in self.beta_coefficients(site)])

    def correlators(self) -> tuple[SeriesCoefficients, SeriesCoefficients]:
        """``(g_X, g_Y)`` coefficient series implied by the first site's ladders."""
        gx = [float(ALPHA_CONVENTION * c) for c in self.alpha_coefficients(0)]
        gy = [float(BETA_CONVENTION * c) for c in self.beta_coefficients(0)]
        return SeriesCoefficients(gx, "g_X from recursion"), SeriesCoefficients(gy, "g_Y from recursion")

    def to_json(self) -> str:
        def enc(v):
            return str(v) if isinstance(v, Fraction) else v

        return json.dumps(
            {
                "max_order": self.max_order,
                "delta": [[enc(v) for v in row] for row in self.delta],
                "gamma": [[enc(v) for v in row] for row in self.gamma],
            }
        )


def _div(a, n: int):
    if isinstance(a, Rational):
        return Fraction(a, n)
    return a / n


def heisenberg_series(model: ModelChainSpec, max_order: int) -> HeisenbergSeries:
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    n = model.n_sites
    couplings = list(model.couplings)
    fields = list(model.effective_fields)
    zero = 0 * (couplings[0] if couplings else fields[0])

    def coupling(i):  # J_i between one-based sites i and i+1
        return couplings[i - 1] if 1 <= i <= n - 1 else zero

    delta = [[zero] * (max_order + 1) for _ in range(n + 2)]
    gamma = [[zero] * (max_order + 1) for _ in range(n + 2)]
    delta[1][0] = 1 + zero
    for j in range(1, max_order + 1):
        for i in range(1, n + 1):
            sign = -1 if i % 2 else 1
            b = fields[i - 1]
            delta[i][j] = sign * (
                coupling(i - 1) * delta[i - 1][j - 1] + coupling(i) * delta[i + 1][j - 1] + b * gamma[i][j - 1]
            )
            gamma[i][j] = -sign * (
                coupling(i - 1) * gamma[i - 1][j - 1] + coupling(i) * gamma[i + 1][j - 1] + b * delta[i][j - 1]
            )
    return HeisenbergSeries(
        max_order,
        tuple(tuple(row) for row in delta[1 : n + 1]),
        tuple(tuple(row) for row in gamma[1 : n + 1]),
    )
