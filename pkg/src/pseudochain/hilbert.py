"""Excitation-number sectors, Hamiltonians and end-site Pauli operators.

Bit ``p`` of a basis mask is 1 when spin ``p`` is excited (state |1>, Z = -1).
The fully magnetized state is the all-zero mask and has energy 0.

Both Hamiltonians are real symmetric in this basis:

* a hop between coupled spins ``p`` and ``q`` has amplitude ``w_pq``
  (``J_i / sqrt(N_i N_{i+1})`` between neighbouring blocks, ``K_i`` inside
  block ``i``, ``J_i`` on a plain linear chain);
* the diagonal is the sum of on-site fields over excited spins.
"""

from __future__ import annotations

import io

from dataclasses import dataclass
from functools import lru_cache
from math import comb, sqrt
from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp

from .errors import CapExceeded, OutOfRange
from .topology import ModelChainSpec, PseudoChainSpec, SiteMap, validate

FULL_SPACE_MAX_SPINS = 22
SECTOR_MAX_DIM = 5_000_000
ZERO_TOL = 1e-15

ChainLike = Union[PseudoChainSpec, ModelChainSpec]


@dataclass(frozen=True)
class SectorBasis:
    n_spins: int
    n_excitations: int
    states: np.ndarray  # ascending uint64 masks

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, masks) -> np.ndarray:
        """Positions of ``masks`` in this basis (vectorised lookup)."""
        masks = np.asarray(masks, dtype=np.uint64)
        pos = np.searchsorted(self.states, masks)
        if np.any(pos >= self.dim) or np.any(self.states[np.minimum(pos, self.dim - 1)] != masks):
            raise KeyError("mask not in sector")
        return pos

    def rank(self, mask: int) -> int:
        """Combinatorial-number-system rank; equals the position in ``states``."""
        if bin(mask).count("1") != self.n_excitations or mask >> self.n_spins:
            raise KeyError(f"mask {mask:#b} not in sector ({self.n_spins}, {self.n_excitations})")
        r, j, p = 0, 0, 0
        while mask:
            if mask & 1:
                j += 1
                r += comb(p, j)
            mask >>= 1
            p += 1
        return r

    def unrank(self, r: int) -> int:
        if not 0 <= r < self.dim:
            raise KeyError(f"rank {r} out of range")
        mask = 0
        for j in range(self.n_excitations, 0, -1):
            p = j - 1
            while comb(p + 1, j) <= r:
                p += 1
            mask |= 1 << p
            r -= comb(p, j)
        return mask

    def basis_vector(self, mask: int) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.rank(mask)] = 1.0
        return v


@lru_cache(maxsize=64)
def enumerate_sector(n_spins: int, n_excitations: int) -> SectorBasis:
    """All ``n_spins``-bit masks with ``n_excitations`` set bits, ascending."""
    if n_spins < 0 or not 0 <= n_excitations <= n_spins:
        raise OutOfRange(f"need 0 <= k <= M, got M={n_spins}, k={n_excitations}")
    dim = comb(n_spins, n_excitations)
    if dim > SECTOR_MAX_DIM:
        raise CapExceeded(f"sector ({n_spins}, {n_excitations}) has dimension {dim} > {SECTOR_MAX_DIM}")
    states = np.empty(dim, dtype=np.uint64)
    if n_excitations == 0:
        states[0] = 0
    else:
        # Gosper's hack walks k-subsets in ascending numeric order
        x = (1 << n_excitations) - 1
        for i in range(dim):
            states[i] = x
            u = x & -x
            v = x + u
            x = v + (((v ^ x) // u) >> 2)
    states.setflags(write=False)
    return SectorBasis(n_spins, n_excitations, states)


def _as_pseudo(spec: ChainLike) -> PseudoChainSpec:
    if isinstance(spec, ModelChainSpec):
        return spec.as_pseudo_chain()
    validate(spec)
    return spec


def couplings_and_fields(spec: ChainLike) -> tuple[list[tuple[int, int, float]], np.ndarray]:
    """Hop bonds ``(p, q, amplitude)`` with ``p < q`` and the per-spin field vector."""
    spec = _as_pseudo(spec)
    sites = SiteMap(spec.sizes)
    bonds = []
    for i, block in enumerate(spec.blocks):
        members = list(sites.block_sites(i))
        if block.size > 1 and block.intra_coupling != 0.0:
            for a in range(len(members)):
                for b in range(a + 1, len(members)):
                    bonds.append((members[a], members[b], float(block.intra_coupling)))
        if i + 1 < spec.n_blocks:
            j = spec.inter_couplings[i]
            if j != 0.0:
                w = j / sqrt(block.size * spec.blocks[i + 1].size)
                for p in members:
                    for q in sites.block_sites(i + 1):
                        bonds.append((p, q, w))
    fields = np.concatenate([np.full(b.size, b.field) for b in spec.blocks])
    return bonds, fields


def _hamiltonian_on(states: np.ndarray, bonds, fields: np.ndarray, lookup) -> sp.csr_matrix:
    dim = len(states)
    bits = ((states[:, None] >> np.arange(len(fields), dtype=np.uint64)) & np.uint64(1)).astype(float)
    diag = bits @ fields
    rows, cols, vals = [np.arange(dim)], [np.arange(dim)], [diag]
    for p, q, w in bonds:
        differ = ((states >> np.uint64(p)) ^ (states >> np.uint64(q))) & np.uint64(1)
        src = np.nonzero(differ)[0]
        if len(src) == 0:
            continue
        flipped = states[src] ^ np.uint64((1 << p) | (1 << q))
        rows.append(lookup(flipped))
        cols.append(src)
        vals.append(np.full(len(src), w))
    h = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    return _prune(h)


def _prune(op: sp.spmatrix) -> sp.csr_matrix:
    op = sp.csr_matrix(op)
    op.data[np.abs(op.data) <= ZERO_TOL] = 0.0
    op.eliminate_zeros()
    return op


def build_hamiltonian(spec: ChainLike, n_excitations: int) -> sp.csr_matrix:
    """Hamiltonian restricted to the sector with ``n_excitations`` excited spins."""
    spec = _as_pseudo(spec)
    basis = enumerate_sector(spec.n_spins, n_excitations)
    bonds, fields = couplings_and_fields(spec)
    return _hamiltonian_on(basis.states, bonds, fields, basis.index)


def build_full_hamiltonian(spec: ChainLike) -> sp.csr_matrix:
    """Hamiltonian on all 2^M states in plain binary order."""
    spec = _as_pseudo(spec)
    m = spec.n_spins
    if m > FULL_SPACE_MAX_SPINS:
        raise CapExceeded(f"full space of {m} spins exceeds the {FULL_SPACE_MAX_SPINS}-spin guard")
    bonds, fields = couplings_and_fields(spec)
    states = np.arange(2**m, dtype=np.uint64)
    return _hamiltonian_on(states, bonds, fields, lambda masks: masks.astype(np.int64))


def single_excitation_state(spec: ChainLike, site: int) -> np.ndarray:
    spec = _as_pseudo(spec)
    return enumerate_sector(spec.n_spins, 1).basis_vector(1 << site)


def end_pair_state(spec: ChainLike) -> np.ndarray:
    """Two-excitation state with both end spins excited, |10...01>."""
    spec = _as_pseudo(spec)
    m = spec.n_spins
    return enumerate_sector(m, 2).basis_vector(1 | (1 << (m - 1)))


def end_operator(n_spins: int, which: str, site: int, k_from: int, k_to: int | None = None) -> sp.csr_matrix:
    """Block of a single-site Pauli operator mapping sector ``k_from`` to ``k_to``.

    ``site`` must be an end spin (0 or ``n_spins - 1``).  X and Y couple
    neighbouring sectors; Z is diagonal.  Omitting ``k_to`` picks the raising
    block for X/Y and the diagonal block for Z.
    """
    which = which.upper()
    if which not in ("X", "Y", "Z"):
        raise OutOfRange(f"unknown Pauli operator {which!r}")
    if site not in (0, n_spins - 1):
        raise OutOfRange(f"site {site} is not an end spin of a {n_spins}-spin system")
    if k_to is None:
        k_to = k_from if which == "Z" else k_from + 1
    src = enumerate_sector(n_spins, k_from)
    dst = enumerate_sector(n_spins, k_to) if 0 <= k_to <= n_spins else None
    if dst is None:
        raise OutOfRange(f"target sector {k_to} does not exist for {n_spins} spins")
    bit = np.uint64(1 << site)
    occupied = (src.states & bit) != 0
    if which == "Z":
        if k_to != k_from:
            return sp.csr_matrix((dst.dim, src.dim))
        return sp.diags(np.where(occupied, -1.0, 1.0)).tocsr()
    if k_to == k_from + 1:
        cols = np.nonzero(~occupied)[0]
        amp = 1.0 if which == "X" else 1j
    elif k_to == k_from - 1:
        cols = np.nonzero(occupied)[0]
        amp = 1.0 if which == "X" else -1j
    else:
        return sp.csr_matrix((dst.dim, src.dim))
    rows = dst.index(src.states[cols] ^ bit)
    dtype = float if which == "X" else complex
    return sp.csr_matrix((np.full(len(cols), amp, dtype=dtype), (rows, cols)), shape=(dst.dim, src.dim))


def dump_operator(op: sp.spmatrix, path: str | Path) -> None:
    """Write ``op`` as coordinate text: a ``# dim`` header then ``row col re im`` lines."""
    coo = sp.coo_matrix(op)
    with open(path, "w") as fh:
        fh.write(f"# dim {coo.shape[0]} {coo.shape[1]}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            v = complex(v)
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


def load_operator(path: str | Path) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline().split()
        shape = (int(header[2]), int(header[3]))
        body = fh.read()
    if not body.strip():
        return sp.csr_matrix(shape)
    data = np.loadtxt(io.StringIO(body), ndmin=2)
    vals = data[:, 2] + 1j * data[:, 3]
    if not np.any(vals.imag):
        vals = vals.real
    return sp.csr_matrix((vals, (data[:, 0].astype(int), data[:, 1].astype(int))), shape=shape)
