"""Pseudo-chain and model-chain parameter records.

A pseudo-chain is a sequence of blocks; block ``i`` holds ``size`` spins that
all share the field ``field`` and are pairwise coupled by ``intra_coupling``.
Every member of block ``i`` couples to every member of block ``i + 1`` with
strength ``J_i / sqrt(N_i N_{i+1})``.  The end blocks are single spins.

Indices in this module are zero-based; ``n_blocks`` is the block count and
``n_spins`` the total number of physical spins.  The two are never mixed up.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EndBlockNotSingleton, LengthMismatch, NonFiniteParameter, ValidationError


@dataclass(frozen=True)
class BlockSpec:
    size: int = 1
    field: float = 0.0
    intra_coupling: float = 0.0

    @property
    def effective_field(self) -> float:
        return self.field + (self.size - 1) * self.intra_coupling


@dataclass(frozen=True)
class PseudoChainSpec:
    blocks: tuple[BlockSpec, ...]
    inter_couplings: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "inter_couplings", tuple(float(j) for j in self.inter_couplings))

    @classmethod
    def from_lists(
        cls,
        sizes: Sequence[int],
        couplings: Sequence[float],
        fields: Sequence[float] | None = None,
        intra: Sequence[float] | None = None,
    ) -> PseudoChainSpec:
        """Build a spec from parallel per-block lists (fields and K default to 0)."""
        n = len(sizes)
        fields = [0.0] * n if fields is None else list(fields)
        intra = [0.0] * n if intra is None else list(intra)
        if len(fields) != n or len(intra) != n:
            raise LengthMismatch("per-block lists must all have one entry per block")
        blocks = tuple(BlockSpec(int(s), float(b), float(k)) for s, b, k in zip(sizes, fields, intra))
        return cls(blocks, tuple(couplings))

    @classmethod
    def linear(cls, couplings: Sequence[float], fields: Sequence[float] | None = None) -> PseudoChainSpec:
        n = len(couplings) + 1
        return cls.from_lists([1] * n, couplings, fields)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def n_spins(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(b.size for b in self.blocks)

    @property
    def fields(self) -> tuple[float, ...]:
        return tuple(b.field for b in self.blocks)

    @property
    def intra_couplings(self) -> tuple[float, ...]:
        return tuple(b.intra_coupling for b in self.blocks)

    @property
    def is_linear(self) -> bool:
        return all(b.size == 1 for b in self.blocks)

    def replace_block(self, index: int, block: BlockSpec) -> PseudoChainSpec:
        blocks = list(self.blocks)
        blocks[index] = block
        return PseudoChainSpec(tuple(blocks), self.inter_couplings)

    def reversed(self) -> PseudoChainSpec:
        return PseudoChainSpec(tuple(reversed(self.blocks)), tuple(reversed(self.inter_couplings)))

    def to_dict(self) -> dict:
        return {
            "blocks": [{"n": b.size, "B": b.field, "K": b.intra_coupling} for b in self.blocks],
            "J": list(self.inter_couplings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> PseudoChainSpec:
        try:
            blocks = tuple(
                BlockSpec(int(b["n"]), float(b.get("B", 0.0)), float(b.get("K", 0.0))) for b in data["blocks"]
            )
            couplings = tuple(float(j) for j in data["J"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed spec document: {exc}") from exc
        spec = cls(blocks, couplings)
        validate(spec)
        return spec


@dataclass(frozen=True)
class ModelChainSpec:
    """Linear chain: hop amplitudes ``couplings[i]`` between sites i, i+1 and on-site ``effective_fields``."""

    couplings: tuple[float, ...]
    effective_fields: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "effective_fields", tuple(self.effective_fields))
        if len(self.effective_fields) < 1 or len(self.couplings) != len(self.effective_fields) - 1:
            raise LengthMismatch(
                f"model chain needs N fields and N-1 couplings, got {len(self.effective_fields)} "
                f"and {len(self.couplings)}"
            )
        _check_finite(self.couplings, "couplings")
        _check_finite(self.effective_fields, "effective_fields")

    @property
    def n_sites(self) -> int:
        return len(self.effective_fields)

    def as_pseudo_chain(self) -> PseudoChainSpec:
        """The same chain viewed as a pseudo-chain with singleton blocks."""
        return PseudoChainSpec.linear(tuple(float(j) for j in self.couplings),
                                      tuple(float(b) for b in self.effective_fields))

    def to_dict(self) -> dict:
        return {"J": [float(j) for j in self.couplings], "B_eff": [float(b) for b in self.effective_fields]}


def _check_finite(values: Iterable[float], what: str) -> None:
    for v in values:
        if not math.isfinite(float(v)):
            raise NonFiniteParameter(f"{what} contains a non-finite value: {v!r}")


def validate(spec: PseudoChainSpec) -> None:
    """Raise a ``ValidationError`` subclass unless ``spec`` is a well-formed pseudo-chain."""
    if spec.n_blocks < 1:
        raise LengthMismatch("a pseudo-chain needs at least one block")
    if len(spec.inter_couplings) != spec.n_blocks - 1:
        raise LengthMismatch(
            f"{spec.n_blocks} blocks need {spec.n_blocks - 1} inter-block couplings, "
            f"got {len(spec.inter_couplings)}"
        )
    for b in spec.blocks:
        if int(b.size) != b.size or b.size < 1:
            raise ValidationError(f"block size must be a positive integer, got {b.size!r}")
    if spec.blocks[0].size != 1 or spec.blocks[-1].size != 1:
        raise EndBlockNotSingleton(f"end blocks must hold a single spin, sizes are {spec.sizes}")
    _check_finite(spec.inter_couplings, "inter_couplings")
    _check_finite((b.field for b in spec.blocks), "fields")
    _check_finite((b.intra_coupling for b in spec.blocks), "intra_couplings")


def effective_model(spec: PseudoChainSpec) -> ModelChainSpec:
    """Linear chain with the same one-excitation end-to-end dynamics as ``spec``."""
    validate(spec)
    return ModelChainSpec(spec.inter_couplings, tuple(b.effective_field for b in spec.blocks))


@dataclass(frozen=True)
class SiteMap:
    """Block-major bijection between (block, member) pairs and flat spin indices."""

    sizes: tuple[int, ...]
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        offsets, acc = [], 0
        for s in self.sizes:
            offsets.append(acc)
            acc += s
        object.__setattr__(self, "offsets", tuple(offsets))

    @property
    def n_spins(self) -> int:
        return sum(self.sizes)

    def flatten(self, block: int, member: int) -> int:
        if not (0 <= block < len(self.sizes) and 0 <= member < self.sizes[block]):
            raise IndexError(f"no site ({block}, {member}) in blocks of sizes {self.sizes}")
        return self.offsets[block] + member

    def unflatten(self, site: int) -> tuple[int, int]:
        if not 0 <= site < self.n_spins:
            raise IndexError(f"site {site} out of range for {self.n_spins} spins")
        for b in range(len(self.sizes) - 1, -1, -1):
            if site >= self.offsets[b]:
                return b, site - self.offsets[b]
        raise AssertionError("unreachable")

    def block_sites(self, block: int) -> range:
        return range(self.offsets[block], self.offsets[block] + self.sizes[block])


def flatten_sites(spec: PseudoChainSpec) -> SiteMap:
    validate(spec)
    return SiteMap(spec.sizes)


def load_spec(path: str | Path) -> PseudoChainSpec:
    with open(path) as fh:
        return PseudoChainSpec.from_dict(json.load(fh))


def dump_spec(spec: PseudoChainSpec, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
