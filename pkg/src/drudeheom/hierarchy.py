"""Auxiliary-density-operator bookkeeping and the hierarchy right-hand side.

An auxiliary density operator (ADO) is labeled by non-negative occupation
numbers, one per expansion mode; with several independent baths the label
concatenates the per-bath blocks, each block being (Drude, Bose-pole 1..N).
The tier of an index is the total occupation; tier 0 is the physical
reduced density matrix.

All ADOs are stored in the dimensionless scaled convention: the coupling
into a higher tier through mode k carries sqrt((n_k+1) |c_k|) and the
coupling down carries sqrt(n_k / |c_k|), which balances the magnitudes
across tiers and is what makes threshold-based filtering meaningful.

The reference evaluator ``heom_rhs`` in this module works on a plain
dictionary store; it is the readable single source of truth for the
equations of motion.  The packed, vectorized engine in ``propagator``
must agree with it and is tested against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bath import BathExpansion
from .errors import (
    ArgumentError,
    CapabilityError,
    DegeneracyError,
    StructuralError,
)

#: Default cap on the size of a static (dense) index enumeration.
ENUMERATION_BUDGET = 10_000_000

HERMITICITY_TOL = 1e-12


class AdoIndex(tuple):
    """Occupation multi-index of one ADO; equality and hashing by content.

    A thin tuple subclass: indices compare equal to plain tuples with the
    same occupations, which keeps dictionary-based stores unceremonious.
    """

    __slots__ = ()

    def __new__(cls, occupations):
        occ = tuple(int(n) for n in occupations)
        if any(n < 0 for n in occ):
            raise ArgumentError(f"occupations must be non-negative, got {occ}")
        return super().__new__(cls, occ)

    @property
    def tier(self) -> int:
        return sum(self)

    def bumped(self, mode: int, delta: int) -> "AdoIndex":
        """Index with occupation of ``mode`` changed by ``delta`` (+1/-1)."""
        lst = list(self)
        lst[mode] += delta
        return AdoIndex(lst)


@dataclass(frozen=True)
class HierarchySpec:
    """Static description of one hierarchy: baths, couplings, caps.

    Attributes
    ----------
    baths : tuple of (BathExpansion, ndarray)
        One (expansion, coupling operator Q_b) pair per independent bath;
        every Q_b must be hermitian and share one dimension.
    max_tier : int
        Hard tier cap L >= 1.
    filter_tol : float
        Default on-the-fly filtering threshold (>= 0) for propagation.
    """

    baths: tuple
    max_tier: int
    filter_tol: float = 0.0
    # flattened mode tables, derived in __post_init__
    mode_coeffs: np.ndarray = field(init=False, repr=False, compare=False)
    mode_exponents: np.ndarray = field(init=False, repr=False, compare=False)
    mode_bath: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        baths = tuple((exp, np.asarray(q, dtype=complex)) for exp, q in self.baths)
        object.__setattr__(self, "baths", baths)
        if self.max_tier < 1:
            raise ArgumentError(f"max_tier must be >= 1, got {self.max_tier}")
        if self.filter_tol < 0:
            raise ArgumentError(f"filter_tol must be >= 0, got {self.filter_tol}")
        dim = None
        coeffs, exponents, owner = [], [], []
        for b, (expansion, q) in enumerate(baths):
            if q.ndim != 2 or q.shape[0] != q.shape[1]:
                raise StructuralError(f"coupling operator of bath {b} is not square")
            if dim is None:
                dim = q.shape[0]
            elif q.shape[0] != dim:
                raise StructuralError("coupling operators have mismatched dimensions")
            if np.abs(q - q.conj().T).max() > HERMITICITY_TOL:
                raise StructuralError(f"coupling operator of bath {b} is not hermitian")
            coeffs.extend(expansion.coefficients())
            exponents.extend(expansion.exponents())
            owner.extend([b] * (len(expansion.modes) + 1))
        object.__setattr__(self, "mode_coeffs", np.array(coeffs, dtype=complex))
        object.__setattr__(self, "mode_exponents", np.array(exponents, dtype=float))
        object.__setattr__(self, "mode_bath", np.array(owner, dtype=np.int64))

    @property
    def n_modes(self) -> int:
        return len(self.mode_coeffs)

    @property
    def dimension(self) -> int:
        return self.baths[0][1].shape[0] if self.baths else 0

    def coupling_ops(self) -> list:
        return [q for _, q in self.baths]

    def wnr_strengths(self) -> list:
        return [expansion.wnr_strength for expansion, _ in self.baths]

    def zero_index(self) -> AdoIndex:
        return AdoIndex((0,) * self.n_modes)

    def validate_index(self, index) -> AdoIndex:
        index = AdoIndex(index)
        if len(index) != self.n_modes:
            raise StructuralError(
                f"index has {len(index)} occupations but the hierarchy has "
                f"{self.n_modes} modes"
            )
        return index


class AdoStore:
    """Sparse map from ADO index to its (scaled, dimensionless) matrix.

    The zero index is always present; its entry is the reduced density
    matrix.  No stored index may exceed ``max_tier``.
    """

    def __init__(self, dimension: int, rho0, max_tier: int, n_modes: int):
        rho0 = np.asarray(rho0, dtype=complex)
        if rho0.shape != (dimension, dimension):
            raise StructuralError(
                f"initial matrix has shape {rho0.shape}, expected "
                f"({dimension}, {dimension})"
            )
        self.dimension = dimension
        self.max_tier = max_tier
        self.n_modes = n_modes
        self._entries = {AdoIndex((0,) * n_modes): rho0.copy()}

    @property
    def zero_index(self) -> AdoIndex:
        return AdoIndex((0,) * self.n_modes)

    @property
    def reduced(self) -> np.ndarray:
        return self._entries[self.zero_index]

    def __len__(self):
        return len(self._entries)

    def __contains__(self, index):
        return AdoIndex(index) in self._entries

    def __iter__(self):
        return iter(self._entries)

    def get(self, index, default=None):
        return self._entries.get(index, default)

    def items(self):
        return self._entries.items()

    def set(self, index, value):
        index = AdoIndex(index)
        if len(index) != self.n_modes:
            raise StructuralError("index width does not match the store")
        if index.tier > self.max_tier:
            raise StructuralError(
                f"index tier {index.tier} exceeds max_tier {self.max_tier}"
            )
        value = np.asarray(value, dtype=complex)
        if value.shape != (self.dimension, self.dimension):
            raise StructuralError("entry shape does not match the store dimension")
        self._entries[index] = value

    def discard(self, index):
        index = AdoIndex(index)
        if index == self.zero_index:
            raise StructuralError("the zero index is never dropped")
        self._entries.pop(index, None)

    def copy(self) -> "AdoStore":
        out = AdoStore(self.dimension, self.reduced, self.max_tier, self.n_modes)
        for idx, val in self._entries.items():
            out._entries[idx] = val.copy()
        return out


def damping(index, spec: HierarchySpec) -> complex:
    """Damping exponent gamma_n = sum_k n_k gamma_k of one ADO.

    Real for a Drude bath (all exponents are real); returned as complex for
    interface stability if complex exponents ever appear.
    """
    index = spec.validate_index(index)
    return complex(np.dot(np.asarray(index, dtype=float), spec.mode_exponents))


def wnr_apply(rho, spec: HierarchySpec) -> np.ndarray:
    """White-noise-residue superoperator: sum_b Delta_b [Q_b, [Q_b, rho]]."""
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    for (expansion, q) in spec.baths:
        inner = q @ rho - rho @ q
        out += expansion.wnr_strength * (q @ inner - inner @ q)
    return out


def _check_occupied_modes(store: AdoStore, spec: HierarchySpec):
    zero_modes = np.nonzero(np.abs(spec.mode_coeffs) == 0.0)[0]
    if len(zero_modes) == 0:
        return
    for index in store:
        for k in zero_modes:
            if index[k] > 0:
                raise DegeneracyError(
                    f"mode {k} has |c_k| = 0 but is occupied in index {tuple(index)}; "
                    "the scaled tier-down coupling is undefined"
                )


def heom_rhs(store: AdoStore, spec: HierarchySpec, hamiltonian) -> dict:
    """Time derivative of every stored ADO (reference implementation).

    For each stored index n:

        d rho_n / dt = -( i [H, rho_n] + gamma_n rho_n
                          + sum_b Delta_b [Q_b, [Q_b, rho_n]] )
                       - i sum_k sqrt((n_k+1)|c_k|) [Q_k, rho_{n_k^+}]
                       - i sum_k sqrt(n_k/|c_k|) (c_k Q_k rho_{n_k^-}
                                                  - c_k* rho_{n_k^-} Q_k),

    where Q_k is the coupling operator of the bath owning mode k and
    neighbors absent from the store contribute zero.

    Parameters
    ----------
    hamiltonian : ndarray
        System Hamiltonian H(t) at the evaluation time, acting through
        the commutator.

    Returns
    -------
    dict
        AdoIndex -> derivative matrix, same index set as the store.
    """
    _check_occupied_modes(store, spec)
    h = np.asarray(hamiltonian, dtype=complex)
    qs = spec.coupling_ops()
    abs_c = np.abs(spec.mode_coeffs)
    out = {}
    for index, rho in store.items():
        deriv = -1j * (h @ rho - rho @ h)
        deriv -= damping(index, spec).real * rho
        deriv -= wnr_apply(rho, spec)
        for k in range(spec.n_modes):
            q = qs[spec.mode_bath[k]]
            n_k = index[k]
            up = store.get(index.bumped(k, +1))
            if up is not None:
                deriv += -1j * math.sqrt((n_k + 1) * abs_c[k]) * (q @ up - up @ q)
            if n_k > 0:
                down = store.get(index.bumped(k, -1))
                if down is not None:
                    c_k = spec.mode_coeffs[k]
                    deriv += -1j * math.sqrt(n_k / abs_c[k]) * (
                        c_k * (q @ down) - c_k.conjugate() * (down @ q)
                    )
        out[index] = deriv
    return out


def enumeration_size(n_modes: int, max_tier: int) -> int:
    """Number of indices with tier <= max_tier over n_modes modes."""
    return math.comb(max_tier + n_modes, n_modes)


def _compositions(total: int, parts: int):
    """Compositions of ``total`` into ``parts`` slots, lexicographically
    descending (largest first slot first)."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def enumerate_indices(spec: HierarchySpec, max_tier: int | None = None,
                      budget: int = ENUMERATION_BUDGET) -> list:
    """All indices with tier <= max_tier, graded (tier-major) ordering.

    Within a tier the ordering is lexicographically descending, e.g. for
    two modes and L = 2: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2).

    Raises
    ------
    CapabilityError
        If the count binom(L + K, K) exceeds ``budget``; use the filtered
        dynamic store for problems of that size.
    """
    tier_cap = spec.max_tier if max_tier is None else max_tier
    count = enumeration_size(spec.n_modes, tier_cap)
    if count > budget:
        raise CapabilityError(
            f"static enumeration would create {count} indices "
            f"(budget {budget}); use the filtered dynamic store"
        )
    out = []
    for tier in range(tier_cap + 1):
        for occ in _compositions(tier, spec.n_modes):
            out.append(AdoIndex(occ))
    return out
