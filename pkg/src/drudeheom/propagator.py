"""Fixed-step RK4 propagation of the hierarchy with on-the-fly filtering.

The propagator keeps the live ADOs in packed, preallocated arrays (slot 0
is a permanent zero sentinel) so the right-hand side is one tight kernel
call per RK4 stage.  The active set changes through two rules applied once
per step, never inside the four stages:

* activation (before the step): a missing neighbor of a live ADO is
  created, as zero, when the single-step drive into it is estimated to
  exceed ACTIVATION_HYSTERESIS * filter_tol.  The estimate uses the exact
  magnitude of the coupling term, so it only errs by ignoring growth
  within the step.
* filtering (after the step): any non-root ADO whose max absolute element
  fell below filter_tol is removed.  Removal zeroes the slot and detaches
  its pointers; the slot is recycled.

With filter_tol = 0 filtering is disabled and the store is the full
static enumeration up to the tier cap, which is the dense reference
behavior.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ArgumentError,
    DegeneracyError,
    DivergenceError,
    ResourceError,
)
from .hierarchy import AdoIndex, AdoStore, HierarchySpec, enumerate_indices

try:
    from . import _kernels
except ImportError:  # pragma: no cover - numba is a hard dependency, but keep a path
    _kernels = None

#: A dropped ADO is re-created only when the estimated single-step drive
#: into it exceeds this fraction of the filter tolerance.
ACTIVATION_HYSTERESIS = 0.1

#: Steps a newly created ADO is immune from filtering.  Activation fires
#: at an estimated single-step gain of 0.1 tol, so a genuinely growing
#: ADO needs ~10 steps to cross tol; the grace window gives it that time
#: and bounds create/drop churn at the active-set boundary to once per
#: window instead of once per step.
FILTER_GRACE_STEPS = 25

#: Steps an ADO that matured and was still dropped may not re-enter.  The
#: drive estimate that admitted it is an upper bound; an ADO that had a
#: full grace window and never reached the tolerance is proven marginal,
#: so retrying it every window would only recycle dead weight.
FILTER_COOLDOWN_STEPS = 100

#: Default hard tier cap; with filtering on, the tolerance (not this cap)
#: is the operative truncation.
DEFAULT_MAX_TIER = 40

DEFAULT_MAX_ACTIVE = 500_000

#: Environment variable overriding the worker-thread count of the
#: right-hand-side kernel (default: numba's own default).
WORKERS_ENV_VAR = "DRUDEHEOM_WORKERS"

#: Below this live-slot count the serial kernel beats thread startup.
_PARALLEL_THRESHOLD = 1024

_INITIAL_STATE_TOL = 1e-10
_TRACE_DRIFT_LIMIT = 1e-6


def _configure_workers():
    value = os.environ.get(WORKERS_ENV_VAR)
    if not value:
        return
    try:
        import numba

        numba.set_num_threads(max(1, int(value)))
    except (ImportError, ValueError):
        warnings.warn(f"ignoring invalid {WORKERS_ENV_VAR}={value!r}", stacklevel=3)


@dataclass(frozen=True)
class PropagationConfig:
    """Run parameters for one propagation.

    ``filter_tol`` and ``max_tier`` default to the values carried by the
    HierarchySpec when left as None.  ``observables`` is a sequence of
    (name, hermitian matrix) pairs whose expectation traces are recorded.
    """

    dt: float
    t_final: float
    filter_tol: float | None = None
    max_tier: int | None = None
    record_stride: int = 1
    observables: tuple = ()
    max_active: int = DEFAULT_MAX_ACTIVE
    t_start: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0):
            raise ArgumentError(f"dt must be positive, got {self.dt}")
        if self.t_final < self.t_start:
            raise ArgumentError("t_final must be >= t_start")
        if self.filter_tol is not None and self.filter_tol < 0:
            raise ArgumentError("filter_tol must be >= 0")
        if self.record_stride < 1:
            raise ArgumentError("record_stride must be >= 1")
        normalized = []
        for name, op in dict(self.observables).items() \
                if isinstance(self.observables, dict) else self.observables:
            normalized.append((str(name), np.asarray(op, dtype=complex)))
        object.__setattr__(self, "observables", tuple(normalized))


@dataclass
class RunStats:
    """Bookkeeping of one propagation run."""

    active_counts: np.ndarray
    peak_active: int
    peak_memory_bytes: int
    wall_time_s: float
    n_steps: int
    dt: float
    filter_tol: float
    max_tier: int
    max_tier_seen: int
    metadata: dict = field(default_factory=dict)


@dataclass
class PropagationResult:
    """Time grid, observable traces, density-matrix snapshots and stats."""

    times: np.ndarray
    traces: dict
    rhos: np.ndarray
    stats: RunStats

    @property
    def final_rho(self) -> np.ndarray:
        return self.rhos[-1]


def filter_step(store: AdoStore, tol: float) -> AdoStore:
    """Drop every non-root entry with max |element| < tol.

    The zero index always survives.  With tol = 0 the store is returned
    unchanged (as a copy); with tol = inf only the root remains.
    """
    if tol < 0:
        raise ArgumentError("tol must be >= 0")
    out = store.copy()
    for index, value in list(out.items()):
        if index == out.zero_index:
            continue
        if np.abs(value).max() < tol:
            out.discard(index)
    return out


def steady_state_probe(result: PropagationResult, window: float) -> dict:
    """Max variation of each recorded observable over the trailing window."""
    t_final = float(result.times[-1])
    if not (0 < window < t_final - float(result.times[0])):
        raise ArgumentError("window must lie inside the recorded time span")
    mask = result.times >= t_final - window
    return {
        name: float(values[mask].max() - values[mask].min())
        for name, values in result.traces.items()
    }


class _PackedHierarchy:
    """Packed-array state of the live hierarchy with incremental updates."""

    def __init__(self, spec: HierarchySpec, max_tier: int, max_active: int):
        self.spec = spec
        self.d = spec.dimension
        self.K = spec.n_modes
        self.B = len(spec.baths)
        self.L = max_tier
        self.max_active = max_active
        self.abs_c = np.abs(spec.mode_coeffs)
        if (self.abs_c == 0.0).any():
            raise DegeneracyError(
                "an expansion mode has |c_k| = 0; its scaled hierarchy "
                "couplings are undefined"
            )
        self.coeffs = spec.mode_coeffs
        self.exponents = spec.mode_exponents
        self.bath_of = spec.mode_bath
        self.qs = np.stack(spec.coupling_ops()) if self.B else \
            np.zeros((0, self.d, self.d), dtype=complex)
        self.q2s = np.stack([q @ q for q in spec.coupling_ops()]) if self.B else self.qs
        self.deltas = np.array(spec.wnr_strengths(), dtype=float)
        # Drude slot (first mode of each bath's block) for the estimator
        drude = np.zeros(self.K, dtype=bool)
        pos = 0
        for expansion, _ in spec.baths:
            drude[pos] = True
            pos += len(expansion.modes) + 1
        self.is_drude = drude
        self.c_drude = np.array(
            [expansion.c_drude for expansion, _ in spec.baths], dtype=complex
        )
        self._allocate(1024)
        self.top = 1  # slot 0 is the sentinel
        self.n_active = 0
        self.slot_of = {}
        self.index_of = [None]
        self.free = []
        self.cooldown = {}
        self.max_tier_seen = 0

    # -- storage management -------------------------------------------------

    def _allocate(self, cap):
        d, K = self.d, self.K
        self.cap = cap
        self.y = np.zeros((cap, d, d), dtype=complex)
        self.occ = np.zeros((cap, K), dtype=np.int64)
        self.tier = np.zeros(cap, dtype=np.int64)
        self.gamma_n = np.zeros(cap, dtype=float)
        self.born = np.zeros(cap, dtype=np.int64)
        self.up = np.zeros((cap, K), dtype=np.int64)
        self.dn = np.zeros((cap, K), dtype=np.int64)
        self.cu = np.zeros((cap, K), dtype=complex)
        self.cl = np.zeros((cap, K), dtype=complex)
        self.cr = np.zeros((cap, K), dtype=complex)
        # estimator lookup tables: sqrt((n_k+1)/|c_k|) and sqrt(n_k |c_k|)
        self.w_est_up = np.zeros((cap, K), dtype=float)
        self.w_est_dn = np.zeros((cap, K), dtype=float)
        self._stage = [np.zeros((cap, d, d), dtype=complex) for _ in range(5)]
        self._scratch = np.zeros((3, max(self.B, 1), d, d), dtype=complex)
        import numba

        # bath axis padded so per-thread scratch blocks do not share
        # cache lines (false sharing would serialize the parallel kernel)
        self._scratch_mt = np.zeros(
            (numba.get_num_threads(), 3, max(self.B, 1) + 2, d, d), dtype=complex
        )

    _SLOT_ARRAYS = ("y", "occ", "tier", "gamma_n", "born", "up", "dn",
                    "cu", "cl", "cr", "w_est_up", "w_est_dn")

    def _grow(self, need):
        old = {name: getattr(self, name) for name in self._SLOT_ARRAYS}
        cap = self.cap
        while cap < need:
            cap *= 2
        self._allocate(cap)
        n = old["y"].shape[0]
        for name, arr in old.items():
            getattr(self, name)[:n] = arr

    def add_index(self, index, value=None, step=0):
        index = tuple(index)
        if self.n_active >= self.max_active:
            raise ResourceError(
                f"active ADO count would exceed the budget of {self.max_active}"
            )
        if self.free:
            slot = self.free.pop()
        else:
            slot = self.top
            if slot >= self.cap:
                self._grow(slot + 1)
            self.top += 1
            while len(self.index_of) <= slot:
                self.index_of.append(None)
        occ = np.asarray(index, dtype=np.int64)
        self.slot_of[index] = slot
        self.index_of[slot] = index
        self.occ[slot] = occ
        tier = int(occ.sum())
        self.tier[slot] = tier
        self.max_tier_seen = max(self.max_tier_seen, tier)
        self.gamma_n[slot] = float(occ @ self.exponents)
        self.born[slot] = step
        self.cu[slot] = -1j * np.sqrt((occ + 1) * self.abs_c)
        w_dn = np.sqrt(occ / self.abs_c)
        self.cl[slot] = -1j * w_dn * self.coeffs
        self.cr[slot] = -1j * w_dn * np.conj(self.coeffs)
        self.w_est_up[slot] = np.sqrt((occ + 1) / self.abs_c)
        self.w_est_dn[slot] = np.sqrt(occ * self.abs_c)
        if value is None:
            self.y[slot] = 0.0
        else:
            self.y[slot] = value
        slot_of = self.slot_of
        for k in range(self.K):
            n_k = index[k]
            if tier < self.L:
                j = slot_of.get(index[:k] + (n_k + 1,) + index[k + 1:])
                if j is not None:
                    self.up[slot, k] = j
                    self.dn[j, k] = slot
            if n_k > 0:
                j = slot_of.get(index[:k] + (n_k - 1,) + index[k + 1:])
                if j is not None:
                    self.dn[slot, k] = j
                    self.up[j, k] = slot
        self.n_active += 1
        return slot

    def drop_slot(self, slot):
        index = self.index_of[slot]
        for k in range(self.K):
            j = self.up[slot, k]
            if j:
                self.dn[j, k] = 0
            j = self.dn[slot, k]
            if j:
                self.up[j, k] = 0
        self.y[slot] = 0.0
        self.occ[slot] = 0
        self.tier[slot] = 0
        self.gamma_n[slot] = 0.0
        self.born[slot] = 0
        self.up[slot] = 0
        self.dn[slot] = 0
        self.cu[slot] = 0.0
        self.cl[slot] = 0.0
        self.cr[slot] = 0.0
        self.w_est_up[slot] = 0.0
        self.w_est_dn[slot] = 0.0
        del self.slot_of[index]
        self.index_of[slot] = None
        self.free.append(slot)
        self.n_active -= 1

    def maybe_compact(self):
        """Re-pack when recycled holes dominate the slot range."""
        if len(self.free) <= max(256, self.n_active):
            return
        live = [s for s in range(1, self.top) if self.index_of[s] is not None]
        mapping = np.zeros(self.top, dtype=np.int64)
        for new, old in enumerate(live, start=1):
            mapping[old] = new
        for name in self._SLOT_ARRAYS:
            if name in ("up", "dn"):
                continue
            arr = getattr(self, name)
            arr[1:len(live) + 1] = arr[live]
            arr[len(live) + 1:self.top] = 0
        for name in ("up", "dn"):
            arr = getattr(self, name)
            arr[1:len(live) + 1] = mapping[arr[live]]
            arr[len(live) + 1:self.top] = 0
        self.index_of = [None] + [self.index_of[s] for s in live]
        self.slot_of = {idx: s for s, idx in enumerate(self.index_of) if idx is not None}
        self.top = len(live) + 1
        self.free = []

    # -- dynamics -----------------------------------------------------------

    def rhs(self, h, y, out):
        parallel = self.top >= _PARALLEL_THRESHOLD and self._scratch_mt.shape[0] > 1
        if self.d == 2:
            yf = y.reshape(y.shape[0], 4)
            outf = out.reshape(out.shape[0], 4)
            kernel = _kernels.heom_rhs_kernel_2x2_parallel if parallel \
                else _kernels.heom_rhs_kernel_2x2
            kernel(yf, outf, h, self.qs, self.q2s, self.deltas, self.bath_of,
                   self.gamma_n, self.up, self.dn, self.cu, self.cl, self.cr,
                   self.top)
        elif parallel:
            _kernels.heom_rhs_kernel_parallel(
                y, out, h, self.qs, self.q2s, self.deltas, self.bath_of,
                self.gamma_n, self.up, self.dn, self.cu, self.cl, self.cr,
                self.top, self._scratch_mt,
            )
        else:
            _kernels.heom_rhs_kernel(
                y, out, h, self.qs, self.q2s, self.deltas, self.bath_of,
                self.gamma_n, self.up, self.dn, self.cu, self.cl, self.cr,
                self.top, self._scratch,
            )

    def rk4_step(self, t, dt, h_at):
        k1, k2, k3, k4, ytmp = self._stage
        top = self.top
        h_mid = h_at(t + 0.5 * dt)
        self.rhs(h_at(t), self.y, k1)
        _kernels.axpy_into(ytmp, self.y, k1, 0.5 * dt, top)
        self.rhs(h_mid, ytmp, k2)
        _kernels.axpy_into(ytmp, self.y, k2, 0.5 * dt, top)
        self.rhs(h_mid, ytmp, k3)
        _kernels.axpy_into(ytmp, self.y, k3, dt, top)
        self.rhs(h_at(t + dt), ytmp, k4)
        _kernels.rk4_combine(self.y, k1, k2, k3, k4, dt, top)

    def drive_estimates(self, dt):
        """Exact magnitude of the single-step coupling drive from each live
        slot into each (possibly missing) neighbor.

        Returns (est_up, est_dn), both (top, K): est_up[s, k] is the
        tier-down term that slot s feeds into index+e_k, est_dn[s, k] the
        tier-up term it feeds into index-e_k.
        """
        top = self.top
        y = self.y[:top]
        mc = np.empty((top, self.B))
        mc_drude = np.empty((top, self.B))
        for b in range(self.B):
            left = self.qs[b] @ y
            right = y @ self.qs[b]
            mc[:, b] = np.abs(left - right).reshape(top, -1).max(axis=1)
            cd = self.c_drude[b]
            mc_drude[:, b] = np.abs(cd * left - np.conj(cd) * right) \
                .reshape(top, -1).max(axis=1)
        mag_up = mc[:, self.bath_of] * self.abs_c[None, :]
        mag_up[:, self.is_drude] = mc_drude[:, self.bath_of[self.is_drude]]
        est_up = dt * self.w_est_up[:top] * mag_up
        est_dn = dt * self.w_est_dn[:top] * mc[:, self.bath_of]
        return est_up, est_dn

    def activation_scan(self, dt, tol, step):
        """Create missing neighbors whose estimated single-step drive
        exceeds ACTIVATION_HYSTERESIS * tol."""
        top = self.top
        est_up, est_dn = self.drive_estimates(dt)
        threshold = ACTIVATION_HYSTERESIS * tol
        cand_up = (self.up[:top] == 0) & (self.tier[:top, None] < self.L) \
            & (est_up >= threshold)
        cand_dn = (self.dn[:top] == 0) & (self.occ[:top] > 0) \
            & (est_dn >= threshold)
        cooldown = self.cooldown
        for s, k in zip(*np.nonzero(cand_up)):
            index = self.index_of[s]
            if index is None:
                continue
            neighbor = index[:k] + (index[k] + 1,) + index[k + 1:]
            if neighbor not in self.slot_of and cooldown.get(neighbor, 0) <= step:
                self.add_index(neighbor, step=step)
        for s, k in zip(*np.nonzero(cand_dn)):
            index = self.index_of[s]
            if index is None:
                continue
            neighbor = index[:k] + (index[k] - 1,) + index[k + 1:]
            if neighbor not in self.slot_of and cooldown.get(neighbor, 0) <= step:
                self.add_index(neighbor, step=step)

    def drop_scan(self, tol, root_slot, step):
        """Remove matured ADOs that fell below the filter tolerance.

        ADOs younger than FILTER_GRACE_STEPS are immune: activation fires
        on an estimated gain of 0.1 tol per step, so a freshly created ADO
        legitimately sits below tol for a few steps while it grows.
        Matured drops enter a cooldown so they are not recycled every
        window.
        """
        top = self.top
        maxabs = np.abs(self.y[:top]).reshape(top, -1).max(axis=1)
        below = (maxabs < tol) & (step - self.born[:top] >= FILTER_GRACE_STEPS)
        for s in np.nonzero(below)[0]:
            if s == 0 or s == root_slot or self.index_of[s] is None:
                continue
            self.cooldown[self.index_of[s]] = step + FILTER_COOLDOWN_STEPS
            self.drop_slot(s)
        if len(self.cooldown) > max(4096, 4 * self.n_active):
            self.cooldown = {
                idx: until for idx, until in self.cooldown.items() if until > step
            }
        self.maybe_compact()

    def memory_bytes(self):
        per_slot = self.y[0].nbytes + self.occ[0].nbytes + self.up[0].nbytes \
            + self.dn[0].nbytes + 3 * self.cu[0].nbytes + 16 + 8 + 8
        return int(self.cap * per_slot + 5 * self.y.nbytes)

    def to_store(self, max_tier):
        store = AdoStore(self.d, self.y[self.slot_of[self.spec.zero_index()]],
                         max_tier, self.K)
        for index, slot in self.slot_of.items():
            if index != store.zero_index:
                store.set(index, self.y[slot].copy())
        return store


def _validate_initial(initial, d):
    rho = np.asarray(initial, dtype=complex)
    if rho.shape != (d, d):
        raise ArgumentError(f"initial state must be {d}x{d}, got {rho.shape}")
    if abs(np.trace(rho) - 1.0) > _INITIAL_STATE_TOL:
        raise ArgumentError(f"initial state must have unit trace, got {np.trace(rho)}")
    if np.abs(rho - rho.conj().T).max() > _INITIAL_STATE_TOL:
        raise ArgumentError("initial state must be hermitian")
    if np.linalg.eigvalsh(rho).min() < -_INITIAL_STATE_TOL:
        raise ArgumentError("initial state must be positive semidefinite")
    return rho


def _hamiltonian_provider(hamiltonian, d):
    if callable(hamiltonian):
        probe = np.asarray(hamiltonian(0.0), dtype=complex)
        if probe.shape != (d, d):
            raise ArgumentError("hamiltonian provider returns the wrong shape")
        return (lambda t: np.ascontiguousarray(hamiltonian(t), dtype=complex)), False
    h = np.ascontiguousarray(hamiltonian, dtype=complex)
    if h.shape != (d, d):
        raise ArgumentError(f"hamiltonian must be {d}x{d}, got {h.shape}")
    return (lambda t: h), True


def propagate(spec: HierarchySpec, initial, config: PropagationConfig,
              hamiltonian) -> PropagationResult:
    """Propagate the hierarchy from a factorized initial condition.

    The reduced density matrix starts at ``initial`` with every other ADO
    zero (system-bath product state, bath at equilibrium).  Classic RK4
    with step ``config.dt``; the active set is fixed across the four
    stages of each step, with activation before and filtering after.

    Parameters
    ----------
    hamiltonian : ndarray or callable
        Static system Hamiltonian, or a provider t -> H(t).

    Raises
    ------
    DivergenceError
        On trace drift beyond 1e-6 or non-finite entries.
    ResourceError
        If the active count exceeds ``config.max_active``.
    """
    d = spec.dimension
    rho0 = _validate_initial(initial, d)
    tol = spec.filter_tol if config.filter_tol is None else config.filter_tol
    max_tier = spec.max_tier if config.max_tier is None else config.max_tier
    h_at, h_static = _hamiltonian_provider(hamiltonian, d)
    _configure_workers()

    rate_scale = max(
        float(np.linalg.norm(h_at(config.t_start), 2)),
        float(spec.mode_exponents.max(initial=0.0)),
    )
    if config.dt * rate_scale >= 0.1:
        warnings.warn(
            f"dt * fastest rate = {config.dt * rate_scale:.3g} >= 0.1; "
            "the fixed-step integrator may be inaccurate",
            stacklevel=2,
        )

    engine = _PackedHierarchy(spec, max_tier, config.max_active)
    root = engine.spec.zero_index()
    if tol == 0.0:
        for index in enumerate_indices(spec, max_tier, budget=config.max_active):
            engine.add_index(index)
        engine.y[engine.slot_of[root]] = rho0
    else:
        engine.add_index(root, rho0)
    root_slot = engine.slot_of[root]

    n_steps = int(round((config.t_final - config.t_start) / config.dt))
    obs_names = [name for name, _ in config.observables]
    obs_ops = [op for _, op in config.observables]

    times, rho_snaps, counts = [], [], []
    traces = {name: [] for name in obs_names}

    def record(t):
        rho = engine.y[engine.slot_of[root]]
        if not np.isfinite(rho).all():
            raise DivergenceError(
                "non-finite density matrix", step=step_done,
                active_count=engine.n_active,
            )
        drift = abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag)
        if drift > _TRACE_DRIFT_LIMIT:
            raise DivergenceError(
                f"trace drifted by {drift:.3e}", step=step_done,
                active_count=engine.n_active,
            )
        times.append(t)
        rho_snaps.append(rho.copy())
        counts.append(engine.n_active)
        for name, op in zip(obs_names, obs_ops):
            traces[name].append(float(np.trace(op @ rho).real))

    wall_start = time.perf_counter()
    step_done = 0
    peak_active = engine.n_active
    record(config.t_start)
    t = config.t_start
    root_key = tuple(root)
    for step in range(n_steps):
        if tol > 0.0:
            engine.activation_scan(config.dt, tol, step)
            peak_active = max(peak_active, engine.n_active)
        engine.rk4_step(t, config.dt, h_at)
        t = config.t_start + (step + 1) * config.dt
        if tol > 0.0:
            engine.drop_scan(tol, engine.slot_of[root_key], step)
        step_done = step + 1
        if step_done % config.record_stride == 0:
            record(t)
    if n_steps % config.record_stride != 0:
        record(t)

    wall = time.perf_counter() - wall_start
    stats = RunStats(
        active_counts=np.array(counts, dtype=np.int64),
        peak_active=peak_active,
        peak_memory_bytes=engine.memory_bytes(),
        wall_time_s=wall,
        n_steps=n_steps,
        dt=config.dt,
        filter_tol=tol,
        max_tier=max_tier,
        max_tier_seen=engine.max_tier_seen,
        metadata={
            "activation_hysteresis": ACTIVATION_HYSTERESIS,
            "filter_grace_steps": FILTER_GRACE_STEPS,
            "filter_cooldown_steps": FILTER_COOLDOWN_STEPS,
            "static_hamiltonian": h_static,
            "kernel": "numba",
        },
    )
    return PropagationResult(
        times=np.array(times),
        traces={name: np.array(vals) for name, vals in traces.items()},
        rhos=np.array(rho_snaps),
        stats=stats,
    )
