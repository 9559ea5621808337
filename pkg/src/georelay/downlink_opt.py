"""GEO-to-LEO stage: energy minimization, constant-power baseline, time minimization.

The energy problem decouples into independent per-LEO waterfilling solves
because the bit constraints share no variables. Time minimization first finds
the per-LEO full-power minimum durations; their maximum is the unconstrained
optimum T0, and a binding energy budget is handled by bisecting the horizon
against the optimal-energy curve, which decreases in the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InternalError
from .geometry import ConstellationScenario, coverage_entry_time, geos_distance
from .link import LinkParams, NodeChannel, PowerProfile, build_channel
from .waterfill import max_deliverable_bits, solve_cells

_BRACKET_GROW_LIMIT = 60


@dataclass(frozen=True)
class DownlinkRequest:
    """Inputs of the GEO-to-LEO allocation problems.

    ``links`` carries one entry per LEO (attenuations differ). Windows are
    entry-limited: LEO n transmits over [max(t_start, entry_n), t_start + horizon].
    """

    scenario: ConstellationScenario
    links: tuple[LinkParams, ...]
    files_per_leos: int
    file_bits: float
    t_start_s: float
    horizon_s: float
    p_max_w: float
    e_max_j: float | None = None
    grid_step_s: float = 1.0

    def __post_init__(self):
        if len(self.links) != self.scenario.n_leos:
            raise ValueError("one LinkParams per LEO required")
        if self.p_max_w <= 0 or self.horizon_s <= 0:
            raise ValueError("power cap and horizon must be positive")
        if self.files_per_leos < 0 or self.file_bits <= 0:
            raise ValueError("bad file parameters")

    def window(self, n: int, horizon_s: float | None = None) -> tuple[float, float]:
        start = max(self.t_start_s, coverage_entry_time(self.scenario, n))
        end = self.t_start_s + (self.horizon_s if horizon_s is None else horizon_s)
        return start, max(start, end)

    def channel(self, n: int, horizon_s: float | None = None) -> NodeChannel:
        return build_channel(
            self.links[n],
            lambda t: geos_distance(self.scenario, n, t),
            self.window(n, horizon_s),
            self.grid_step_s,
        )


@dataclass(frozen=True)
class AllocationResult:
    profiles: tuple[PowerProfile, ...]
    energies_j: np.ndarray
    total_energy_j: float
    delivered_bits: np.ndarray
    water_levels: np.ndarray
    iterations: tuple[int, ...]
    kkt_residual_max: float


@dataclass(frozen=True)
class TimeMinResult:
    duration_s: float
    allocation: AllocationResult
    budget_bound: bool
    min_durations_s: np.ndarray
    energy_at_t0_j: float


def allocate_for_targets(channels, targets_bits, p_max) -> AllocationResult:
    """Independent per-node waterfilling solves; infeasibility names the node."""
    profiles, energies, bits, levels, iters, residuals = [], [], [], [], [], []
    for n, (ch, target) in enumerate(zip(channels, targets_bits)):
        try:
            sol = solve_cells(ch.weights_s, ch.gains_per_w, ch.bandwidth_hz, target, p_max)
        except InfeasibleError as exc:
            raise InfeasibleError(
                f"node {n}: {exc}", max_bits=exc.max_bits, index=n
            ) from exc
        profiles.append(ch.profile(sol.powers_w))
        energies.append(sol.energy_j)
        bits.append(sol.delivered_bits)
        levels.append(sol.water_level)
        iters.append(sol.iterations)
        residuals.append(sol.kkt_residual)
    return AllocationResult(
        profiles=tuple(profiles),
        energies_j=np.array(energies),
        total_energy_j=float(sum(energies)),
        delivered_bits=np.array(bits),
        water_levels=np.array(levels),
        iterations=tuple(iters),
        kkt_residual_max=max(residuals, default=0.0),
    )


def constant_power_for_targets(channels, targets_bits, p_max) -> AllocationResult:
    """Per-node constant power chosen by bisection to hit each bit target exactly."""
    profiles, energies, bits, levels = [], [], [], []
    for n, (ch, target) in enumerate(zip(channels, targets_bits)):
        if target == 0:
            powers = np.zeros(ch.n_cells)
        else:
            if ch.bits(np.full(ch.n_cells, p_max)) < target * (1 - 1e-12):
                raise InfeasibleError(f"node {n}: target unreachable at P_max", index=n)
            lo, hi = 0.0, p_max
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if ch.bits(np.full(ch.n_cells, mid)) >= target:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-15 * p_max:
                    break
            powers = np.full(ch.n_cells, hi)
        profiles.append(ch.profile(powers))
        energies.append(ch.energy(powers))
        bits.append(ch.bits(powers))
        levels.append(math.nan)
    return AllocationResult(
        profiles=tuple(profiles),
        energies_j=np.array(energies),
        total_energy_j=float(sum(energies)),
        delivered_bits=np.array(bits),
        water_levels=np.array(levels),
        iterations=tuple(0 for _ in profiles),
        kkt_residual_max=math.nan,
    )


def min_energy_downlink(req: DownlinkRequest, horizon_s: float | None = None) -> AllocationResult:
    """Independent per-LEO waterfilling, each delivering alpha files."""
    channels = [req.channel(n, horizon_s) for n in range(req.scenario.n_leos)]
    target = req.files_per_leos * req.file_bits
    return allocate_for_targets(channels, [target] * len(channels), req.p_max_w)


def constant_power_baseline(req: DownlinkRequest) -> AllocationResult:
    """Constant-power reference: every LEO holds one level meeting its target."""
    channels = [req.channel(n) for n in range(req.scenario.n_leos)]
    target = req.files_per_leos * req.file_bits
    return constant_power_for_targets(channels, [target] * len(channels), req.p_max_w)


def _min_duration_full_power(req: DownlinkRequest, n: int) -> float:
    """Smallest horizon T with the full-power window delivering the bit target."""
    target = req.files_per_leos * req.file_bits
    if target == 0:
        return 0.0

    def deliverable(horizon):
        ch = req.channel(n, horizon)
        return max_deliverable_bits(ch.weights_s, ch.gains_per_w, ch.bandwidth_hz, req.p_max_w)

    lo = max(0.0, coverage_entry_time(req.scenario, n) - req.t_start_s)
    hi = lo + req.grid_step_s
    grown = 0
    while deliverable(hi) < target:
        hi = lo + 2.0 * (hi - lo)
        grown += 1
        if grown > _BRACKET_GROW_LIMIT:
            raise InfeasibleError(f"LEO {n}: bit target unreachable in any horizon", index=n)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if deliverable(mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * max(hi, 1.0):
            break
    return hi


def min_time_downlink(
    req: DownlinkRequest,
    upper_factor: float = 4.0,
    energy_rel_tol: float = 1e-3,
) -> TimeMinResult:
    """Minimize the transmission horizon subject to the total-energy budget.

    With a slack budget the answer is T0 = max_n T_n0 (every LEO at full power
    meets its target within T0); otherwise the horizon is bisected until the
    optimal energy matches the budget within ``energy_rel_tol``.
    """
    n_leos = req.scenario.n_leos
    t_n0 = np.array([_min_duration_full_power(req, n) for n in range(n_leos)])
    t0 = float(np.max(t_n0)) if n_leos else 0.0
    alloc0 = min_energy_downlink(req, horizon_s=t0)
    e0 = alloc0.total_energy_j
    if req.e_max_j is None or req.e_max_j >= e0:
        return TimeMinResult(t0, alloc0, False, t_n0, e0)

    e_max = req.e_max_j
    if e_max <= 0:
        raise InfeasibleError("energy budget must be positive")
    hi = upper_factor * t0
    alloc_hi = min_energy_downlink(req, horizon_s=hi)
    if alloc_hi.total_energy_j > e_max:
        raise InfeasibleError(
            f"budget {e_max:.6g} J below the energy floor "
            f"{alloc_hi.total_energy_j:.6g} J at the search bound {hi:.6g} s"
        )
    lo = t0
    best = (hi, alloc_hi)
    for _ in range(200):
        if hi - lo <= 1e-7 * max(t0, 1.0):
            break
        mid = 0.5 * (lo + hi)
        alloc_mid = min_energy_downlink(req, horizon_s=mid)
        if alloc_mid.total_energy_j > e_max:
            lo = mid
        else:
            hi = mid
            best = (mid, alloc_mid)
    duration, alloc = best
    if abs(alloc.total_energy_j - e_max) > energy_rel_tol * e_max:
        raise InternalError("horizon bisection missed the energy budget")
    return TimeMinResult(duration, alloc, True, t_n0, e0)
