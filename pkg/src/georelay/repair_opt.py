"""Failed-node repair planning over inter-LEO links.

A regenerating-code repair downloads a fixed per-helper file count from an
exactly-sized helper set; all helper subsets are enumerated and each is
costed by independent waterfilling. The MDS baseline instead re-downloads
the full source through the joint file-count/power machinery with the
failed node excluded. LEO-to-LEO links carry no coverage gating, so helper
windows span the whole [t_start, t_start + horizon] interval.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .coding import OperatingPoint, RegenParams, repair_requirement
from .downlink_opt import AllocationResult, allocate_for_targets
from .errors import InfeasibleError, InternalError
from .geometry import ConstellationScenario, inter_leos_distance
from .link import LinkParams, NodeChannel, build_channel
from .uplink_opt import FileAllocationProblem, OAState, min_time_solve, oa_solve

_BRACKET_GROW_LIMIT = 60


@dataclass(frozen=True)
class RepairRequest:
    """Inputs of the failed-node repair problems (0-based failed index)."""

    scenario: ConstellationScenario
    links: tuple[LinkParams, ...]
    params: RegenParams
    point: OperatingPoint
    failed_node: int
    t_start_s: float
    horizon_s: float
    p_max_w: float
    e_max_j: float | None = None
    grid_step_s: float = 1.0

    def __post_init__(self):
        if not 0 <= self.failed_node < self.scenario.n_leos:
            raise ValueError("failed node index out of range")
        if len(self.links) != self.scenario.n_leos:
            raise ValueError("one LinkParams per LEO required")
        if self.p_max_w <= 0 or self.horizon_s <= 0:
            raise ValueError("power cap and horizon must be positive")

    @property
    def helpers(self) -> tuple[int, ...]:
        return tuple(n for n in range(self.scenario.n_leos) if n != self.failed_node)

    def channel(self, helper: int, horizon_s: float | None = None) -> NodeChannel:
        horizon = self.horizon_s if horizon_s is None else horizon_s
        return build_channel(
            self.links[helper],
            lambda t: inter_leos_distance(self.scenario, helper, self.failed_node, t),
            (self.t_start_s, self.t_start_s + horizon),
            self.grid_step_s,
        )


@dataclass(frozen=True)
class RepairResult:
    helpers: tuple[int, ...]
    files_per_helper: np.ndarray
    allocation: AllocationResult
    total_files: int
    state: OAState | None = None


@dataclass(frozen=True)
class RepairTimeResult:
    duration_s: float
    result: RepairResult
    budget_bound: bool
    min_duration_s: float
    energy_at_t0_j: float


def repair_min_energy(req: RepairRequest, horizon_s: float | None = None) -> RepairResult:
    """Cheapest helper subset for regenerating repair: exhaustive enumeration,
    each subset costed by per-helper waterfilling at beta files."""
    plan = repair_requirement(req.point, req.params)
    pool = req.helpers
    if len(pool) < plan.helpers:
        raise InfeasibleError(
            f"{len(pool)} candidate helpers cannot supply {plan.helpers} required"
        )
    target = plan.per_helper_files * req.params.file_bits
    channels = {h: req.channel(h, horizon_s) for h in pool}
    best: tuple[float, tuple[int, ...], AllocationResult] | None = None
    for subset in itertools.combinations(pool, plan.helpers):
        try:
            alloc = allocate_for_targets(
                [channels[h] for h in subset], [target] * plan.helpers, req.p_max_w
            )
        except InfeasibleError:
            continue
        if best is None or alloc.total_energy_j < best[0] - 1e-12 * (1.0 + best[0]):
            best = (alloc.total_energy_j, subset, alloc)
    if best is None:
        raise InfeasibleError("no helper subset can deliver the repair traffic at P_max")
    _, subset, alloc = best
    return RepairResult(
        helpers=subset,
        files_per_helper=np.full(plan.helpers, plan.per_helper_files),
        allocation=alloc,
        total_files=plan.total_files,
    )


def _mds_problem(req: RepairRequest, horizon_s: float | None = None) -> FileAllocationProblem:
    channels = tuple(req.channel(h, horizon_s) for h in req.helpers)
    return FileAllocationProblem(
        channels,
        req.params.n_files,
        tuple(req.params.per_node_files for _ in channels),
        req.params.file_bits,
        req.p_max_w,
    )


def mds_repair_baseline(req: RepairRequest, horizon_s: float | None = None) -> RepairResult:
    """MDS-code repair: download the full source from the surviving nodes,
    jointly optimizing per-helper file counts and power."""
    result = oa_solve(_mds_problem(req, horizon_s))
    return RepairResult(
        helpers=req.helpers,
        files_per_helper=result.mu,
        allocation=result.allocation,
        total_files=req.params.n_files,
        state=result.state,
    )


def _regen_min_duration(req: RepairRequest) -> float:
    """Smallest horizon at which some full helper subset delivers beta files each."""
    plan = repair_requirement(req.point, req.params)
    target = plan.per_helper_files * req.params.file_bits

    def capable(horizon: float) -> int:
        count = 0
        for h in req.helpers:
            ch = req.channel(h, horizon)
            if ch.bits(np.full(ch.n_cells, req.p_max_w)) >= target:
                count += 1
        return count

    hi = max(req.grid_step_s, 1.0)
    grown = 0
    while capable(hi) < plan.helpers:
        hi *= 2.0
        grown += 1
        if grown > _BRACKET_GROW_LIMIT:
            raise InfeasibleError("repair traffic unreachable within the horizon search bound")
    lo = 0.0
    for _ in range(200):
        if hi - lo <= 1e-6:
            break
        mid = 0.5 * (lo + hi)
        if capable(mid) >= plan.helpers:
            hi = mid
        else:
            lo = mid
    return hi


def repair_min_time(
    req: RepairRequest,
    upper_factor: float = 4.0,
    energy_rel_tol: float = 1e-3,
) -> RepairTimeResult:
    """Minimize the regenerating-repair horizon under the energy budget."""
    t0 = _regen_min_duration(req)
    result0 = repair_min_energy(req, horizon_s=t0)
    e0 = result0.allocation.total_energy_j
    if req.e_max_j is None or req.e_max_j >= e0:
        return RepairTimeResult(t0, result0, False, t0, e0)

    e_max = req.e_max_j
    if e_max <= 0:
        raise InfeasibleError("energy budget must be positive")
    hi = upper_factor * t0
    result_hi = repair_min_energy(req, horizon_s=hi)
    if result_hi.allocation.total_energy_j > e_max:
        raise InfeasibleError(
            f"budget {e_max:.6g} J below the energy floor "
            f"{result_hi.allocation.total_energy_j:.6g} J at the search bound {hi:.6g} s"
        )
    lo = t0
    best = (hi, result_hi)
    for _ in range(200):
        if hi - lo <= 1e-5 * max(t0, 1.0):
            break
        mid = 0.5 * (lo + hi)
        result_mid = repair_min_energy(req, horizon_s=mid)
        if result_mid.allocation.total_energy_j > e_max:
            lo = mid
        else:
            hi = mid
            best = (mid, result_mid)
    duration, result = best
    if abs(result.allocation.total_energy_j - e_max) > energy_rel_tol * e_max:
        raise InternalError("horizon bisection missed the energy budget")
    return RepairTimeResult(duration, result, True, t0, e0)


def mds_repair_min_time(
    req: RepairRequest,
    epsilon_rel: float = 1e-6,
    max_iterations: int = 50,
    upper_factor: float = 4.0,
    energy_rel_tol: float = 1e-3,
) -> RepairTimeResult:
    """MDS-baseline horizon minimization over the surviving nodes."""
    res = min_time_solve(
        lambda horizon: _mds_problem(req, horizon),
        req.params.n_files,
        req.e_max_j,
        epsilon_rel,
        max_iterations,
        upper_factor,
        energy_rel_tol,
        req.grid_step_s,
    )
    wrapped = RepairResult(
        helpers=req.helpers,
        files_per_helper=res.mu,
        allocation=res.allocation,
        total_files=req.params.n_files,
        state=res.state,
    )
    return RepairTimeResult(res.duration_s, wrapped, res.budget_bound, res.min_duration_s, res.energy_at_t0_j)


def repair_traffic_files(point: OperatingPoint, params: RegenParams) -> dict:
    """Traffic accounting: regenerating vs MDS repair, in files."""
    plan = repair_requirement(point, params)
    return {
        "regenerating": plan.total_files,
        "mds": params.n_files,
        "helpers": plan.helpers,
        "per_helper": plan.per_helper_files,
    }
