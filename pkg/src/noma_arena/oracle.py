"""Exact offline optimum via per-slot configuration packing.

The rate condition is nonlinear in the raw (slot, power) variables, but the
power set is finite and groups are capped, so every feasible way to load one
slot can be enumerated as a configuration; the problem then becomes exact
set packing per frame, coupled across frames only through device batteries.
A depth-first branch-and-bound walks frames in order, packing disjoint
configurations per slot, pruning with per-frame unconstrained maxima; a
separate exhaustive enumerator cross-checks it on tiny instances, and the
configuration ILP can be exported as an LP text file for external solvers.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario
from .sinr import Assignment, count_delivered, snr_threshold
from .units import dbm_to_mw, energy_cost_micro, mw_to_micro


class InstanceTooLarge(ValueError):
    """The instance exceeds the configured enumeration budget."""


@dataclass(frozen=True)
class SlotConfig:
    """One feasible way to load a slot: members with their power levels.

    Members are ordered by ascending (gain, device id); every member clears
    its SINR threshold against the lower-gain members, so the group passes
    the success test jointly.
    """

    slot: int
    members: tuple[int, ...]
    levels: tuple[int, ...]  # power level indices, aligned with members
    costs_micro: tuple[int, ...]
    mask: int

    @property
    def value(self) -> int:
        return len(self.members)


@dataclass
class OptSolution:
    objective: int
    assignment: Assignment
    certificate: list[list[SlotConfig]]  # per frame, the chosen configs
    proven: bool


def _slot_candidates(scenario: Scenario, frame: int, slot: int):
    """Eligible (device, gain, threshold) triples in ascending (gain, id)."""
    t = frame - 1
    W = scenario.config.bandwidth_hz
    max_mw = dbm_to_mw(scenario.config.max_level_dbm)
    out = []
    for i in range(scenario.num_devices):
        L = int(scenario.lengths[t, i])
        if L <= 0:
            continue
        if not scenario.arrivals[t, i] <= slot <= scenario.deadlines[t, i] - 1:
            continue
        g = float(scenario.gains[t, i, slot - 1])
        theta = snr_threshold(L, W)
        if max_mw * g < theta:
            continue  # infeasible even alone at full power
        out.append((i, g, theta))
    out.sort(key=lambda c: (c[1], c[0]))
    return out


def enumerate_configs(
    scenario: Scenario, frame: int, cap: int = 1_000_000
) -> list[list[SlotConfig]]:
    """All feasible non-empty configurations for each slot of the frame.

    Groups are built in ascending gain order, so a member's admission test
    against the running interference sum is exactly its success condition in
    the finished group; the enumeration therefore emits feasible configs
    only, including every sub-maximal one. Raises InstanceTooLarge when the
    frame's config count would exceed ``cap``.
    """
    cfg = scenario.config
    on_levels = [
        (k, dbm_to_mw(p), energy_cost_micro(p))
        for k, p in enumerate(cfg.power_levels_dbm)
        if dbm_to_mw(p) > 0.0
    ]
    per_slot: list[list[SlotConfig]] = []
    emitted = 0
    for j in range(1, cfg.num_slots + 1):
        cands = _slot_candidates(scenario, frame, j)
        configs: list[SlotConfig] = []

        def grow(start: int, running: float, members, levels, costs, mask):
            nonlocal emitted
            for k in range(start, len(cands)):
                dev, gain, theta = cands[k]
                for lvl, mw, cost in on_levels:
                    v = mw * gain
                    if v < theta * (1.0 + running):
                        continue
                    new_members = members + (dev,)
                    new_levels = levels + (lvl,)
                    new_costs = costs + (cost,)
                    new_mask = mask | (1 << dev)
                    emitted += 1
                    if emitted > cap:
                        raise InstanceTooLarge(
                            f"more than {cap} slot configurations in frame {frame}: "
                            "instance too large for exact solver"
                        )
                    configs.append(
                        SlotConfig(j, new_members, new_levels, new_costs, new_mask)
                    )
                    if len(new_members) < cfg.group_cap:
                        grow(k + 1, running + v, new_members, new_levels, new_costs, new_mask)

        grow(0, 0.0, (), (), (), 0)
        per_slot.append(configs)
    return per_slot


def _pareto_filter(configs: list[SlotConfig]) -> list[SlotConfig]:
    """Keep, per member set, only cost vectors not dominated entrywise.

    Dominated power choices can never help: the served set is identical and
    every battery is left no better. Dropping them preserves the optimum.
    """
    by_members: dict[tuple[int, ...], list[SlotConfig]] = {}
    for c in configs:
        by_members.setdefault(c.members, []).append(c)
    kept: list[SlotConfig] = []
    for group in by_members.values():
        group.sort(key=lambda c: (sum(c.costs_micro), c.costs_micro))
        front: list[SlotConfig] = []
        for c in group:
            if not any(
                all(f.costs_micro[k] <= c.costs_micro[k] for k in range(len(c.members)))
                for f in front
            ):
                front.append(c)
        kept.extend(front)
    return kept


class _Timeout(Exception):
    pass


class _Search:
    """Depth-first packing over (frame, slot) with battery bookkeeping."""

    def __init__(self, scenario: Scenario, tables, prune: bool, deadline: float | None):
        self.scenario = scenario
        self.tables = tables  # [frame-1][slot-1] -> list of SlotConfig
        self.prune = prune
        self.deadline = deadline
        self.T = scenario.num_frames
        self.N = scenario.num_slots
        self.M = scenario.num_devices
        self.budget = mw_to_micro(scenario.config.energy_budget_mw)
        # Two in-frame potentials for the slot suffix, both relaxations:
        # summed per-slot best sizes, and the union of eligible devices.
        self.pot = []
        self.elig_union = []
        for t in range(self.T):
            row = [0] * (self.N + 1)
            masks = [0] * (self.N + 1)
            for j in range(self.N - 1, -1, -1):
                best = max((c.value for c in tables[t][j]), default=0)
                row[j] = row[j + 1] + best
                union = masks[j + 1]
                for c in tables[t][j]:
                    union |= c.mask
                masks[j] = union
            self.pot.append(row)
            self.elig_union.append(masks)
        self.suffix_ub = [0] * (self.T + 2)
        self.frame_ub = [0] * self.T
        self.nodes = 0
        self.best = -1
        self.best_cert: list[list[SlotConfig]] = []
        self.timed_out = False

    def _tick(self) -> None:
        self.nodes += 1
        if self.deadline is not None and self.nodes % 4096 == 0:
            if time.monotonic() > self.deadline:
                raise _Timeout

    def _frame_potential(self, t: int, j: int, used: int) -> int:
        free = self.elig_union[t][j] & ~used
        return min(self.pot[t][j], bin(free).count("1"))

    def frame_greedy(self, t: int, energies: list[int] | None) -> int:
        """First-fit packing value, a fast incumbent for the frame search."""
        used = 0
        value = 0
        for j in range(self.N):
            for c in self.tables[t][j]:
                if used & c.mask:
                    continue
                if energies is not None and any(
                    energies[d] < cost for d, cost in zip(c.members, c.costs_micro)
                ):
                    continue
                used |= c.mask
                value += c.value
                break
        return value

    def frame_max(self, t: int, energies: list[int] | None) -> tuple[int, list[SlotConfig]]:
        """Best packing of frame t alone, optionally energy-constrained."""
        best_val = self.frame_greedy(t, energies) - 1
        best_cfgs: list[SlotConfig] | None = None
        chosen: list[SlotConfig] = []
        seen: dict[tuple[int, int], int] = {}

        def rec(j: int, used: int, value: int):
            nonlocal best_val, best_cfgs
            self._tick()
            if value + self._frame_potential(t, j, used) <= best_val:
                return
            key = (j, used)
            if seen.get(key, -1) >= value:
                return
            seen[key] = value
            if j == self.N:
                if value > best_val:
                    best_val = value
                    best_cfgs = chosen.copy()
                return
            for c in self.tables[t][j]:
                if used & c.mask:
                    continue
                if energies is not None and any(
                    energies[d] < cost for d, cost in zip(c.members, c.costs_micro)
                ):
                    continue
                chosen.append(c)
                rec(j + 1, used | c.mask, value + c.value)
                chosen.pop()
            rec(j + 1, used, value)

        rec(0, 0, 0)
        if best_cfgs is None:
            # the greedy incumbent was already optimal; rebuild it explicitly
            best_val += 1
            best_cfgs = self._greedy_configs(t, energies)
        return best_val, best_cfgs

    def _greedy_configs(self, t: int, energies: list[int] | None) -> list[SlotConfig]:
        used = 0
        out: list[SlotConfig] = []
        for j in range(self.N):
            for c in self.tables[t][j]:
                if used & c.mask:
                    continue
                if energies is not None and any(
                    energies[d] < cost for d, cost in zip(c.members, c.costs_micro)
                ):
                    continue
                used |= c.mask
                out.append(c)
                break
        return out

    def frame_outcomes(self, t: int, min_value: int):
        """All frame packings of value >= min_value, collapsed by spending.

        Two packings spending identically per device are interchangeable for
        the rest of the horizon, so only a maximum-value representative per
        spend vector is kept, then entrywise-dominated spend vectors are
        dropped. Returns (value, spend dict, configs) sorted by value desc.
        """
        best_by_spend: dict[tuple, tuple[int, list[SlotConfig]]] = {}
        chosen: list[SlotConfig] = []
        spend: dict[int, int] = {}

        def rec(j: int, used: int, value: int):
            self._tick()
            if value + self._frame_potential(t, j, used) < min_value:
                return
            if j == self.N:
                key = tuple(sorted(spend.items()))
                prev = best_by_spend.get(key)
                if prev is None or value > prev[0]:
                    best_by_spend[key] = (value, chosen.copy())
                return
            for c in self.tables[t][j]:
                if used & c.mask:
                    continue
                chosen.append(c)
                for d, cost in zip(c.members, c.costs_micro):
                    spend[d] = cost
                rec(j + 1, used | c.mask, value + c.value)
                chosen.pop()
                for d in c.members:
                    del spend[d]
            rec(j + 1, used, value)

        rec(0, 0, 0)
        outcomes = [
            (value, dict(key), cfgs) for key, (value, cfgs) in best_by_spend.items()
        ]
        outcomes.sort(key=lambda o: (-o[0], sorted(o[1].items())))
        if len(outcomes) <= 2000:
            kept: list = []
            for v, sp, cfgs in outcomes:
                dominated = False
                for v2, sp2, _ in kept:
                    if v2 >= v and all(sp.get(d, 0) >= c2 for d, c2 in sp2.items()):
                        dominated = True
                        break
                if not dominated:
                    kept.append((v, sp, cfgs))
            outcomes = kept
        return outcomes

    def greedy_incumbent(self) -> tuple[int, list[list[SlotConfig]]]:
        """Frame-by-frame myopic optimum; a feasible full solution."""
        energies = [self.budget] * self.M
        cert: list[list[SlotConfig]] = []
        total = 0
        for t in range(self.T):
            value, cfgs = self.frame_max(t, energies)
            total += value
            cert.append(cfgs)
            for c in cfgs:
                for d, cost in zip(c.members, c.costs_micro):
                    energies[d] -= cost
        return total, cert

    def run(self) -> None:
        self.best = 0
        self.best_cert = [[] for _ in range(self.T)]
        # Transpositions: reaching the same (frame, batteries) with no higher
        # value cannot improve on the earlier visit's subtree.
        seen: dict[tuple, int] = {}

        def rec(t: int, value: int, energies: tuple[int, ...], cert: list):
            self._tick()
            if t == self.T:
                if value > self.best:
                    self.best = value
                    self.best_cert = [cfgs for _, _, cfgs in cert]
                return
            if self.prune:
                if value + self.suffix_ub[t] <= self.best:
                    return
                key = (t, energies)
                if seen.get(key, -1) >= value:
                    return
                seen[key] = value
            for outcome in self.outcomes[t]:
                v, spend, _ = outcome
                if self.prune and value + v + self.suffix_ub[t + 1] <= self.best:
                    break  # outcomes are value-sorted; the rest are no better
                if any(energies[d] < cost for d, cost in spend.items()):
                    continue
                if spend:
                    nxt = list(energies)
                    for d, cost in spend.items():
                        nxt[d] -= cost
                    nxt_energies = tuple(nxt)
                else:
                    nxt_energies = energies
                cert.append(outcome)
                rec(t + 1, value + v, nxt_energies, cert)
                cert.pop()

        try:
            for t in range(self.T - 1, -1, -1):
                ub, _ = self.frame_max(t, None)
                self.frame_ub[t] = ub
                self.suffix_ub[t] = self.suffix_ub[t + 1] + ub
            incumbent, cert = self.greedy_incumbent()
            if incumbent > self.best:
                self.best, self.best_cert = incumbent, cert
            # Frames of an improving solution cannot fall further below their
            # own maximum than the whole solution's slack against the bound.
            if self.prune:
                slack = self.suffix_ub[0] - (self.best + 1)
                if slack < 0:
                    return
            else:
                slack = self.suffix_ub[0]
            self.outcomes = [
                self.frame_outcomes(t, max(0, self.frame_ub[t] - slack))
                for t in range(self.T)
            ]
            self._drop_unconstrained_devices()
            rec(0, 0, tuple([self.budget] * self.M), [])
        except _Timeout:
            self.timed_out = True

    def _drop_unconstrained_devices(self) -> None:
        """Erase spend entries of devices whose battery can never run out.

        If a device's worst-case spend across the frames' kept outcomes fits
        its budget, its energy row is vacuous; removing it merges outcomes
        that differ only there, which collapses the cross-frame search space
        to the genuinely contested devices.
        """
        worst = [0] * self.M
        for t in range(self.T):
            per_frame = [0] * self.M
            for _, spend, _ in self.outcomes[t]:
                for d, cost in spend.items():
                    if cost > per_frame[d]:
                        per_frame[d] = cost
            for d in range(self.M):
                worst[d] += per_frame[d]
        unconstrained = {d for d in range(self.M) if worst[d] <= self.budget}
        if not unconstrained:
            return
        for t in range(self.T):
            merged: dict[tuple, tuple[int, dict, list[SlotConfig]]] = {}
            for v, spend, cfgs in self.outcomes[t]:
                reduced = {d: c for d, c in spend.items() if d not in unconstrained}
                key = tuple(sorted(reduced.items()))
                prev = merged.get(key)
                if prev is None or v > prev[0]:
                    merged[key] = (v, reduced, cfgs)
            outcomes = sorted(
                merged.values(), key=lambda o: (-o[0], sorted(o[1].items()))
            )
            if len(outcomes) <= 2000:
                kept: list = []
                for v, sp, cfgs in outcomes:
                    dominated = False
                    for v2, sp2, _ in kept:
                        if v2 >= v and all(sp.get(d, 0) >= c2 for d, c2 in sp2.items()):
                            dominated = True
                            break
                    if not dominated:
                        kept.append((v, sp, cfgs))
                outcomes = kept
            self.outcomes[t] = outcomes


def assignment_from_certificate(
    scenario: Scenario, certificate: list[list[SlotConfig]]
) -> Assignment:
    assignment = Assignment.empty(scenario.num_frames, scenario.num_devices)
    levels_mw = [dbm_to_mw(p) for p in scenario.config.power_levels_dbm]
    slots = assignment.slots.copy()
    powers = assignment.powers_mw.copy()
    for t, cfgs in enumerate(certificate):
        for c in cfgs:
            for d, lvl in zip(c.members, c.levels):
                slots[t, d] = c.slot
                powers[t, d] = levels_mw[lvl]
    return Assignment(slots=slots, powers_mw=powers)


def solve_offline(
    scenario: Scenario,
    cap: int = 1_000_000,
    time_budget_s: float = 60.0,
    prune: bool = True,
) -> OptSolution:
    """Exact maximum of the delivered-packet objective for one realisation.

    Branches per frame over disjoint slot configurations with exact battery
    accounting across frames; the bound adds the future frames' energy-
    unconstrained maxima. On timeout the incumbent is returned with
    ``proven=False``.
    """
    tables = []
    for frame in range(1, scenario.num_frames + 1):
        per_slot = enumerate_configs(scenario, frame, cap)
        filtered = [_pareto_filter(cfgs) for cfgs in per_slot]
        for cfgs in filtered:
            cfgs.sort(key=lambda c: (-c.value, sum(c.costs_micro), c.members, c.levels))
        tables.append(filtered)

    deadline = time.monotonic() + time_budget_s if time_budget_s else None
    search = _Search(scenario, tables, prune, deadline)
    search.run()

    assignment = assignment_from_certificate(scenario, search.best_cert)
    total = 0
    for frame in range(1, scenario.num_frames + 1):
        served, _ = count_delivered(assignment, scenario, frame)
        total += served
    assert total == search.best, "certificate must re-score to the claimed objective"
    return OptSolution(
        objective=search.best,
        assignment=assignment,
        certificate=search.best_cert,
        proven=not search.timed_out,
    )


def brute_force_tiny(scenario: Scenario, limit: int = 10_000_000) -> int:
    """Exhaustive optimum for cross-checking the branch-and-bound.

    Enumerates every per-device (slot-or-none, power) choice per frame,
    treats the group cap as a hard constraint (oversubscribed slots are
    rejected outright), filters by window/energy, and scores the survivors.
    """
    cfg = scenario.config
    T, M, N = scenario.num_frames, scenario.num_devices, scenario.num_slots
    on_levels = [
        (dbm_to_mw(p), energy_cost_micro(p))
        for p in cfg.power_levels_dbm
        if dbm_to_mw(p) > 0.0
    ]
    budget = mw_to_micro(cfg.energy_budget_mw)

    space = 1
    for t in range(T):
        for i in range(M):
            a, d = int(scenario.arrivals[t, i]), int(scenario.deadlines[t, i])
            space *= 1 + (d - a) * len(on_levels)
            if space > limit:
                raise InstanceTooLarge(f"joint action space exceeds {limit}")

    frame_scores: list[np.ndarray] = []
    frame_costs: list[np.ndarray] = []
    for t in range(T):
        options = []
        for i in range(M):
            a, d = int(scenario.arrivals[t, i]), int(scenario.deadlines[t, i])
            opts = [(0, 0.0, 0)]
            for j in range(a, d):
                for mw, cost in on_levels:
                    opts.append((j, mw, cost))
            options.append(opts)
        scores = []
        costs = []
        for combo in itertools.product(*options):
            slot_load: dict[int, int] = {}
            ok = True
            for j, _, _ in combo:
                if j:
                    slot_load[j] = slot_load.get(j, 0) + 1
                    if slot_load[j] > cfg.group_cap:
                        ok = False
                        break
            if not ok:
                continue
            slots = np.zeros((T, M), dtype=np.int64)
            powers = np.zeros((T, M))
            slots[t] = [j for j, _, _ in combo]
            powers[t] = [mw for _, mw, _ in combo]
            served, _ = count_delivered(Assignment(slots, powers), scenario, t + 1)
            scores.append(served)
            costs.append([c for _, _, c in combo])
        frame_scores.append(np.array(scores, dtype=np.int64))
        frame_costs.append(np.array(costs, dtype=np.int64))

    best = 0

    def rec(t: int, spent: np.ndarray, value: int):
        nonlocal best
        if t == T:
            best = max(best, value)
            return
        if t == T - 1:
            feasible = np.all(frame_costs[t] + spent[None, :] <= budget, axis=1)
            if feasible.any():
                best = max(best, value + int(frame_scores[t][feasible].max()))
            return
        for k in range(len(frame_scores[t])):
            new_spent = spent + frame_costs[t][k]
            if (new_spent <= budget).all():
                rec(t + 1, new_spent, value + int(frame_scores[t][k]))

    rec(0, np.zeros(M, dtype=np.int64), 0)
    return best


def export_ilp(scenario: Scenario, path, cap: int = 1_000_000) -> int:
    """Write the configuration packing as an LP-format integer program.

    One binary per (frame, slot, configuration); rows enforce one config per
    resource block, one serving config per device per frame, and the battery
    budget per device. Returns the variable count.
    """
    cfg = scenario.config
    lines_obj: list[str] = []
    rows: list[str] = []
    binaries: list[str] = []
    dev_terms: dict[tuple[int, int], list[str]] = {}
    energy_terms: dict[int, list[str]] = {}

    for frame in range(1, scenario.num_frames + 1):
        per_slot = enumerate_configs(scenario, frame, cap)
        for j, configs in enumerate(per_slot, start=1):
            rb_terms = []
            for k, c in enumerate(configs):
                name = f"x_f{frame}_s{j}_k{k}"
                binaries.append(name)
                lines_obj.append(f"{c.value} {name}")
                rb_terms.append(name)
                for d, cost in zip(c.members, c.costs_micro):
                    dev_terms.setdefault((frame, d), []).append(name)
                    energy_terms.setdefault(d, []).append(
                        f"{cost / 1e6:.10g} {name}"
                    )
            if rb_terms:
                rows.append(f" rb_f{frame}_s{j}: " + " + ".join(rb_terms) + " <= 1")

    for (frame, d), terms in sorted(dev_terms.items()):
        rows.append(f" dev_f{frame}_d{d}: " + " + ".join(terms) + " <= 1")
    for d, terms in sorted(energy_terms.items()):
        rows.append(
            f" en_d{d}: " + " + ".join(terms) + f" <= {cfg.energy_budget_mw:.10g}"
        )

    with open(path, "w") as fh:
        fh.write("\\ uplink grouping and power allocation, configuration packing\n")
        fh.write("Maximize\n obj:" + (" " + " + ".join(lines_obj) if lines_obj else "") + "\n")
        fh.write("Subject To\n")
        for row in rows:
            fh.write(row + "\n")
        fh.write("Binaries\n")
        for chunk in range(0, len(binaries), 8):
            fh.write(" " + " ".join(binaries[chunk : chunk + 8]) + "\n")
        fh.write("End\n")
    return len(binaries)
