"""Closed-loop inbound traffic-engineering planner.

Given per-(source AS, destination prefix) ingress-link objectives for a stub
AS, the planner first screens for structural infeasibility (two objectives on
one prefix whose candidate routes all funnel through a single upstream AS can
never be split by prepending), then enumerates advertisement and
community-attachment action sets in ascending intervention cost, re-simulating
each candidate until one realizes every objective.  Every returned plan is
re-checkable from scratch with evaluate_plan.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .engine import (
    Advertisement,
    ConvergedState,
    OscillationError,
    TeConfig,
    propagate_to_convergence,
)
from .flows import Flow, FlowClass, IngressMap, classify, diff_ingress, ingress_map, resolve_forwarding
from .routes import Community, export_permitted
from .topology import Prefix, Rel, Topology, require_valid

SAME_PROVIDER = "same-provider"


class PlanningError(ValueError):
    """Invalid planning input (bad objective, unsupported granularity)."""


@dataclass(frozen=True, slots=True)
class Objective:
    flow: Flow
    required_link: str

    def __str__(self) -> str:
        return f"{self.flow} -> {self.required_link}"


class ActionKind(Enum):
    # Enumeration rank doubles as the tie-break order inside a cost class.
    ATTACH_COMMUNITY = 0
    SET_MED = 1
    ADVERTISE_MORE_SPECIFIC = 2
    WITHHOLD = 3
    ADVERTISE = 4


# Intervention cost per action: attaching a community or a MED value is
# reversible tuning; withdrawing reachability or inflating tables costs more.
ACTION_WEIGHT = {
    ActionKind.ATTACH_COMMUNITY: 1,
    ActionKind.SET_MED: 1,
    ActionKind.ADVERTISE: 1,
    ActionKind.ADVERTISE_MORE_SPECIFIC: 2,
    ActionKind.WITHHOLD: 2,
}


@dataclass(frozen=True, slots=True)
class Action:
    kind: ActionKind
    prefix: Prefix
    link_id: str
    community: Community | None = None
    med: int | None = None

    @classmethod
    def withhold(cls, prefix: Prefix, link_id: str) -> "Action":
        return cls(ActionKind.WITHHOLD, prefix, link_id)

    @classmethod
    def advertise(cls, prefix: Prefix, link_id: str) -> "Action":
        return cls(ActionKind.ADVERTISE, prefix, link_id)

    @classmethod
    def advertise_more_specific(cls, prefix: Prefix, link_id: str) -> "Action":
        return cls(ActionKind.ADVERTISE_MORE_SPECIFIC, prefix, link_id)

    @classmethod
    def attach(cls, prefix: Prefix, link_id: str, community: Community) -> "Action":
        return cls(ActionKind.ATTACH_COMMUNITY, prefix, link_id, community=community)

    @classmethod
    def set_med(cls, prefix: Prefix, link_id: str, med: int) -> "Action":
        return cls(ActionKind.SET_MED, prefix, link_id, med=med)

    def sort_key(self) -> tuple:
        extra = str(self.community) if self.community is not None else ""
        return (self.kind.value, self.prefix.sort_key(), self.link_id, extra, self.med or 0)

    def __str__(self) -> str:
        names = {
            ActionKind.ATTACH_COMMUNITY: "attach-community",
            ActionKind.SET_MED: "set-med",
            ActionKind.ADVERTISE_MORE_SPECIFIC: "advertise-more-specific",
            ActionKind.WITHHOLD: "withhold",
            ActionKind.ADVERTISE: "advertise",
        }
        parts = [names[self.kind], str(self.prefix), self.link_id]
        if self.community is not None:
            parts.append(str(self.community))
        if self.med is not None:
            parts.append(str(self.med))
        return " ".join(parts)


@dataclass(frozen=True)
class InfeasibilityWitness:
    """Two objectives that cannot both hold, plus where their candidate
    routes merge: a pivot ASN, or "same-provider" when both required links
    land on one provider."""

    first: Objective
    second: Objective
    pivot: int | str

    def __str__(self) -> str:
        return f"witness {self.pivot}: [{self.first}] vs [{self.second}]"


@dataclass(frozen=True)
class Plan:
    actions: tuple[Action, ...]
    predicted_map: IngressMap
    side_effects: tuple[tuple[int, Prefix, str, str], ...]
    lp_constraint_violated: bool = False


@dataclass(frozen=True)
class Infeasible:
    witnesses: tuple[InfeasibilityWitness, ...]


@dataclass(frozen=True)
class Exhausted:
    candidates_tried: int
    max_actions: int


@dataclass(frozen=True)
class Budget:
    max_actions: int = 3


@dataclass(frozen=True)
class EvaluationReport:
    satisfied: tuple[bool, ...]
    side_effects: tuple[tuple[int, Prefix, str, str], ...]
    rounds_used: int


def _stub_sources(t: Topology, dest: int) -> list[int]:
    return [a for a in t.ases() if a != dest and t.roles[a] == "stub"]


def _objective_sources(t: Topology, dest: int, o: Objective) -> list[int]:
    if o.flow.src_asn is not None:
        return [o.flow.src_asn]
    return _stub_sources(t, dest)


def validate_objectives(t: Topology, dest: int, objectives: Sequence[Objective]) -> None:
    if dest not in t.roles:
        raise PlanningError(f"unknown destination AS {dest}")
    if t.roles[dest] != "stub":
        raise PlanningError(f"destination AS {dest} is not a stub")
    if not t.originated_by(dest):
        raise PlanningError(f"destination AS {dest} originates nothing")
    if not objectives:
        raise PlanningError("no objectives given")
    for o in objectives:
        if o.flow.dst_asn != dest:
            raise PlanningError(f"objective {o} does not target AS {dest}")
        if classify(o.flow) is FlowClass.SOURCE_PREFIX:
            raise PlanningError(
                f"objective {o}: source-prefix granularity is unsupported; forwarding "
                "is destination-based, so source addresses cannot steer ingress"
            )
        try:
            link = t.link_by_id(o.required_link)
        except KeyError as exc:
            raise PlanningError(str(exc)) from exc
        if dest not in link.endpoints():
            raise PlanningError(f"objective {o}: link {o.required_link} is not incident to AS {dest}")
        if not link.up:
            raise PlanningError(f"objective {o}: link {o.required_link} is down")
        if o.flow.src_asn is not None and o.flow.src_asn not in t.roles:
            raise PlanningError(f"objective {o}: unknown source AS {o.flow.src_asn}")
        if o.flow.src_asn == dest:
            raise PlanningError(f"objective {o}: source equals destination")
        if not any(p.contains(o.flow.dst_prefix) for p in t.originated_by(dest)):
            raise PlanningError(
                f"objective {o}: {o.flow.dst_prefix} is outside AS {dest}'s originated space"
            )
    for o1, o2 in itertools.combinations(objectives, 2):
        if o1.flow.dst_prefix != o2.flow.dst_prefix:
            continue
        if o1.required_link == o2.required_link:
            continue
        overlap = (
            o1.flow.src_asn is None
            or o2.flow.src_asn is None
            or o1.flow.src_asn == o2.flow.src_asn
        )
        if overlap:
            raise PlanningError(
                f"contradictory objectives: [{o1}] and [{o2}] pin overlapping traffic to different links"
            )


def _legal_announcement_paths(
    t: Topology, start: int, target: int, banned: frozenset[int]
) -> list[tuple[int, ...]]:
    """Simple valley-free paths a customer-learned route can take from `start`
    to `target` (announcement direction), never crossing `banned` ASes."""
    if start == target:
        return [(start,)]
    paths: list[tuple[int, ...]] = []
    adjacency: dict[int, list[tuple[int, Rel, Rel]]] = {}
    for link in t.links:
        if not link.up:
            continue
        a, b = link.endpoints()
        adjacency.setdefault(a, []).append((b, link.rel_from(a), link.rel_from(b)))
        adjacency.setdefault(b, []).append((a, link.rel_from(b), link.rel_from(a)))

    def walk(node: int, learned: Rel, visited: tuple[int, ...]) -> None:
        for nxt, rel_next, rel_back in sorted(adjacency.get(node, []), key=lambda x: x[0]):
            if nxt in visited or nxt in banned:
                continue
            if not export_permitted(learned, rel_next):
                continue
            path = visited + (nxt,)
            if nxt == target:
                paths.append(path)
            else:
                walk(nxt, rel_back, path)

    walk(start, Rel.CUSTOMER, (start,))
    return paths


def common_upstream_check(
    t: Topology, objectives: Sequence[Objective]
) -> list[InfeasibilityWitness]:
    """Screen same-prefix objective pairs that no prepending pattern can
    split.  Sound, not complete: every witness is a real conflict."""
    witnesses: list[InfeasibilityWitness] = []
    for o1, o2 in itertools.combinations(objectives, 2):
        if o1.flow.dst_prefix != o2.flow.dst_prefix:
            continue
        if o1.required_link == o2.required_link:
            continue
        if o1.flow.src_asn is None or o2.flow.src_asn is None:
            continue
        if o1.flow.src_asn == o2.flow.src_asn:
            continue
        dest = o1.flow.dst_asn
        p1 = t.link_by_id(o1.required_link).other(dest)
        p2 = t.link_by_id(o2.required_link).other(dest)
        if p1 == p2:
            witnesses.append(InfeasibilityWitness(o1, o2, SAME_PROVIDER))
            continue
        banned = frozenset({dest})
        paths1 = _legal_announcement_paths(t, p1, o1.flow.src_asn, banned)
        paths2 = _legal_announcement_paths(t, p2, o2.flow.src_asn, banned)
        if not paths1 or not paths2:
            continue
        on_all1 = set.intersection(*(set(p) for p in paths1))
        on_all2 = set.intersection(*(set(p) for p in paths2))
        shared = (on_all1 & on_all2) - {o1.flow.src_asn, o2.flow.src_asn, dest}
        if not shared:
            continue
        # "First merge": the shared AS closest to the providers along the
        # first objective's candidate paths.
        def first_index(x: int) -> int:
            return min(path.index(x) for path in paths1 if x in path)

        pivot = min(shared, key=lambda x: (first_index(x), x))
        witnesses.append(InfeasibilityWitness(o1, o2, pivot))
    return witnesses


def _build_atoms(
    t: Topology, dest: int, objectives: Sequence[Objective]
) -> list[Action]:
    links = sorted(t.up_links_of(dest), key=lambda l: l.id)
    origs = sorted(t.originated_by(dest), key=Prefix.sort_key)
    provider_links: dict[int, int] = {}
    for l in links:
        provider_links[l.other(dest)] = provider_links.get(l.other(dest), 0) + 1
    med_capable = {l.id for l in links if provider_links[l.other(dest)] >= 2}
    atoms: list[Action] = []
    for p in origs:
        for l in links:
            atoms.append(Action.withhold(p, l.id))
            cat = t.catalogs.get(l.other(dest))
            if cat is not None:
                for c in sorted(cat.communities(), key=Community.sort_key):
                    atoms.append(Action.attach(p, l.id, c))
            if l.id in med_capable:
                for v in (10, 20):
                    atoms.append(Action.set_med(p, l.id, v))
    subs = sorted(
        {o.flow.dst_prefix for o in objectives if o.flow.dst_prefix not in set(origs)},
        key=Prefix.sort_key,
    )
    for sp in subs:
        for l in links:
            atoms.append(Action.advertise_more_specific(sp, l.id))
    return sorted(atoms, key=Action.sort_key)


def te_config_from_actions(
    t: Topology,
    dest: int,
    actions: Sequence[Action],
    lp_overrides: Mapping[tuple[int, int], int] | None = None,
) -> TeConfig | None:
    """Expand an action set into an explicit advertisement table, or None when
    the set is internally inconsistent (e.g. a community attached to a
    withheld announcement)."""
    links = sorted(t.up_links_of(dest), key=lambda l: l.id)
    link_ids = {l.id for l in links}
    origs = t.originated_by(dest)
    present: dict[tuple[Prefix, str], dict] = {
        (p, l.id): {"communities": set(), "med": None} for p in origs for l in links
    }
    by_phase = sorted(actions, key=lambda a: (a.kind is not ActionKind.WITHHOLD, a.sort_key()))
    structural = [a for a in by_phase if a.kind in (ActionKind.WITHHOLD, ActionKind.ADVERTISE, ActionKind.ADVERTISE_MORE_SPECIFIC)]
    attachments = [a for a in by_phase if a.kind in (ActionKind.ATTACH_COMMUNITY, ActionKind.SET_MED)]
    for a in structural:
        if a.link_id not in link_ids:
            return None
        key = (a.prefix, a.link_id)
        if a.kind is ActionKind.WITHHOLD:
            if key not in present:
                return None
            del present[key]
        elif a.kind is ActionKind.ADVERTISE:
            if a.prefix not in origs or key in present:
                return None
            present[key] = {"communities": set(), "med": None}
        else:  # more specific
            if key in present:
                return None
            if not any(a.prefix.is_strict_subprefix_of(p) for p in origs):
                return None
            present[key] = {"communities": set(), "med": None}
    for a in attachments:
        key = (a.prefix, a.link_id)
        if key not in present:
            return None
        if a.kind is ActionKind.ATTACH_COMMUNITY:
            cat = t.catalogs.get(t.link_by_id(a.link_id).other(dest))
            if cat is None or a.community not in cat.communities():
                return None
            if a.community in present[key]["communities"]:
                return None
            present[key]["communities"].add(a.community)
        else:
            if present[key]["med"] is not None:
                return None
            present[key]["med"] = a.med
    ads = tuple(
        Advertisement(dest, p, link_id, frozenset(attrs["communities"]), attrs["med"])
        for (p, link_id), attrs in sorted(
            present.items(), key=lambda kv: (kv[0][0].sort_key(), kv[0][1])
        )
    )
    return TeConfig(ads, dict(lp_overrides or {}))


def _prepend_amount(t: Topology, dest: int, action: Action) -> int:
    if action.kind is not ActionKind.ATTACH_COMMUNITY:
        return 0
    cat = t.catalogs.get(t.link_by_id(action.link_id).other(dest))
    if cat is None:
        return 0
    rule = cat.prepend_rules.get(action.community)
    return rule[1] if rule else 0


def plan_cost(t: Topology, dest: int, actions: Sequence[Action]) -> tuple:
    weight = sum(ACTION_WEIGHT[a.kind] for a in actions)
    prepends = sum(_prepend_amount(t, dest, a) for a in actions)
    return (weight, prepends, tuple(a.sort_key() for a in sorted(actions, key=Action.sort_key)))


def _objective_satisfied(
    state: ConvergedState, t: Topology, dest: int, o: Objective
) -> bool:
    sources = _objective_sources(t, dest, o)
    if not sources:
        return False
    any_reachable = False
    for src in sources:
        hops = resolve_forwarding(state, t, src, o.flow.dst_prefix)
        if not hops:
            continue
        last = t.link_by_id(hops[-1])
        if dest not in last.endpoints():
            continue
        any_reachable = True
        if last.id != o.required_link:
            return False
    return any_reachable


def _demanded_moves(
    t: Topology,
    dest: int,
    objectives: Sequence[Objective],
    moves: Sequence[tuple[int, Prefix, str, str]],
) -> set[tuple[int, Prefix, str, str]]:
    demanded = set()
    for move in moves:
        src, prefix, _old, new = move
        for o in objectives:
            if o.flow.dst_prefix != prefix or o.required_link != new:
                continue
            if o.flow.src_asn is None or o.flow.src_asn == src:
                demanded.add(move)
                break
    return demanded


def _side_effects(
    t: Topology,
    dest: int,
    objectives: Sequence[Objective],
    base: IngressMap,
    new: IngressMap,
) -> tuple[tuple[int, Prefix, str, str], ...]:
    """Moves of stub-source traffic not demanded by any objective.  Transit
    ASes necessarily co-move with the stubs behind them, so only stub sources
    are reported."""
    moves = [m for m in diff_ingress(base, new) if t.roles.get(m[0]) == "stub"]
    demanded = _demanded_moves(t, dest, objectives, moves)
    return tuple(m for m in moves if m not in demanded)


def plan_inbound_te(
    t: Topology,
    dest: int,
    objectives: Sequence[Objective],
    budget: Budget = Budget(),
    lp_overrides: Mapping[tuple[int, int], int] | None = None,
) -> Plan | Infeasible | Exhausted:
    require_valid(t)
    validate_objectives(t, dest, objectives)
    witnesses = common_upstream_check(t, objectives)
    if witnesses:
        return Infeasible(tuple(witnesses))

    lp_overrides = dict(lp_overrides or {})
    lp_flag = bool(lp_overrides)
    baseline_te = te_config_from_actions(t, dest, [], lp_overrides)
    baseline_state = propagate_to_convergence(t, baseline_te, validate=False)
    baseline_map = ingress_map(baseline_state, t, dest)

    atoms = _build_atoms(t, dest, objectives)
    candidates: list[tuple[tuple, tuple[Action, ...]]] = []
    for size in range(0, budget.max_actions + 1):
        for combo in itertools.combinations(atoms, size):
            candidates.append((plan_cost(t, dest, combo), combo))
    candidates.sort(key=lambda cv: cv[0])

    tried = 0
    for _cost, combo in candidates:
        te = te_config_from_actions(t, dest, combo, lp_overrides)
        if te is None:
            continue
        tried += 1
        try:
            state = propagate_to_convergence(t, te, validate=False)
        except OscillationError:
            continue
        if not all(_objective_satisfied(state, t, dest, o) for o in objectives):
            continue
        predicted = ingress_map(state, t, dest)
        actions = tuple(sorted(combo, key=Action.sort_key))
        side = _side_effects(t, dest, objectives, baseline_map, predicted)
        return Plan(actions, predicted, side, lp_flag)
    return Exhausted(tried, budget.max_actions)


def evaluate_plan(
    t: Topology,
    dest: int,
    plan: Plan,
    objectives: Sequence[Objective],
    lp_overrides: Mapping[tuple[int, int], int] | None = None,
) -> EvaluationReport:
    """Independent re-simulation of a plan; nothing is copied from the plan
    except its action list."""
    require_valid(t)
    validate_objectives(t, dest, objectives)
    te = te_config_from_actions(t, dest, plan.actions, lp_overrides)
    if te is None:
        raise PlanningError("plan contains invalid action references")
    state = propagate_to_convergence(t, te, validate=False)
    satisfied = tuple(_objective_satisfied(state, t, dest, o) for o in objectives)
    baseline_te = te_config_from_actions(t, dest, [], lp_overrides)
    baseline_map = ingress_map(propagate_to_convergence(t, baseline_te, validate=False), t, dest)
    new_map = ingress_map(state, t, dest)
    side = _side_effects(t, dest, objectives, baseline_map, new_map)
    return EvaluationReport(satisfied, side, state.rounds_used)
