"""Synchronous route propagation to a converged fixed point.

Each round every AS recomputes its best routes from the previous round's
snapshot and announces them to all up-link neighbors, subject to valley-free
export, loop prevention and the receiving provider's ingress policies.
Announcements fully replace what a neighbor previously sent over a link, so
withdrawals are just absence.  Round N depends only on round N-1 state, which
makes runs deterministic and the per-AS recomputation trivially parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

from .policies import AnnotatedRoute, egress_apply, ingress_transform, plain
from .routes import (
    COMMUNITY_BUDGET,
    Community,
    Route,
    compare_routes,
    default_local_pref,
    export_permitted,
    local_route,
)
from .topology import LOCAL, Prefix, Rel, Topology, require_valid

# Prepend counts are capped at 3, so converged paths stretch at most that far
# beyond the plain diameter bound.
MAX_PREPEND = 3


class OscillationError(RuntimeError):
    """Propagation failed to reach a fixed point within the round bound."""

    def __init__(self, changing: tuple[tuple[int, Prefix], ...], rounds: int):
        pairs = ", ".join(f"(AS {a}, {p})" for a, p in changing)
        super().__init__(f"no fixed point after {rounds} rounds; still changing: {pairs}")
        self.changing = changing
        self.rounds = rounds


@dataclass(frozen=True, slots=True)
class Advertisement:
    """One announcement by an origin on one of its links."""

    origin: int
    prefix: Prefix
    link_id: str
    communities: frozenset[Community] = frozenset()
    med: int | None = None


@dataclass(frozen=True)
class TeConfig:
    """Traffic-engineering inputs: explicit per-link advertisements plus the
    per-AS LP-override table (an AS's own policy for routes from a neighbor).

    An originated prefix with no explicit advertisement is announced plainly
    on every up link of its origin; one explicit line switches that prefix to
    exactly the listed links (selective advertisement)."""

    advertisements: tuple[Advertisement, ...] = ()
    lp_overrides: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def validate(self, t: Topology) -> None:
        seen: set[tuple[int, Prefix, str]] = set()
        for ad in self.advertisements:
            key = (ad.origin, ad.prefix, ad.link_id)
            if key in seen:
                raise ValueError(f"duplicate advertisement of {ad.prefix} on {ad.link_id}")
            seen.add(key)
            if ad.origin not in t.roles:
                raise ValueError(f"advertisement by undeclared AS {ad.origin}")
            try:
                link = t.link_by_id(ad.link_id)
            except KeyError as exc:
                raise ValueError(str(exc)) from exc
            if ad.origin not in link.endpoints():
                raise ValueError(f"AS {ad.origin} is not on link {ad.link_id}")
            if not any(p.contains(ad.prefix) for p in t.originated_by(ad.origin)):
                raise ValueError(
                    f"AS {ad.origin} advertises {ad.prefix} outside its originated space"
                )
            if len(ad.communities) > COMMUNITY_BUDGET:
                raise ValueError(f"advertisement of {ad.prefix} exceeds the community budget")
            if ad.med is not None and ad.med < 0:
                raise ValueError("MED must be >= 0")
        for (asn, neighbor), lp in self.lp_overrides.items():
            if asn not in t.roles or neighbor not in t.roles:
                raise ValueError(f"LP override references undeclared AS ({asn}, {neighbor})")
            if lp < 0:
                raise ValueError("LP override must be >= 0")


def _announcement_table(
    t: Topology, te: TeConfig
) -> dict[int, dict[tuple[Prefix, str], Advertisement]]:
    """origin -> (prefix, link) -> advertisement, after filling defaults."""
    explicit: dict[int, set[Prefix]] = {}
    for ad in te.advertisements:
        explicit.setdefault(ad.origin, set()).add(ad.prefix)
    table: dict[int, dict[tuple[Prefix, str], Advertisement]] = {}
    for asn in t.originations:
        table[asn] = {}
        for p in t.originated_by(asn):
            if p in explicit.get(asn, set()):
                continue
            for link in t.up_links_of(asn):
                table[asn][(p, link.id)] = Advertisement(asn, p, link.id)
    for ad in te.advertisements:
        table.setdefault(ad.origin, {})[(ad.prefix, ad.link_id)] = ad
    return table


@dataclass(frozen=True)
class ConvergedState:
    """Fixed-point RIBs: per AS, per prefix, all received candidates (by
    incoming link) and the selected best entry."""

    adj_rib_in: Mapping[int, Mapping[Prefix, Mapping[str, AnnotatedRoute]]]
    loc_rib: Mapping[int, Mapping[Prefix, AnnotatedRoute]]
    rounds_used: int

    def candidates(self, asn: int, prefix: Prefix) -> list[Route]:
        return [ar.route for ar in self.adj_rib_in.get(asn, {}).get(prefix, {}).values()]

    def selected(self, asn: int, prefix: Prefix) -> Route | None:
        entry = self.loc_rib.get(asn, {}).get(prefix)
        return entry.route if entry else None

    def best_route(self, asn: int, prefix: Prefix) -> Route | None:
        """Longest-prefix-match lookup: the loc_rib entry whose key is the
        longest installed prefix covering `prefix` (the exact entry when
        installed exactly)."""
        if asn not in self.loc_rib:
            raise KeyError(f"unknown AS: {asn}")
        best_key: Prefix | None = None
        for key in self.loc_rib[asn]:
            if key.contains(prefix) and (best_key is None or key.length > best_key.length):
                best_key = key
        return self.loc_rib[asn][best_key].route if best_key is not None else None

    def dump(self) -> str:
        """Canonical text form, sorted, for golden-file comparison."""
        lines = [f"rounds {self.rounds_used}"]
        for asn in sorted(self.loc_rib):
            lines.append(f"as {asn}")
            prefixes = set(self.loc_rib[asn]) | set(self.adj_rib_in.get(asn, {}))
            for p in sorted(prefixes, key=Prefix.sort_key):
                lines.append(f" rib {p}")
                entry = self.loc_rib[asn].get(p)
                if entry is not None:
                    lines.append(f"  best {_route_line(entry.route)}")
                for link_id in sorted(self.adj_rib_in.get(asn, {}).get(p, {})):
                    cand = self.adj_rib_in[asn][p][link_id]
                    lines.append(f"  cand {_route_line(cand.route)}")
        return "\n".join(lines) + "\n"


def _route_line(r: Route) -> str:
    med = str(r.med) if r.med is not None else "-"
    comms = ",".join(str(c) for c in sorted(r.communities, key=Community.sort_key)) or "-"
    return f"path={r.path_str()} lp={r.local_pref} med={med} from={r.learned_on} comms={comms}"


def best_route(s: ConvergedState, asn: int, prefix: Prefix) -> Route | None:
    return s.best_route(asn, prefix)


def propagate_to_convergence(
    t: Topology,
    te: TeConfig | None = None,
    *,
    max_rounds: int | None = None,
    trace: Callable[[int, str], None] | None = None,
    validate: bool = True,
) -> ConvergedState:
    te = te or TeConfig()
    if validate:
        require_valid(t)
        te.validate(t)

    ann = _announcement_table(t, te)
    # Directed adjacency over up links: asn -> [(link id, neighbor, rel of
    # neighbor from asn)], plus a per-(link, asn) relationship lookup.
    adjacency: dict[int, list[tuple[str, int, Rel]]] = {asn: [] for asn in t.roles}
    rel_at: dict[tuple[str, int], Rel] = {}
    for link in t.links:
        if not link.up:
            continue
        a, b = link.endpoints()
        adjacency[a].append((link.id, b, link.rel_from(a)))
        adjacency[b].append((link.id, a, link.rel_from(b)))
        rel_at[(link.id, a)] = link.rel_from(a)
        rel_at[(link.id, b)] = link.rel_from(b)
    for lst in adjacency.values():
        lst.sort()
    neighbor_rels = {asn: t.neighbor_rels(asn) for asn in t.roles}

    # Local routes exist for every prefix the AS originates or explicitly
    # advertises (more-specifics), even when announced nowhere.
    local_entries: dict[int, dict[Prefix, AnnotatedRoute]] = {asn: {} for asn in t.roles}
    for asn, prefixes in t.originations.items():
        for p in prefixes:
            local_entries[asn][p] = plain(local_route(p, asn))
    for origin, table in ann.items():
        for (p, _link_id) in table:
            local_entries[origin].setdefault(p, plain(local_route(p, origin)))

    adj: dict[int, dict[Prefix, dict[str, AnnotatedRoute]]] = {asn: {} for asn in t.roles}
    loc: dict[int, dict[Prefix, AnnotatedRoute]] = {
        asn: dict(entries) for asn, entries in local_entries.items()
    }

    bound = max_rounds if max_rounds is not None else 2 * len(t.roles) + MAX_PREPEND + 4
    bound = max(bound, 1)
    prev_adj, prev_loc = adj, loc

    for round_no in range(1, bound + 1):
        inbox: dict[int, dict[Prefix, dict[str, tuple[Route, int]]]] = {asn: {} for asn in t.roles}
        for exporter, neighbors in adjacency.items():
            entries = loc[exporter]
            if not entries:
                continue
            catalog = t.catalogs.get(exporter)
            exporter_ann = ann.get(exporter, {})
            for prefix, entry in entries.items():
                route = entry.route
                if route.learned_on == LOCAL:
                    for link_id, neighbor, _rel_neighbor in neighbors:
                        ad = exporter_ann.get((prefix, link_id))
                        if ad is None:
                            continue
                        wire = Route(
                            prefix, (exporter,) + route.as_path, 0,
                            ad.med, ad.communities, LOCAL, route.origin_as,
                        )
                        inbox[neighbor].setdefault(prefix, {})[link_id] = (wire, exporter)
                else:
                    learned_rel = rel_at[(route.learned_on, exporter)]
                    # egress_apply output varies only with the prepend count,
                    # so one wire per count serves all neighbors
                    wire_cache: dict[int, Route] = {}
                    for link_id, neighbor, rel_neighbor in neighbors:
                        if not export_permitted(learned_rel, rel_neighbor):
                            continue
                        if neighbor in entry.suppressed_toward:
                            continue
                        times = entry.prepend_schedule.get(neighbor, 0)
                        wire = wire_cache.get(times)
                        if wire is None:
                            wire = egress_apply(entry, exporter, neighbor, catalog)
                            wire_cache[times] = wire
                        inbox[neighbor].setdefault(prefix, {})[link_id] = (wire, exporter)

        new_adj: dict[int, dict[Prefix, dict[str, AnnotatedRoute]]] = {asn: {} for asn in t.roles}
        for receiver, by_prefix in inbox.items():
            catalog = t.catalogs.get(receiver)
            rels = neighbor_rels[receiver]
            for prefix, by_link in by_prefix.items():
                for link_id, (wire, sender) in by_link.items():
                    if receiver in wire.as_path:
                        continue
                    sender_rel = rel_at[(link_id, receiver)]
                    if (
                        catalog is not None
                        and catalog.drops_community_updates
                        and sender_rel is Rel.CUSTOMER
                        and wire.communities
                    ):
                        continue
                    lp = _ingress_lp(te, catalog, receiver, sender, sender_rel, wire)
                    installed = Route(
                        wire.prefix, wire.as_path, lp,
                        wire.med, wire.communities, link_id, wire.origin_as,
                    )
                    if catalog is not None and sender_rel is Rel.CUSTOMER:
                        annotated = ingress_transform(catalog, installed, rels)
                    else:
                        annotated = plain(installed)
                    new_adj[receiver].setdefault(prefix, {})[link_id] = annotated

        new_loc: dict[int, dict[Prefix, AnnotatedRoute]] = {}
        for asn in t.roles:
            table: dict[Prefix, AnnotatedRoute] = {}
            for prefix in set(local_entries[asn]) | set(new_adj[asn]):
                best: AnnotatedRoute | None = None
                for cand in new_adj[asn].get(prefix, {}).values():
                    if best is None or compare_routes(cand.route, best.route) < 0:
                        best = cand
                local = local_entries[asn].get(prefix)
                if local is not None and (best is None or compare_routes(local.route, best.route) < 0):
                    best = local
                if best is not None:
                    table[prefix] = best
            new_loc[asn] = table

        if trace is not None:
            trace(round_no, ConvergedState(new_adj, new_loc, round_no).dump())

        if new_adj == adj and new_loc == loc:
            return ConvergedState(new_adj, new_loc, round_no)
        prev_adj, prev_loc = adj, loc
        adj, loc = new_adj, new_loc

    changing = _diff_pairs(prev_adj, prev_loc, adj, loc)
    raise OscillationError(changing, bound)


def _ingress_lp(
    te: TeConfig,
    catalog,
    receiver: int,
    sender: int,
    sender_rel: Rel,
    wire: Route,
) -> int:
    """Effective LP at ingress: catalog LP communities (customer routes into a
    catalog owner) beat the AS's own LP-override table, which beats the
    relationship default."""
    if catalog is not None and sender_rel is Rel.CUSTOMER:
        override: int | None = None
        for c in wire.communities:
            lp = catalog.lp_rules.get(c)
            if lp is not None:
                override = lp if override is None else min(override, lp)
        if override is not None:
            return override
    table = te.lp_overrides.get((receiver, sender))
    if table is not None:
        return table
    return default_local_pref(sender_rel)


def _diff_pairs(adj1, loc1, adj2, loc2) -> tuple[tuple[int, Prefix], ...]:
    pairs: set[tuple[int, Prefix]] = set()
    for asn in set(loc1) | set(loc2):
        for prefix in set(loc1.get(asn, {})) | set(loc2.get(asn, {})):
            if loc1.get(asn, {}).get(prefix) != loc2.get(asn, {}).get(prefix):
                pairs.add((asn, prefix))
    for asn in set(adj1) | set(adj2):
        for prefix in set(adj1.get(asn, {})) | set(adj2.get(asn, {})):
            if adj1.get(asn, {}).get(prefix) != adj2.get(asn, {}).get(prefix):
                pairs.add((asn, prefix))
    return tuple(sorted(pairs, key=lambda ap: (ap[0], ap[1].sort_key())))
