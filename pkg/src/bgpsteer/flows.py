"""The 4-tuple flow abstraction and ingress attribution.

A flow {src_prefix, src_asn, dst_prefix, dst_asn} names a unit of traffic;
wildcards on the source side define the granularity class.  The ingress map
assigns every (source AS, destination prefix) pair to the inter-domain link
through which its traffic enters the destination AS.  Forwarding is
destination-based: source prefixes never influence resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .engine import ConvergedState
from .topology import LOCAL, Prefix, Topology

UNREACHABLE = "unreachable"


class FlowClass(Enum):
    DESTINATION_PREFIX = "destination-prefix"
    SOURCE_ASN = "source-asn"
    SOURCE_PREFIX = "source-prefix"


@dataclass(frozen=True, slots=True)
class Flow:
    """None on the source side means wildcard; the destination side is always
    concrete (routes are announced for concrete prefixes)."""

    src_prefix: Prefix | None
    src_asn: int | None
    dst_prefix: Prefix
    dst_asn: int

    def __str__(self) -> str:
        sp = str(self.src_prefix) if self.src_prefix is not None else "*"
        sa = str(self.src_asn) if self.src_asn is not None else "*"
        return f"{{{sp}, {sa}, {self.dst_prefix}, {self.dst_asn}}}"


def classify(f: Flow) -> FlowClass:
    if f.src_prefix is not None:
        return FlowClass.SOURCE_PREFIX
    if f.src_asn is not None:
        return FlowClass.SOURCE_ASN
    return FlowClass.DESTINATION_PREFIX


def resolve_forwarding(
    s: ConvergedState, t: Topology, src: int, dst_prefix: Prefix
) -> list[str] | None:
    """Hop-by-hop walk by longest-prefix match from `src` toward the AS that
    locally owns the best-matching prefix.  Returns the traversed link ids
    (empty when src is the owner), or None when some hop has no route."""
    if src not in t.roles:
        raise KeyError(f"unknown AS: {src}")
    if t.origin_of(dst_prefix) is None:
        raise ValueError(f"{dst_prefix} is not covered by any originated prefix")
    hops: list[str] = []
    current = src
    seen = {src}
    while True:
        route = s.best_route(current, dst_prefix)
        if route is None:
            return None
        if route.learned_on == LOCAL:
            return hops
        link = t.link_by_id(route.learned_on)
        nxt = link.other(current)
        hops.append(link.id)
        if nxt in seen:  # cannot happen at a fixed point; guard anyway
            return None
        seen.add(nxt)
        current = nxt


@dataclass(frozen=True)
class IngressMap:
    """dest plus (src ASN, destination prefix) -> entry link id or
    "unreachable".  Keys cover every non-destination AS and every prefix the
    destination originates."""

    dest: int
    entries: Mapping[tuple[int, Prefix], str]

    def to_csv(self) -> str:
        lines = ["src_asn,dst_prefix,link"]
        for (src, prefix) in sorted(self.entries, key=lambda k: (k[0], k[1].sort_key())):
            lines.append(f"{src},{prefix},{self.entries[(src, prefix)]}")
        return "\n".join(lines) + "\n"


def ingress_map(s: ConvergedState, t: Topology, dest: int) -> IngressMap:
    prefixes = sorted(t.originated_by(dest), key=Prefix.sort_key)
    if not prefixes:
        raise ValueError(f"AS {dest} originates nothing")
    entries: dict[tuple[int, Prefix], str] = {}
    for src in t.ases():
        if src == dest:
            continue
        for prefix in prefixes:
            hops = resolve_forwarding(s, t, src, prefix)
            if not hops:
                entries[(src, prefix)] = UNREACHABLE
                continue
            last = t.link_by_id(hops[-1])
            if dest not in last.endpoints():
                entries[(src, prefix)] = UNREACHABLE
            else:
                entries[(src, prefix)] = last.id
    return IngressMap(dest, entries)


def diff_ingress(
    base: IngressMap, new: IngressMap
) -> list[tuple[int, Prefix, str, str]]:
    """Entries whose link changed, sorted by (src, prefix)."""
    if base.dest != new.dest:
        raise ValueError("ingress maps are for different destinations")
    if set(base.entries) != set(new.entries):
        raise ValueError("ingress maps cover different key sets")
    moves = []
    for key in sorted(base.entries, key=lambda k: (k[0], k[1].sort_key())):
        old_link, new_link = base.entries[key], new.entries[key]
        if old_link != new_link:
            moves.append((key[0], key[1], old_link, new_link))
    return moves
