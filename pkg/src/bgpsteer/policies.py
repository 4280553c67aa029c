"""Provider-side ingress community policies.

A transit provider's catalog maps community values to one of three actions
applied when the provider receives routes from a customer:

* LP set inside the provider network,
* suppression of the route toward selected neighbors (customers are always
  still served),
* extra self-prepending when exporting toward selected neighbors.

Communities carrying these instructions are local to the provider and are
stripped from the route at the provider's egress.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, TYPE_CHECKING

from .routes import Community, Route
from .topology import Finding, Rel

if TYPE_CHECKING:
    from .topology import Topology

PREPEND_MIN = 1
PREPEND_MAX = 3

ALL_UPSTREAMS = "all"


@dataclass(frozen=True, slots=True)
class PeerSelector:
    """Which neighbors an action targets: a specific ASN, every upstream
    (peers + providers), or every neighbor tagged with a region."""

    kind: str  # "asn" | "all-upstreams" | "region"
    asn: int | None = None
    region: str | None = None

    @classmethod
    def specific(cls, asn: int) -> "PeerSelector":
        return cls("asn", asn=asn)

    @classmethod
    def all_upstreams(cls) -> "PeerSelector":
        return cls("all-upstreams")

    @classmethod
    def for_region(cls, tag: str) -> "PeerSelector":
        return cls("region", region=tag)

    def __str__(self) -> str:
        if self.kind == "asn":
            return str(self.asn)
        if self.kind == "region":
            return f"region:{self.region}"
        return ALL_UPSTREAMS


@dataclass(frozen=True)
class PolicyCatalog:
    owner: int
    lp_rules: Mapping[Community, int] = field(default_factory=dict)
    suppress_rules: Mapping[Community, PeerSelector] = field(default_factory=dict)
    prepend_rules: Mapping[Community, tuple[PeerSelector, int]] = field(default_factory=dict)
    region_of: Mapping[int, str] = field(default_factory=dict)
    drops_community_updates: bool = False

    def is_empty(self) -> bool:
        return not (
            self.lp_rules
            or self.suppress_rules
            or self.prepend_rules
            or self.region_of
            or self.drops_community_updates
        )

    def communities(self) -> frozenset[Community]:
        return frozenset(self.lp_rules) | frozenset(self.suppress_rules) | frozenset(self.prepend_rules)

    def validate(self, t: "Topology") -> list[Finding]:
        findings: list[Finding] = []
        seen: set[Community] = set()
        for c in sorted(
            list(self.lp_rules) + list(self.suppress_rules) + list(self.prepend_rules),
            key=Community.sort_key,
        ):
            if c in seen:
                findings.append(
                    Finding("error", f"AS {self.owner}: community {c} mapped by more than one rule")
                )
            seen.add(c)
        for c, (_, count) in sorted(self.prepend_rules.items(), key=lambda kv: kv[0].sort_key()):
            if not PREPEND_MIN <= count <= PREPEND_MAX:
                findings.append(
                    Finding("error", f"AS {self.owner}: prepend count {count} for {c} outside {PREPEND_MIN}..{PREPEND_MAX}")
                )
        # Neighbor-ness counts down links too; a selector over a failed link
        # is dormant, not invalid.
        neighbors: set[int] = set()
        for link in t.links:
            if self.owner in link.endpoints():
                neighbors.add(link.other(self.owner))
        selectors = [sel for sel in self.suppress_rules.values()]
        selectors += [sel for sel, _ in self.prepend_rules.values()]
        for sel in selectors:
            if sel.kind == "asn" and sel.asn not in neighbors:
                findings.append(
                    Finding("error", f"AS {self.owner}: selector names non-neighbor AS {sel.asn}")
                )
        for asn in sorted(self.region_of):
            if asn not in neighbors:
                findings.append(
                    Finding("error", f"AS {self.owner}: region tag on non-neighbor AS {asn}")
                )
        return findings

    def expand_selector(self, sel: PeerSelector, neighbors: Mapping[int, Rel], *, exclude_customers: bool) -> set[int]:
        if sel.kind == "asn":
            chosen = {sel.asn} if sel.asn in neighbors else set()
        elif sel.kind == "region":
            chosen = {a for a in neighbors if self.region_of.get(a) == sel.region}
        else:
            chosen = {a for a, rel in neighbors.items() if rel is not Rel.CUSTOMER}
        if exclude_customers:
            chosen = {a for a in chosen if neighbors[a] is not Rel.CUSTOMER}
        return chosen


@dataclass(frozen=True)
class AnnotatedRoute:
    """A received route plus the catalog actions it triggered at ingress."""

    route: Route
    lp_override: int | None = None
    suppressed_toward: frozenset[int] = frozenset()
    prepend_schedule: Mapping[int, int] = field(default_factory=dict)


def plain(route: Route) -> AnnotatedRoute:
    return AnnotatedRoute(route)


def parse_community(text: str) -> Community:
    """Parse the "high:low" notation; both parts are 16-bit decimals."""
    high_s, sep, low_s = text.partition(":")
    if not sep or not high_s.isdigit() or not low_s.isdigit():
        raise ValueError(f"malformed community: {text!r}")
    high, low = int(high_s), int(low_s)
    if high > 0xFFFF or low > 0xFFFF:
        raise ValueError(f"community component over 16 bits: {text!r}")
    return Community(high, low)


def ingress_transform(cat: PolicyCatalog, r: Route, neighbors: Mapping[int, Rel]) -> AnnotatedRoute:
    """Apply the owner's catalog to a route received from a customer.

    Unknown communities are inert.  When several LP rules match, the lowest
    LP wins; when two prepend rules target the same neighbor, the larger
    count wins.  Suppression never targets customers.
    """
    lp_override: int | None = None
    suppressed: set[int] = set()
    schedule: dict[int, int] = {}
    for c in sorted(r.communities, key=Community.sort_key):
        if c in cat.lp_rules:
            lp = cat.lp_rules[c]
            lp_override = lp if lp_override is None else min(lp_override, lp)
        elif c in cat.suppress_rules:
            suppressed |= cat.expand_selector(cat.suppress_rules[c], neighbors, exclude_customers=True)
        elif c in cat.prepend_rules:
            sel, count = cat.prepend_rules[c]
            for asn in cat.expand_selector(sel, neighbors, exclude_customers=False):
                schedule[asn] = max(schedule.get(asn, 0), count)
    return AnnotatedRoute(r, lp_override, frozenset(suppressed), schedule)


def egress_apply(ar: AnnotatedRoute, provider: int, neighbor: int, catalog: PolicyCatalog | None = None) -> Route | None:
    """Turn an installed route into the wire form sent to `neighbor`.

    None when the neighbor is suppressed.  Otherwise the provider is
    prepended 1 + schedule[neighbor] times (the 1 is the normal AS-path
    addition), the provider's own catalog communities are stripped, and LP is
    zeroed since it never crosses the AS boundary.
    """
    if neighbor in ar.suppressed_toward:
        return None
    times = 1 + ar.prepend_schedule.get(neighbor, 0)
    r = ar.route
    communities = r.communities
    if catalog is not None:
        communities = communities - catalog.communities()
    return Route(
        r.prefix,
        (provider,) * times + r.as_path,
        0,
        r.med,
        communities,
        r.learned_on,
        r.origin_as,
    )
