"""AS-level topology: ASes, business relationships, links, prefix originations.

The topology is immutable once built and safe to share across workers.
Relationships are stored per link; a c2p link records which endpoint is the
customer.  Multiple links between the same AS pair are allowed (dual-homed
customers buying two circuits from one provider).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, TYPE_CHECKING

if TYPE_CHECKING:
    from .policies import PolicyCatalog

MIN_ASN = 1
MAX_ASN = 4_294_967_295

LOCAL = "local"  # learned_on marker for locally originated routes


class TopologyError(ValueError):
    """Raised when an operation receives a topology that fails validation."""


def check_asn(value: int) -> int:
    if not isinstance(value, int) or not MIN_ASN <= value <= MAX_ASN:
        raise ValueError(f"ASN out of range: {value!r}")
    return value


@dataclass(frozen=True, slots=True)
class Prefix:
    """IPv4 prefix as (base address, length); host bits must be zero."""

    base: int
    length: int

    def __post_init__(self) -> None:
        if not 0 <= self.length <= 32:
            raise ValueError(f"prefix length out of range: {self.length}")
        if not 0 <= self.base < 2**32:
            raise ValueError("prefix base is not a 32-bit value")
        if self.base & ~self.mask():
            raise ValueError(f"host bits set below /{self.length}")

    def mask(self) -> int:
        return ((1 << self.length) - 1) << (32 - self.length) if self.length else 0

    def contains(self, other: "Prefix") -> bool:
        """True when `other` is inside (or equal to) this prefix."""
        return other.length >= self.length and (other.base & self.mask()) == self.base

    def is_strict_subprefix_of(self, other: "Prefix") -> bool:
        return other.contains(self) and self != other

    @classmethod
    def parse(cls, text: str) -> "Prefix":
        addr, sep, length_s = text.partition("/")
        if not sep:
            raise ValueError(f"prefix missing /length: {text!r}")
        octets = addr.split(".")
        if len(octets) != 4 or not all(o.isdigit() for o in octets):
            raise ValueError(f"bad IPv4 address: {addr!r}")
        values = [int(o) for o in octets]
        if any(v > 255 for v in values):
            raise ValueError(f"bad IPv4 address: {addr!r}")
        if not length_s.isdigit():
            raise ValueError(f"bad prefix length: {length_s!r}")
        base = (values[0] << 24) | (values[1] << 16) | (values[2] << 8) | values[3]
        return cls(base, int(length_s))

    def __str__(self) -> str:
        b = self.base
        return f"{b >> 24}.{(b >> 16) & 0xFF}.{(b >> 8) & 0xFF}.{b & 0xFF}/{self.length}"

    def sort_key(self) -> tuple[int, int]:
        return (self.base, self.length)


class Rel(Enum):
    """What the *other* AS is, from this AS's point of view."""

    CUSTOMER = "customer"
    PEER = "peer"
    PROVIDER = "provider"


@dataclass(frozen=True, slots=True)
class Link:
    """A physical inter-domain link.  For c2p links, `customer` names the
    endpoint buying transit; for p2p it is None."""

    id: str
    a: int
    b: int
    customer: int | None  # None => peer-to-peer
    up: bool = True

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError(f"link {self.id}: endpoints must differ")
        if self.customer is not None and self.customer not in (self.a, self.b):
            raise ValueError(f"link {self.id}: customer is not an endpoint")

    def endpoints(self) -> tuple[int, int]:
        return (self.a, self.b)

    def other(self, asn: int) -> int:
        if asn == self.a:
            return self.b
        if asn == self.b:
            return self.a
        raise ValueError(f"AS {asn} is not on link {self.id}")

    def rel_from(self, asn: int) -> Rel:
        """Relationship of the other endpoint as seen from `asn`."""
        self.other(asn)  # membership check
        if self.customer is None:
            return Rel.PEER
        return Rel.PROVIDER if self.customer == asn else Rel.CUSTOMER


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def errors(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == "error")

    @property
    def warnings(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == "warning")

    def ok(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class Topology:
    """Validated AS graph.  `roles` maps ASN -> "stub" | "transit"."""

    roles: Mapping[int, str]
    links: tuple[Link, ...]
    originations: Mapping[int, frozenset[Prefix]]
    catalogs: Mapping[int, "PolicyCatalog"] = field(default_factory=dict)

    def ases(self) -> list[int]:
        return sorted(self.roles)

    def link_by_id(self, link_id: str) -> Link:
        for link in self.links:
            if link.id == link_id:
                return link
        raise KeyError(f"unknown link id: {link_id}")

    def up_links_of(self, asn: int) -> list[Link]:
        return [l for l in self.links if l.up and asn in l.endpoints()]

    def neighbor_rels(self, asn: int) -> dict[int, Rel]:
        """Neighbor ASN -> relationship over up links.  A neighbor reached over
        both a c2p and a p2p link counts as a customer if any link says so."""
        rank = {Rel.CUSTOMER: 0, Rel.PEER: 1, Rel.PROVIDER: 2}
        out: dict[int, Rel] = {}
        for link in self.up_links_of(asn):
            rel = link.rel_from(asn)
            other = link.other(asn)
            if other not in out or rank[rel] < rank[out[other]]:
                out[other] = rel
        return out

    def originated_by(self, asn: int) -> frozenset[Prefix]:
        return self.originations.get(asn, frozenset())

    def origin_of(self, prefix: Prefix) -> int | None:
        """AS originating a prefix that covers `prefix`, preferring the longest
        covering origination.  None when nothing covers it."""
        best: tuple[int, int] | None = None
        for asn, prefixes in self.originations.items():
            for p in prefixes:
                if p.contains(prefix) and (best is None or p.length > best[0]):
                    best = (p.length, asn)
        return None if best is None else best[1]


def relationship_between(t: Topology, a: int, b: int) -> set[tuple[str, Rel]]:
    """All up links between a and b, with b's role as seen from a."""
    if a not in t.roles:
        raise KeyError(f"unknown AS: {a}")
    if b not in t.roles:
        raise KeyError(f"unknown AS: {b}")
    if a == b:
        raise ValueError("relationship_between: the two ASes must differ")
    out = set()
    for link in t.links:
        if link.up and set(link.endpoints()) == {a, b}:
            out.add((link.id, link.rel_from(a)))
    return out


def _provider_cycle(t: Topology) -> list[int] | None:
    """Cycle in the customer->provider digraph, if any (iterative DFS)."""
    edges: dict[int, set[int]] = {asn: set() for asn in t.roles}
    for link in t.links:
        if link.customer is None:
            continue
        provider = link.other(link.customer)
        if link.customer in edges and provider in edges:
            edges[link.customer].add(provider)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {asn: WHITE for asn in t.roles}
    for start in sorted(edges):
        if color[start] != WHITE:
            continue
        stack: list[tuple[int, Iterable[int]]] = [(start, iter(sorted(edges[start])))]
        color[start] = GREY
        path = [start]
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == GREY:
                    return path[path.index(nxt):] + [nxt]
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    path.append(nxt)
                    stack.append((nxt, iter(sorted(edges[nxt]))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                path.pop()
                stack.pop()
    return None


def validate_topology(t: Topology) -> ValidationReport:
    """Structural checks.  Errors make the topology unusable for simulation;
    warnings flag shapes (provider cycles) where convergence is not guaranteed."""
    findings: list[Finding] = []

    def err(msg: str) -> None:
        findings.append(Finding("error", msg))

    def warn(msg: str) -> None:
        findings.append(Finding("warning", msg))

    for asn, role in t.roles.items():
        if role not in ("stub", "transit"):
            err(f"AS {asn}: unknown role {role!r}")
        try:
            check_asn(asn)
        except ValueError as exc:
            err(str(exc))

    seen_ids: set[str] = set()
    for link in t.links:
        if link.id in seen_ids:
            err(f"duplicate link id {link.id!r}")
        seen_ids.add(link.id)
        for end in link.endpoints():
            if end not in t.roles:
                err(f"link {link.id}: undeclared AS {end}")

    pair_kinds: dict[frozenset[int], set[str]] = {}
    for link in t.links:
        kind = "p2p" if link.customer is None else f"c2p:{link.customer}"
        pair_kinds.setdefault(frozenset(link.endpoints()), set()).add(kind)
    for pair, kinds in sorted(pair_kinds.items(), key=lambda kv: sorted(kv[0])):
        if len(kinds) > 1:
            a, b = sorted(pair)
            warn(f"ASes {a} and {b} have parallel links with differing relationships")

    owners: dict[Prefix, int] = {}
    for asn in sorted(t.originations):
        if asn not in t.roles:
            err(f"origination by undeclared AS {asn}")
            continue
        for p in t.originations[asn]:
            if p in owners and owners[p] != asn:
                err(f"prefix {p} originated by both AS {owners[p]} and AS {asn}")
            owners[p] = asn

    for asn in sorted(t.catalogs):
        cat = t.catalogs[asn]
        if asn not in t.roles:
            err(f"policy catalog owned by undeclared AS {asn}")
            continue
        if not cat.is_empty() and t.roles[asn] != "transit":
            err(f"catalog on non-transit AS {asn}")
        findings.extend(cat.validate(t))

    cycle = _provider_cycle(t)
    if cycle is not None:
        chain = " -> ".join(str(a) for a in cycle)
        warn(f"customer->provider cycle: {chain} (convergence not guaranteed)")

    return ValidationReport(tuple(findings))


def require_valid(t: Topology) -> None:
    report = validate_topology(t)
    if not report.ok():
        msgs = "; ".join(f.message for f in report.errors)
        raise TopologyError(f"invalid topology: {msgs}")
