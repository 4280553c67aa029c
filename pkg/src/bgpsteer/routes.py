"""Routes and the per-AS decision process.

AS-path convention: first element is the most recent hop, last element is
the originating AS.  A locally originated route has an empty path and
learned_on == "local"; every export prepends the sender once, so the origin's
announcement already carries the origin ASN.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .topology import LOCAL, Prefix, Rel

# Default LP values.  Only the ordering is load-bearing (customer routes
# above peers above providers); the numbers themselves are conventions.
LP_CUSTOMER = 200
LP_PEER = 100
LP_PROVIDER = 50
LP_LOCAL = 1000

# A route may carry at most this many communities; the classic 4-byte
# encoding keeps 64 of them far below the 4096-byte message limit.
COMMUNITY_BUDGET = 64
COMMUNITY_BYTES = 4


@dataclass(frozen=True, slots=True)
class Community:
    """Classic community value, rendered "high:low" (e.g. "100:50")."""

    high: int
    low: int

    def __post_init__(self) -> None:
        if not 0 <= self.high <= 0xFFFF:
            raise ValueError(f"community high part out of range: {self.high}")
        if not 0 <= self.low <= 0xFFFF:
            raise ValueError(f"community low part out of range: {self.low}")

    def __str__(self) -> str:
        return f"{self.high}:{self.low}"

    def sort_key(self) -> tuple[int, int]:
        return (self.high, self.low)


@dataclass(frozen=True, slots=True)
class Route:
    prefix: Prefix
    as_path: tuple[int, ...]
    local_pref: int
    med: int | None
    communities: frozenset[Community]
    learned_on: str  # link id, or "local"
    origin_as: int

    def __post_init__(self) -> None:
        if self.learned_on != LOCAL:
            if not self.as_path:
                raise ValueError("received route with empty AS-path")
            if self.as_path[-1] != self.origin_as:
                raise ValueError("AS-path must end at the origin AS")
        if self.local_pref < 0:
            raise ValueError("local_pref must be >= 0")
        if self.med is not None and self.med < 0:
            raise ValueError("MED must be >= 0")
        if len(self.communities) > COMMUNITY_BUDGET:
            raise ValueError(f"more than {COMMUNITY_BUDGET} communities on one route")

    @property
    def path_len(self) -> int:
        return len(self.as_path)

    @property
    def first_hop(self) -> int:
        return self.as_path[0] if self.as_path else 0

    def path_str(self) -> str:
        return ",".join(str(a) for a in self.as_path) if self.as_path else "-"


def local_route(prefix: Prefix, origin: int) -> Route:
    return Route(prefix, (), LP_LOCAL, None, frozenset(), LOCAL, origin)


def default_local_pref(rel: Rel) -> int:
    """LP assigned to a route by who it was learned from."""
    if rel is Rel.CUSTOMER:
        return LP_CUSTOMER
    if rel is Rel.PEER:
        return LP_PEER
    return LP_PROVIDER


def compare_routes(r1: Route, r2: Route) -> int:
    """Rank two candidates for the same prefix.

    Returns -1 when r1 is better, 1 when r2 is better, 0 only for candidates
    equal on every criterion.  Order:
      1. higher local_pref
      2. shorter AS-path
      3. lower MED, compared only when both routes come from the same
         neighboring AS (absent MED counts as 0)
      4. lower first-hop ASN
      5. lexicographically smaller learned_on link id
    """
    if r1.prefix != r2.prefix:
        raise ValueError("compare_routes: prefix mismatch")
    if r1.local_pref != r2.local_pref:
        return -1 if r1.local_pref > r2.local_pref else 1
    if r1.path_len != r2.path_len:
        return -1 if r1.path_len < r2.path_len else 1
    if r1.first_hop == r2.first_hop:
        m1 = r1.med if r1.med is not None else 0
        m2 = r2.med if r2.med is not None else 0
        if m1 != m2:
            return -1 if m1 < m2 else 1
    if r1.first_hop != r2.first_hop:
        return -1 if r1.first_hop < r2.first_hop else 1
    if r1.learned_on != r2.learned_on:
        return -1 if r1.learned_on < r2.learned_on else 1
    return 0


def best_of(candidates: list[Route]) -> Route | None:
    best = None
    for r in candidates:
        if best is None or compare_routes(r, best) < 0:
            best = r
    return best


def export_permitted(learned_rel: Rel | None, to_rel: Rel) -> bool:
    """Valley-free export rule.  learned_rel is None for local originations;
    customer routes and own prefixes go to everyone, peer and provider routes
    only down to customers."""
    if learned_rel is None or learned_rel is Rel.CUSTOMER:
        return True
    return to_rel is Rel.CUSTOMER


def prepend_path(r: Route, who: int, n: int) -> Route:
    """Insert `who` n times at the front of the AS-path (n=0 is identity)."""
    if n < 0:
        raise ValueError("prepend count must be >= 0")
    if n == 0:
        return r
    return replace(r, as_path=(who,) * n + r.as_path)
