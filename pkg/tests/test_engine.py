import random

import pytest

import gen
from bgpsteer import (
    OscillationError,
    Prefix,
    TeConfig,
    parse_scenario,
    propagate_to_convergence,
)
from bgpsteer.topology import LOCAL

P1 = Prefix.parse("10.1.0.0/16")
P2 = Prefix.parse("10.2.0.0/16")

DUAL = open("scenarios/dualprovider_baseline.scn").read()


def run(text):
    s = parse_scenario(text)
    return s, propagate_to_convergence(s.topology, s.te_config)


def test_dualprovider_baseline_paths():
    _, state = run(DUAL)
    assert state.selected(65101, P1).as_path == (100, 65001)
    assert state.selected(65102, P1).as_path == (200, 65001)
    assert state.selected(65101, P2).as_path == (100, 65001)
    assert state.selected(65102, P2).as_path == (200, 65001)


def test_dualprovider_prepend_flips_s1_to_the_other_provider():
    s, state = run(open("scenarios/dualprovider_prepend_p2.scn").read())
    assert state.selected(65101, P2).as_path == (400, 200, 65001)
    assert state.selected(65101, P1).as_path == (100, 65001)
    candidates = {r.as_path for r in state.candidates(65101, P2)}
    assert (100, 100, 100, 65001) in candidates  # the prepended, rejected one


def test_zero_originations_fixed_point_in_one_round():
    _, state = run("as 1 stub\nas 2 transit\nlink l1 1 2 c2p\n")
    assert state.rounds_used == 1
    assert all(not by for by in state.loc_rib.values())


def test_local_routes_present_at_origin():
    _, state = run("as 1 stub\nas 2 transit\nlink l1 1 2 c2p\noriginate 1 10.1.0.0/16\n")
    entry = state.loc_rib[1][P1]
    assert entry.route.learned_on == LOCAL
    assert entry.route.as_path == ()


def test_loop_freedom():
    _, state = run(DUAL)
    for asn, by_prefix in state.loc_rib.items():
        for entry in by_prefix.values():
            assert asn not in entry.route.as_path


def test_oscillation_detected_with_changing_pairs():
    s = parse_scenario(open("scenarios/oscillate.scn").read())
    with pytest.raises(OscillationError) as err:
        propagate_to_convergence(s.topology, s.te_config)
    assert err.value.changing == ((100, P1), (200, P1))


def test_max_rounds_override():
    s = parse_scenario(DUAL)
    with pytest.raises(OscillationError):
        propagate_to_convergence(s.topology, s.te_config, max_rounds=1)


def test_determinism_bit_identical():
    s = parse_scenario(DUAL)
    a = propagate_to_convergence(s.topology, s.te_config)
    b = propagate_to_convergence(s.topology, s.te_config)
    assert a == b
    assert a.dump() == b.dump()
    assert a.rounds_used == b.rounds_used


def test_fixed_point_stable_under_extra_round():
    s = parse_scenario(DUAL)
    a = propagate_to_convergence(s.topology, s.te_config)
    b = propagate_to_convergence(s.topology, s.te_config, max_rounds=a.rounds_used + 1)
    assert a.loc_rib == b.loc_rib and a.adj_rib_in == b.adj_rib_in


def test_trace_callback_sees_each_round():
    s = parse_scenario(DUAL)
    rounds = []
    propagate_to_convergence(s.topology, s.te_config, trace=lambda n, dump: rounds.append(n))
    assert rounds == list(range(1, rounds[-1] + 1))


def test_selected_is_maximum_of_candidates():
    from bgpsteer.routes import best_of

    _, state = run(DUAL)
    for asn, by_prefix in state.loc_rib.items():
        for prefix, entry in by_prefix.items():
            cands = state.candidates(asn, prefix)
            if entry.route.learned_on != LOCAL and cands:
                assert entry.route == best_of(cands)


def test_best_route_longest_prefix_match():
    s, state = run(open("scenarios/failover_morespecific.scn").read())
    sub = Prefix.parse("10.1.128.0/17")
    inner = Prefix.parse("10.1.129.0/24")
    assert state.best_route(65101, inner).prefix == sub
    assert state.best_route(65101, Prefix.parse("10.1.1.0/24")).prefix == P1
    assert state.best_route(65101, sub).prefix == sub  # exact entry wins
    assert state.best_route(65101, Prefix.parse("192.168.0.0/16")) is None
    with pytest.raises(KeyError):
        state.best_route(4242, P1)


def test_link_id_local_is_reserved():
    from bgpsteer import ScenarioError

    with pytest.raises(ScenarioError):
        parse_scenario("as 1 stub\nas 2 stub\nlink local 1 2 p2p\n")


def test_med_basic_golden():
    _, state = run(open("scenarios/med_basic.scn").read())
    assert state.loc_rib[100][P1].route.learned_on == "l1"
    assert state.loc_rib[100][P1].route.med == 10


def test_med_ignored_across_neighbors_golden():
    _, state = run(open("scenarios/med_scope.scn").read())
    chosen = state.selected(65101, P1)
    assert chosen.as_path == (100, 65001)  # lower first-hop ASN, despite med 20
    assert chosen.med == 20


def test_dump_is_sorted_and_stable():
    _, state = run(DUAL)
    dump = state.dump()
    assert dump.startswith("rounds ")
    as_lines = [l for l in dump.splitlines() if l.startswith("as ")]
    assert as_lines == sorted(as_lines, key=lambda l: int(l.split()[1]))


def test_validation_gate():
    from bgpsteer import Link, Topology, TopologyError

    t = Topology({1: "stub"}, (Link("l1", 1, 2, 1),), {}, {})
    with pytest.raises(TopologyError):
        propagate_to_convergence(t, TeConfig())


def test_te_config_validation_errors():
    s = parse_scenario(DUAL)
    from bgpsteer import Advertisement

    bad = TeConfig((Advertisement(65001, Prefix.parse("192.168.0.0/16"), "l1"),), {})
    with pytest.raises(ValueError):
        propagate_to_convergence(s.topology, bad)


def test_oracle_equivalence_sample():
    rng = random.Random(101)
    for _ in range(200):
        t = gen.rand_topology(rng)
        te = gen.rand_te(rng, t)
        state = propagate_to_convergence(t, te)
        sim = {a: {p: e.route for p, e in by.items()} for a, by in state.loc_rib.items()}
        assert sim == gen.oracle_loc_ribs(t, te)


def test_valley_free_sample():
    rng = random.Random(103)
    for _ in range(150):
        t = gen.rand_topology(rng)
        te = gen.rand_te(rng, t)
        state = propagate_to_convergence(t, te)
        for asn, by_prefix in state.loc_rib.items():
            for entry in by_prefix.values():
                if entry.route.learned_on == LOCAL:
                    continue
                assert gen.is_valley_free(t, asn, entry.route.as_path)
