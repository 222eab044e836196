import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import sample, random_wait_only
from waitonly.oracle import synchro_explicit
from waitonly.protocol import recv, send
from waitonly.semantics import Trace, validate_trace, well_formize_all
from waitonly.summary import (
    DONE, S0, SF, Construction, Smiley, SimState, build_smiley_vass, build_synchro_vass,
    check_implementation, check_representative, coherent, coherent_set, dump_vass, location_name,
    prepare, summary, summary_successors, translate_execution_to_run, translate_run_to_execution,
)
from waitonly.vass import VassConfig, VassError, apply_delta, replay_run

QIN = "q_in"


@pytest.fixture(scope="module")
def prep():
    return prepare(sample())


def sends(prep):
    lift = prep.norm.lift
    return {m: lift(send(QIN, m, dst)) for m, dst in [("a", QIN), ("b", "q7"), ("d", "q1")]}


def steps(prep, s, m):
    return {(st.kind, st.result) for st in summary_successors(prep.protocol, s, sends(prep)[m])}


class TestSummarySteps:
    def test_q1_on_a_splits(self, prep):
        got = steps(prep, summary({"q1"}, "q3", 1), "a")
        assert ("plain", summary({"q2"}, "q3", 1)) in got
        assert ("plain", summary({"q5"}, "q3", 1)) in got

    def test_q2_reaches_its_exit(self, prep):
        assert steps(prep, summary({"q2"}, "q3", 1), "b") == {("done", DONE)}

    def test_sender_can_join(self, prep):
        got = steps(prep, summary({"q5"}, "q4", 1), "b")
        assert ("plain", summary({"q6"}, "q4", 1)) in got
        assert ("joined", summary({"q6", "q7"}, "q4", 1)) in got

    def test_done_on_d(self, prep):
        assert steps(prep, summary({"q6", "q7"}, "q4", 1), "d") == {("done", DONE)}

    def test_wrong_exit_has_no_successor(self, prep):
        assert steps(prep, summary({"q2"}, "q4", 1), "b") == set()

    def test_receptions_need_a_send(self, prep):
        with pytest.raises(ValueError):
            summary_successors(prep.protocol, summary({"q2"}, "q3", 1), recv("q2", "b", "q3"))


def delta_of(con, e):
    return {con.counters[i]: v for i, v in e.delta}


def t_edges(con, loc, t):
    return [e for e in con.edges(loc) if e.meta.kind == "t" and e.meta.t == t]


class TestEdges:
    def test_out_edges_on_d(self, prep):
        con = Construction(prep, "synchro", "q7")
        loc = coherent_set([summary({"q2"}, "q3", 1)])
        got = {(location_name(e.dst), tuple(sorted(delta_of(con, e).items())))
               for e in t_edges(con, loc, sends(prep)["d"])}
        assert ("{q1,q2>q3#1}", (("k1_q3", 1), ("x_q_in", -1))) in got
        assert ("{q2>q3#1;q1>q4#1}", (("k1_q4", 1), ("x_q_in", -1))) in got
        assert ("{q2>q3#1;q1>q3#2}", (("k2_q3", 1), ("x_q_in", -1))) in got

    def test_edge_on_b_and_drain(self, prep):
        con = Construction(prep, "synchro", "q7")
        loc = coherent_set([summary({"q2"}, "q3", 1), summary({"q1"}, "q3", 2),
                            summary({"q1", "q5"}, "q4", 1)])
        want = coherent_set([summary({"q1"}, "q3", 2), summary({"q1", "q6", "q7"}, "q4", 1)])
        hits = [e for e in t_edges(con, loc, sends(prep)["b"]) if e.dst == want]
        assert hits
        assert any(delta_of(con, e) == {"x_q_in": -1, "k1_q4": 1} for e in hits)
        drains = [delta_of(con, e) for e in con.edges(want) if e.meta.kind == "e"]
        assert {"x_q3": 1, "k1_q3": -1} in drains
        # a label that is present cannot be drained
        assert {"x_q3": 1, "k2_q3": -1} not in drains
        assert location_name(want) == "{q1>q3#2;q1,q6,q7>q4#1}"

    def test_counters(self, prep):
        con = Construction(prep, "synchro", "q7")
        q_a = {QIN, "q3", "q4", prep.qu} | set(prep.norm.loops)
        assert {c for c in con.counters if c.startswith("x_")} == {f"x_{q}" for q in q_a}
        # ids run from 1 to |Q_W| + 1
        assert f"k{len(con.Q_W) + 1}_q3" in con.counters
        assert f"k{len(con.Q_W) + 2}_q3" not in con.counters


class TestCoherence:
    def test_same_exit_needs_distinct_ids_and_disjoint_prints(self):
        a = summary({"q1"}, "q3", 1)
        assert coherent([a, summary({"q2"}, "q3", 2)])
        assert not coherent([a, summary({"q2"}, "q3", 1)])
        assert not coherent([a, summary({"q1", "q2"}, "q3", 2)])
        assert coherent([a, summary({"q1"}, "q4", 1)])

    def test_coherent_set_sorts_and_checks(self):
        cs = coherent_set([summary({"q1"}, "q4", 1), summary({"q2"}, "q3", 1)])
        assert [s.exit for s in cs] == ["q3", "q4"]
        with pytest.raises(ValueError):
            coherent_set([summary({"q1"}, "q3", 1), summary({"q2"}, "q3", 1)])

    def test_edges_lead_to_coherent_sets(self, prep):
        con = Construction(prep, "synchro", "q7")
        for loc in con.reachable_locations(limit=300):
            if isinstance(loc, tuple):
                assert coherent(loc)


class TestConstructionOptions:
    def test_bad_targets(self, prep):
        with pytest.raises(ValueError):
            Construction(prep, "synchro", "q3")
        with pytest.raises(ValueError):
            Construction(prep, "action", "q1")
        with pytest.raises(ValueError):
            Construction(prep, "smiley", send("q1", "z", "q2"))
        with pytest.raises(ValueError):
            Construction(prep, "other", "q1")

    def test_canonical_ids(self, prep):
        con = Construction(prep, "synchro", "q7", canonical=True)
        new = {e.meta.new for e in con.edges(()) if e.meta.kind == "t" and e.meta.new}
        assert all(s.id == 1 for s in new)

    def test_pruning_drops_unreachable_exits(self, prep):
        full = Construction(prep, "synchro", "q7")
        pruned = Construction(prep, "synchro", "q7", prune=True)
        assert len(pruned.edges(())) < len(full.edges(()))

    def test_smiley_tagging(self, prep):
        t = send(QIN, "d", "q1")
        con = build_smiley_vass(sample(), t)
        tagged = [e for e in con.edges(()) if isinstance(e.dst, Smiley)]
        assert tagged and all(e.meta.t == t for e in tagged)
        assert con.targets()(tagged[0].dst)

    def test_dump(self, prep):
        text = dump_vass(Construction(prep, "synchro", "q7"), limit=10)
        assert text.startswith("format 1\n") and "trans s0" in text


def sample_q7_run(prep):
    """Pump one process, enter, broadcast b from q_in, finish."""
    con = Construction(prep, "synchro", "q7")
    pump, enter = con.edges(S0)
    b = sends(prep)["b"]
    t = next(e for e in t_edges(con, (), b) if e.dst == con.S_f)
    final = next(e for e in con.edges(con.S_f) if e.meta.kind == "final")
    drain = con.edges(SF)[0]
    return con, [pump, enter, t, final, drain]


class TestTranslation:
    def test_run_to_execution(self, prep):
        con, run = sample_q7_run(prep)
        assert replay_run(con, run)[-1] == VassConfig(SF, (0,) * con.dim)
        tr = translate_run_to_execution(con, run)
        assert tr.configs == [(QIN,), ("q7",)]

    def test_execution_to_run(self, prep):
        con, run = sample_q7_run(prep)
        tr = translate_run_to_execution(con, run)
        back = translate_execution_to_run(con, tr, check=True)
        assert replay_run(con, back)[-1] == VassConfig(SF, (0,) * con.dim)

    def test_run_without_processes(self, prep):
        con, run = sample_q7_run(prep)
        with pytest.raises(VassError):
            translate_run_to_execution(con, run[1:])

    def test_execution_must_end_on_target(self, prep):
        con = Construction(prep, "synchro", "q7")
        with pytest.raises(ValueError):
            translate_execution_to_run(con, Trace([(QIN,)], []))

    def test_representative_of_initial(self, prep):
        con = Construction(prep, "synchro", "q7")
        val = [0] * con.dim
        val[con.xq[QIN]] = 2
        tr = Trace([(QIN, QIN)], [])
        assert check_representative(con, tr, 0, (), tuple(val)) == {}
        val[con.xq[QIN]] = 1
        assert check_representative(con, tr, 0, (), tuple(val)) is None


class TestImplementation:
    def test_counts_must_match(self, prep):
        con = Construction(prep, "synchro", "q7")
        val = [0] * con.dim
        val[con.xq[QIN]] = 1
        with pytest.raises(ValueError):
            check_implementation(con, (), tuple(val), (QIN, QIN))

    def test_summary_counter_hosts_print_states(self, prep):
        con = Construction(prep, "synchro", "q7")
        cs = coherent_set([summary({"q1", "q2"}, "q3", 1)])
        val = [0] * con.dim
        val[con.xl[("q3", 1)]] = 2
        assert check_implementation(con, cs, tuple(val), ("q1", "q2")) is not None
        assert check_implementation(con, cs, tuple(val), ("q1", "q5")) is None
        # the exit state itself is allowed too
        assert check_implementation(con, cs, tuple(val), ("q3", "q1")) is not None


def random_walk_checked(con, n, depth, rng):
    """Follow a random VASS run and check that every configuration of the
    simulated execution is implemented by the current S-configuration."""
    val = [0] * con.dim
    val[con.xq[con.p.initial]] = n
    val = tuple(val)
    cs = ()
    sim = SimState(con, n)
    assert check_implementation(con, cs, val, sim.config) is not None
    for _ in range(depth):
        opts = []
        for e in con.edges(cs):
            if e.meta.kind in ("t", "e"):
                nv = apply_delta(val, e.delta)
                if nv is not None:
                    opts.append((e, nv))
        if not opts:
            break
        e, val = rng.choice(opts)
        sim.apply(e)
        cs = e.dst.cs if isinstance(e.dst, Smiley) else e.dst
        assert check_implementation(con, cs, val, sim.config) is not None
    assert validate_trace(con.p, sim.trace(), grounded=True)


@given(st.integers(0, 10**9))
@settings(max_examples=60, deadline=None)
def test_simulation(seed):
    rng = random.Random(seed)
    p = random_wait_only(rng)
    con = Construction(prepare(p), "action", p.initial)
    for _ in range(10):
        random_walk_checked(con, rng.randint(1, 4), 4, rng)


def test_simulation_exhaustive_single_process():
    for seed in range(30):
        p = random_wait_only(random.Random(seed))
        con = Construction(prepare(p), "action", p.initial)
        stack = [((), tuple(1 if i == con.xq[p.initial] else 0 for i in range(con.dim)),
                  [], 0)]
        while stack:
            cs, val, run, d = stack.pop()
            sim = SimState(con, 1)
            for e in run:
                sim.apply(e)
            assert check_implementation(con, cs, val, sim.config) is not None
            if d == 4:
                continue
            for e in con.edges(cs):
                nv = apply_delta(val, e.delta) if e.meta.kind in ("t", "e") else None
                if nv is not None:
                    dst = e.dst.cs if isinstance(e.dst, Smiley) else e.dst
                    stack.append((dst, nv, run + [e], d + 1))


@given(st.integers(0, 10**9))
@settings(max_examples=60, deadline=None)
def test_cosimulation(seed):
    """Explicit witnesses, made well-formed, translate to checked VASS runs
    ending in (s_f, 0), and those runs translate back to executions."""
    p = random_wait_only(random.Random(seed), self_loops=False)
    prep = prepare(p)
    for q in sorted(p.classification.waiting):
        r = synchro_explicit(p, q, n_max=3)
        if not r.yes:
            continue
        con = Construction(prep, "synchro", q)
        tr = well_formize_all(con.p, r.witness)
        run = translate_execution_to_run(con, tr, check=True)
        assert replay_run(con, run)[-1] == VassConfig(SF, (0,) * con.dim)
        back = translate_run_to_execution(con, run)
        assert validate_trace(con.p, back, grounded=True)
        assert set(back.last) == {q} and back.n == tr.n


def test_build_helpers():
    con = build_synchro_vass(sample(), "q7")
    assert con.variant == "synchro" and con.q_f == "q7"
