import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import sample, random_wait_only
from waitonly.oracle import repcover_explicit, synchro_explicit
from waitonly.protocol import Protocol, recv, send
from waitonly.semantics import Semantics, validate_lasso, validate_trace
from waitonly.solvers import (
    Verdict, _canon, _sparse_successors, population_lasso, rbn_saturate, solve_repcover, solve_repcover_swo,
    solve_synchro, solve_synchro_action, swo_core, swo_core_valid,
)
from waitonly.summary import Construction, prepare

QIN = "q_in"


class TestSampleSynchro:
    @pytest.mark.parametrize("q", ["q1", "q7", "q4"])
    def test_yes_with_replaying_witness(self, q):
        p = sample()
        v = solve_synchro(p, q)
        assert v.yes
        assert validate_trace(p, v.witness, grounded=True)
        assert set(v.witness.last) == {q}

    def test_initial_state_is_trivial(self):
        v = solve_synchro(sample(), QIN)
        assert v.yes and v.method == "trivial"

    @pytest.mark.parametrize("q", ["q2", "q3", "q5", "q6"])
    def test_never_yes(self, q):
        assert solve_synchro(sample(), q, n_max=4).answer in ("no", "unknown")

    def test_action_target_goes_through_the_action_vass(self):
        v = solve_synchro(sample(), "q4")
        assert v.method == "action-vass"
        assert v.bounds["sufficient_cap_log10"] > 0
        with pytest.raises(ValueError):
            solve_synchro_action(sample(), "q1")

    def test_bad_input(self):
        with pytest.raises(ValueError):
            solve_synchro(sample(), "nope")
        mixed = Protocol.build("m", "q", [send("q", "a", "r"), recv("r", "a", "q"),
                                          send("r", "b", "q")])
        with pytest.raises(ValueError):
            solve_synchro(mixed, "r")

    def test_control_graph_no(self):
        # q_in only broadcasts to an action state; w is never entered
        p = Protocol.build("c", QIN, [send(QIN, "a", "x"), recv("w", "a", "x")])
        v = solve_synchro(p, "w")
        assert v.answer == "no" and v.method.endswith("control-graph")

    def test_waiting_initial_state(self):
        p = Protocol.build("w", "w0", [recv("w0", "a", "x")], states=["w0", "x"])
        assert solve_synchro(p, "x").answer == "no"

    def test_json(self):
        d = solve_synchro(sample(), "q1").to_json()
        assert d["answer"] == "yes" and "witness" in d


YES_TRANSITIONS = [send(QIN, "a", QIN), send(QIN, "c", QIN), send(QIN, "b", "q7"),
                   recv("q7", "b", QIN)]


class TestSampleRepcover:
    @pytest.mark.parametrize("t", YES_TRANSITIONS)
    def test_yes(self, t):
        p = sample()
        v = solve_repcover(p, t)
        assert v.yes
        assert validate_lasso(p, v.witness, t)

    @pytest.mark.parametrize("t", sorted(set(sample().transitions) - set(YES_TRANSITIONS)))
    def test_not_yes(self, t):
        v = solve_repcover(sample(), t, n_max=3, max_nodes=2000)
        assert v.answer in ("no", "unknown")

    def test_transition_core_answers_no(self):
        v = solve_repcover(sample(), send(QIN, "d", "q1"))
        assert v.answer == "no" and v.method == "transition-core"

    def test_unknown_transition(self):
        with pytest.raises(ValueError):
            solve_repcover(sample(), send(QIN, "z", "q1"))


class TestSwoCore:
    def test_core_is_valid_and_maximal(self):
        for seed in range(50):
            p = random_wait_only(random.Random(seed), single_wait=True)
            core = swo_core(p)
            assert swo_core_valid(core)
            reach = rbn_saturate(p)
            assert all(t.src in reach and t.dst in reach for t in core)

    def test_sample_core(self):
        assert set(YES_TRANSITIONS) <= swo_core(sample())

    def test_requires_single_wait_only(self):
        with pytest.raises(ValueError):
            solve_repcover_swo(sample(), send(QIN, "a", QIN))

    def test_witness_on_request(self):
        p = Protocol.build("s", QIN, [send(QIN, "a", "w"), recv("w", "a", QIN)])
        v = solve_repcover_swo(p, recv("w", "a", QIN), witness_n=3)
        assert v.yes
        assert validate_lasso(p, v.witness, recv("w", "a", QIN), Semantics.BROADCAST)


@given(st.integers(0, 10**9))
@settings(max_examples=40, deadline=None)
def test_synchro_agrees_with_explicit(seed):
    p = random_wait_only(random.Random(seed), max_states=5)
    for q in sorted(p.states):
        exp = synchro_explicit(p, q, n_max=3, max_depth=10_000)
        v = solve_synchro(p, q, n_max=4, max_configs=20_000)
        if exp.yes:
            assert v.yes
        if v.yes:
            assert validate_trace(p, v.witness, grounded=True)
            assert set(v.witness.last) == {q}
        if v.answer == "no":
            assert not exp.yes


@given(st.integers(0, 10**9))
@settings(max_examples=30, deadline=None)
def test_repcover_agrees_with_explicit(seed):
    p = random_wait_only(random.Random(seed), max_states=4)
    for t in sorted(p.transitions):
        exp = repcover_explicit(p, t, n_max=3)
        v = solve_repcover(p, t, n_max=4, max_nodes=2000)
        if exp.yes:
            assert v.yes
        if v.yes:
            assert validate_lasso(p, v.witness, t)
        if v.answer == "no":
            assert not exp.yes


@given(st.integers(0, 10**9))
@settings(max_examples=60, deadline=None)
def test_swo_algorithm_agrees_with_explicit_rbn(seed):
    p = random_wait_only(random.Random(seed), max_states=5, single_wait=True)
    for t in sorted(p.transitions):
        v = solve_repcover_swo(p, t)
        assert v.yes == repcover_explicit(p, t, n_max=4, semantics=Semantics.RBN).yes


@given(st.integers(0, 10**9))
@settings(max_examples=40, deadline=None)
def test_id_renumbering_is_a_symmetry(seed):
    """Configurations with the same canonical form have the same successor classes."""
    p = random_wait_only(random.Random(seed), max_states=5)
    con = Construction(prepare(p), "synchro", sorted(p.classification.waiting)[0],
                       canonical=True, prune=True, drains=False) \
        if p.classification.waiting else None
    if con is None:
        return
    succ = _sparse_successors(con)

    def classes(key):
        return {(_canon(con, d, nv), tg) for _, d, nv, tg in succ(*key)}

    frontier = [((), ((con.xq[p.initial], 3),))]
    seen = set(frontier)
    while frontier and len(seen) < 300:
        key = frontier.pop()
        c = _canon(con, *key)
        assert _canon(con, *c) == c
        assert classes(key) == classes(c)
        for _, d, nv, _ in succ(*key):
            if (d, nv) not in seen:
                seen.add((d, nv))
                frontier.append((d, nv))


def test_population_lasso_on_sample():
    prep = prepare(sample())
    tf = prep.norm.lift(send(QIN, "b", "q7"))
    con = Construction(prep, "smiley", tf, canonical=True, prune=True, drains=False)
    found, _ = population_lasso(con, 2)
    assert found is not None
    prefix, cycle = found
    assert cycle and sum(1 for e in prefix if e.meta.kind == "pump") == 2


def test_verdict_yes_flag():
    assert Verdict("yes", "m").yes and not Verdict("unknown", "m").yes
