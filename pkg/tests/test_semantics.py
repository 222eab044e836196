import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import DATA, sample, random_trace, random_wait_only
from waitonly.protocol import recv, send
from waitonly.semantics import (
    Lasso, Semantics, Step, StepError, Trace, able_receivers, broadcast_step, from_multiset,
    future_index_set, is_well_formed, make_step, next_action, rbn_step, to_multiset, validate_lasso,
    validate_trace, well_formize, well_formize_all,
)

QIN = "q_in"


def sample_trace():
    return Trace.from_json(sample(), json.loads((DATA / "sample_trace.json").read_text()))


def test_sample_trace_replays():
    tr = sample_trace()
    assert tr.configs == [
        (QIN, QIN, QIN), ("q1", QIN, QIN), ("q1", "q1", QIN), ("q5", "q2", QIN),
        ("q3", "q2", QIN), ("q3", "q3", "q7"),
    ]
    assert validate_trace(sample(), tr, grounded=True)
    assert len(tr) == 6 and tr.n == 3


def test_trace_json_roundtrip():
    tr = sample_trace()
    d = tr.to_json()
    assert d["format"] == 1
    assert Trace.from_json(sample(), json.loads(json.dumps(d))).configs == tr.configs


class TestSteps:
    def test_broadcast_forces_receptions(self):
        p = sample()
        c = broadcast_step(p, ("q7", "q2", QIN), 3, send(QIN, "b", "q7"))
        assert c == (QIN, "q3", "q7")

    def test_unresolved_choice_is_an_error(self):
        with pytest.raises(StepError):
            broadcast_step(sample(), ("q1", QIN), 2, send(QIN, "a", QIN))

    def test_wrong_sender(self):
        with pytest.raises(StepError):
            broadcast_step(sample(), ("q1", QIN), 1, send(QIN, "a", QIN))

    def test_rbn_lets_receivers_miss(self):
        p = sample()
        c = rbn_step(p, ("q7", "q2", QIN), 3, send(QIN, "b", "q7"), receivers=[2])
        assert c == ("q7", "q3", "q7")
        with pytest.raises(StepError):
            rbn_step(p, ("q7", QIN, QIN), 3, send(QIN, "b", "q7"), receivers=[2])

    def test_able_receivers(self):
        assert able_receivers(sample(), ("q7", "q2", QIN, "q5"), 3, "b") == {1, 2, 4}

    def test_validate_rejects_missed_reception(self):
        p = sample()
        tr = Trace([("q2", QIN), ("q2", "q7")], [Step(2, send(QIN, "b", "q7"))])
        v = validate_trace(p, tr)
        assert not v and v.index == 0
        assert validate_trace(p, tr, Semantics.RBN)

    def test_grounded(self):
        tr = Trace([("q2", QIN)], [])
        assert validate_trace(sample(), tr)
        assert not validate_trace(sample(), tr, grounded=True)


class TestNextAction:
    def test_next_action_values(self):
        p, tr = sample(), sample_trace()
        assert next_action(p, tr, 2, 1) == ("q3", 4)
        assert next_action(p, tr, 2, 2) == ("q3", 5)

    def test_never_acting_process_gets_qu(self):
        tr = Trace([("q1",)], [])
        assert next_action(sample(), tr, 0, 1) == ("__qu", 1)

    def test_action_state_is_rejected(self):
        with pytest.raises(ValueError):
            next_action(sample(), sample_trace(), 0, 1)

    def test_future_index_set(self):
        p, tr = sample(), sample_trace()
        assert future_index_set(p, tr, 2, "q3") == {4, 5}
        assert future_index_set(p, tr, 2, "q4") == set()


class TestWellFormed:
    def test_rho_prime(self):
        p, tr = sample(), sample_trace()
        assert is_well_formed(p, tr) == (False, (2, 1, 2))
        rho = well_formize(p, tr, 2, 1, 2)
        assert rho.configs == [
            (QIN, QIN, QIN), ("q1", QIN, QIN), ("q1", "q1", QIN), ("q5", "q5", QIN),
            ("q3", "q3", QIN), ("q3", "q3", "q7"),
        ]
        assert validate_trace(p, rho, grounded=True)
        assert is_well_formed(p, rho)[0]

    def test_rho_double_prime_is_refused(self):
        p = sample()
        configs = [(QIN, QIN, QIN), ("q1", QIN, QIN), ("q1", "q1", QIN), ("q2", "q5", QIN),
                   ("q3", "q6", "q7"), ("q4", "q4", "q4")]
        ts = [send(QIN, "d", "q1"), send(QIN, "d", "q1"), send(QIN, "a", QIN),
              send(QIN, "b", "q7"), send("q3", "d", "q4")]
        senders = [1, 2, 3, 3, 1]
        steps = [make_step(p, configs[i], configs[i + 1], senders[i], ts[i]) for i in range(5)]
        tr = Trace(configs, steps)
        assert validate_trace(p, tr, grounded=True)
        assert next_action(p, tr, 2, 1) == ("q3", 4)
        assert next_action(p, tr, 2, 2) == ("q4", 5)
        with pytest.raises(ValueError):
            well_formize(p, tr, 2, 1, 2)

    def test_order_matters(self):
        with pytest.raises(ValueError):
            well_formize(sample(), sample_trace(), 2, 2, 1)

    def test_well_formize_all_on_sample_trace(self):
        p = sample()
        out = well_formize_all(p, sample_trace())
        assert is_well_formed(p, out)[0]
        assert out.configs == well_formize(p, sample_trace(), 2, 1, 2).configs


@given(st.integers(0, 10**9), st.integers(1, 4), st.integers(0, 12))
@settings(max_examples=150, deadline=None)
def test_well_formize_all_properties(seed, n, length):
    """The output is a valid well-formed execution with the same endpoints,
    and no action-state set has more than |Q_W| future indices."""
    rng = random.Random(seed)
    p = random_wait_only(rng)
    tr = random_trace(p, n, length, rng)
    assert validate_trace(p, tr, grounded=True)
    out = well_formize_all(p, tr)
    assert validate_trace(p, out, grounded=True)
    assert is_well_formed(p, out)[0]
    assert out.configs[0] == tr.configs[0] and len(out) == len(tr)
    assert [s.t for s in out.steps] == [s.t for s in tr.steps]
    bound = len(p.classification.waiting)
    for j in range(len(out)):
        for qa in p.classification.action:
            assert len(future_index_set(p, out, j, qa)) <= bound


@given(st.integers(0, 10**9), st.integers(1, 4), st.integers(0, 10))
@settings(max_examples=100, deadline=None)
def test_rbn_walks_validate(seed, n, length):
    rng = random.Random(seed)
    p = random_wait_only(rng)
    tr = random_trace(p, n, length, rng, rbn=True)
    assert validate_trace(p, tr, Semantics.RBN, grounded=True)


@given(st.integers(0, 10**9), st.integers(1, 4), st.integers(0, 10))
@settings(max_examples=100, deadline=None)
def test_broadcast_walks_are_rbn_walks(seed, n, length):
    rng = random.Random(seed)
    p = random_wait_only(rng)
    tr = random_trace(p, n, length, rng)
    assert validate_trace(p, tr, Semantics.BROADCAST)
    assert validate_trace(p, tr, Semantics.RBN)


def test_multiset_roundtrip():
    c = ("q1", QIN, "q1")
    m = to_multiset(c)
    assert m == {"q1": 2, QIN: 1}
    assert sorted(from_multiset(m)) == sorted(c)


class TestLasso:
    def test_open_cycle_is_rejected(self):
        p = sample()
        t = send(QIN, "b", "q7")
        tr = Trace.replay(p, (QIN, QIN), [Step(1, t), Step(2, t)])
        assert tr.last == (QIN, "q7")
        v = validate_lasso(p, Lasso(tr, 0, 1), t)
        assert not v and v.reason == "cycle does not close"

    def test_closed_cycle(self):
        p = sample()
        t = send(QIN, "b", "q7")
        configs = [(QIN, QIN), ("q7", QIN), (QIN, "q7"), ("q7", QIN)]
        tr = Trace.replay(p, configs[0], [Step(1, t), Step(2, t), Step(1, t)])
        assert tr.configs == configs
        lasso = Lasso(tr, 1, 1)
        assert validate_lasso(p, lasso, t)
        assert lasso.takes(p, t) == [2]
        assert validate_lasso(p, lasso, recv("q7", "b", QIN))
        assert not validate_lasso(p, lasso, send(QIN, "d", "q1"))
        back = Lasso.from_json(p, json.loads(json.dumps(lasso.to_json())))
        assert back.cycle_start == 1 and back.tracked == 1
        assert back.trace.configs == configs

    def test_dead_processes(self):
        p = sample()
        t = send(QIN, "b", "q7")
        tr = Trace.replay(p, (QIN, QIN, "q1"), [Step(1, t), Step(2, t), Step(1, t)])
        assert Lasso(tr, 1, 1).dead_processes() == {3}
