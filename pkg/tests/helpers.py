"""Shared fixtures data and random instance generators for the tests."""

import random
from pathlib import Path

from hypothesis import strategies as st

from waitonly.protocol import Protocol, parse_protocol, recv, send

DATA = Path(__file__).parent / "data"


def sample() -> Protocol:
    return parse_protocol((DATA / "sample.bp").read_text())


def random_wait_only(rng: random.Random, max_states: int = 6, n_msgs: int = 3,
                     single_wait: bool = False, self_loops: bool = True,
                     density: float = 0.35) -> Protocol:
    """A random Wait-Only protocol on q_in, s1, s2, ...

    The initial state is an action state.  Without ``self_loops`` no send
    returns to its own source, so self-loop normalization leaves it as is.
    """
    n = rng.randint(2, max_states)
    states = ["q_in"] + [f"s{i}" for i in range(1, n)]
    msgs = "abcd"[:n_msgs]
    waiting = {q for q in states[1:] if rng.random() < 0.45}
    ts = set()
    for q in states:
        if q in waiting:
            if single_wait:
                ts.add(recv(q, rng.choice(msgs), rng.choice(states)))
                continue
            for m in msgs:
                for d in states:
                    if rng.random() < density / 2:
                        ts.add(recv(q, m, d))
            if not any(t.src == q for t in ts):
                ts.add(recv(q, rng.choice(msgs), rng.choice(states)))
        else:
            for m in msgs:
                for d in states:
                    if not self_loops and d == q:
                        continue
                    if rng.random() < density / 2:
                        ts.add(send(q, m, d))
    if not any(t.src == "q_in" for t in ts):
        d = rng.choice(states[1:] if not self_loops else states)
        ts.add(send("q_in", rng.choice(msgs), d))
    return Protocol.build("rand", "q_in", ts, states=states)


def protocols(**kw):
    """Hypothesis strategy over random Wait-Only protocols."""
    return st.integers(0, 2**32 - 1).map(lambda seed: random_wait_only(random.Random(seed), **kw))


def random_trace(p: Protocol, n: int, length: int, rng: random.Random, rbn: bool = False):
    """A random walk of at most ``length`` steps from the initial configuration."""
    from waitonly.semantics import Step, Trace, able_receivers, broadcast_step, rbn_step

    config = (p.initial,) * n
    configs, steps = [config], []
    for _ in range(length):
        moves = [(e, t) for e, q in enumerate(config, start=1) for t in p.sends_from[q]]
        if not moves:
            break
        e, t = rng.choice(moves)
        able = sorted(able_receivers(p, config, e, t.msg))
        if rbn:
            able = [x for x in able if rng.random() < 0.5]
        choices = {x: rng.choice(p.targets(config[x - 1], t.msg)) for x in able}
        if rbn:
            config = rbn_step(p, config, e, t, able, choices)
        else:
            config = broadcast_step(p, config, e, t, choices)
        steps.append(Step(e, t, frozenset(able), choices))
        configs.append(config)
    return Trace(configs, steps)
