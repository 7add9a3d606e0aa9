from __future__ import annotations

import pytest

from shopbench.reasoning_synth import StubReasoningClient, Synthesizer
from shopbench.session_model import Action, Session, Step
from shopbench.shopsim import Shop, gen_catalog
from shopbench.user_oracle import OracleConfig, generate_dataset


@pytest.fixture(scope="session")
def catalog():
    return gen_catalog(7, 240)


@pytest.fixture(scope="session")
def shop(catalog):
    return Shop(catalog)


@pytest.fixture(scope="session")
def small_dataset(shop):
    return generate_dataset(shop, OracleConfig(seed=11, n_sessions=200))


@pytest.fixture(scope="session")
def reasoned_dataset(small_dataset):
    synthesizer = Synthesizer(StubReasoningClient())
    return synthesizer.synthesize_dataset(small_dataset[:100], concurrency=1)


def drive(shop: Shop, actions: list[Action], session_id: str = "s-test-0",
          user_id: str = "u-test") -> Session:
    """Build a session by walking the shop with the given actions."""
    state, ctx = shop.initial_state()
    steps: list[Step] = []
    for action in actions:
        steps.append(Step(context=ctx, action=action, index=len(steps)))
        state, ctx = shop.step(state, action)
    return Session(session_id, user_id, tuple(steps))


def first_product_link(ctx) -> str:
    from shopbench.html_context import list_interactables

    for name, kind in list_interactables(ctx):
        if name.endswith(".view_product"):
            return name
    raise AssertionError("no product link on page")
