from __future__ import annotations

import pytest

from shopbench.session_model import ActionKind, SessionOutcome, outcome_of, validate_session
from shopbench.shopsim import SEARCH_INPUT_NAME, replay_session
from shopbench.user_oracle import (
    IntentProfile,
    OracleConfig,
    dataset_statistics,
    derive_session_seed,
    generate_dataset,
    generate_session,
)


def searches_of(session):
    return [s.action.text for s in session.steps if s.action.kind is ActionKind.TYPE_AND_SUBMIT]


def test_config_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        OracleConfig(purchase_rate=1.5)
    with pytest.raises(ValueError):
        OracleConfig(typo_prob=-0.1)
    with pytest.raises(ValueError):
        OracleConfig(mean_searches_per_session=0.5)


def test_intent_profile_needs_patience():
    with pytest.raises(ValueError):
        IntentProfile(target_tokens=("a",), patience=1)


def test_seed_mixing_is_stable_and_spread():
    assert derive_session_seed(0, 1) == derive_session_seed(0, 1)
    seeds = {derive_session_seed(0, i) for i in range(200)}
    assert len(seeds) == 200


def test_single_session_is_deterministic(shop):
    config = OracleConfig(seed=9, n_sessions=1)
    a = generate_session(shop, config, 12345)
    b = generate_session(shop, config, 12345)
    assert a == b


def test_every_generated_session_is_valid(small_dataset):
    for session in small_dataset:
        assert validate_session(session) == []


def test_every_generated_session_replays_legally(shop, small_dataset):
    for session in small_dataset:
        replay_session(shop, session)


def test_sessions_have_at_least_two_steps(small_dataset):
    assert min(len(s.steps) for s in small_dataset) >= 2


def test_typo_branch_emits_corrupted_then_corrected(shop):
    config = OracleConfig(seed=21, n_sessions=60, typo_prob=1.0)
    found = 0
    for session in generate_dataset(shop, config):
        searches = searches_of(session)
        if len(searches) < 2:
            continue
        first, second = searches[0], searches[1]
        assert first != second
        # one edit: a deletion shortens by one, a transposition keeps length
        assert len(second) - len(first) in (0, 1)
        assert sorted(first) != sorted(second) or len(first) == len(second)
        found += 1
    assert found >= 20


def test_refinement_branch_extends_the_query(shop):
    config = OracleConfig(seed=4, n_sessions=80, typo_prob=0.0)
    extended = 0
    for session in generate_dataset(shop, config):
        searches = searches_of(session)
        for earlier, later in zip(searches, searches[1:]):
            if later.startswith(earlier + " "):
                extended += 1
    assert extended >= 20


def test_unsatisfied_sessions_end_with_terminate(small_dataset):
    saw_termination = False
    for session in small_dataset:
        if outcome_of(session) is SessionOutcome.TERMINATION:
            saw_termination = True
            assert session.steps[-1].action.kind is ActionKind.TERMINATE
    assert saw_termination


def test_purchase_sessions_view_the_product_first(small_dataset):
    for session in small_dataset:
        if outcome_of(session) is SessionOutcome.PURCHASE:
            final, before = session.steps[-1].action, session.steps[-2].action
            assert final.target_name == "product_page.buy_now"
            assert before.target_name and before.target_name.endswith(".view_product")


def test_first_action_is_always_the_search_bar(small_dataset):
    for session in small_dataset:
        first = session.steps[0].action
        assert first.kind is ActionKind.TYPE_AND_SUBMIT
        assert first.target_name == SEARCH_INPUT_NAME


def test_statistics_on_a_midsize_sample(shop):
    sessions = generate_dataset(shop, OracleConfig(seed=2, n_sessions=2000))
    stats = dataset_statistics(sessions)
    # generous bands; the acceptance suite checks the tight ones at n=10k
    assert 2.6 <= stats["mean_searches_per_session"] <= 3.05
    assert 0.11 <= stats["purchase_rate"] <= 0.17
    assert stats["search_filter_ratio"] >= 7.0


def test_dataset_ids_are_unique_and_seed_tagged(small_dataset):
    ids = [s.session_id for s in small_dataset]
    assert len(set(ids)) == len(ids)
    assert all(sid.startswith("s-11-") for sid in ids)
    assert len({s.user_id for s in small_dataset}) > 1


def test_reasonings_start_empty(small_dataset):
    assert all(step.reasoning is None for s in small_dataset for step in s.steps)
