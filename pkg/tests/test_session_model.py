from __future__ import annotations

import json

import pytest

from shopbench.session_model import (
    Action,
    ActionKind,
    InvalidSessionError,
    MalformedRecordError,
    Session,
    SessionOutcome,
    Step,
    count_outcomes,
    outcome_of,
    read_sessions,
    session_from_obj,
    session_to_obj,
    validate_session,
    write_sessions,
)
from shopbench.shopsim import SEARCH_INPUT_NAME

from conftest import drive, first_product_link


def buy_session(shop):
    state, ctx = shop.initial_state()
    search = Action.type_and_submit(SEARCH_INPUT_NAME, "gift card")
    _, results_ctx = shop.step(state, search)
    product = first_product_link(results_ctx)
    return drive(shop, [search, Action.click(product), Action.click("product_page.buy_now")])


def test_action_constructors_enforce_invariants():
    with pytest.raises(ValueError):
        Action(ActionKind.TERMINATE, target_name="x")
    with pytest.raises(ValueError):
        Action(ActionKind.CLICK, target_name="a", text="t")
    with pytest.raises(ValueError):
        Action(ActionKind.CLICK)
    with pytest.raises(ValueError):
        Action(ActionKind.TYPE_AND_SUBMIT, target_name="a", text="")
    assert Action.terminate().to_obj() == {"type": "terminate"}


def test_valid_buy_session_has_no_violations(shop):
    assert validate_session(buy_session(shop)) == []


def test_terminate_before_final_step_is_flagged(shop):
    session = buy_session(shop)
    steps = list(session.steps)
    steps[1] = Step(context=steps[1].context, action=Action.terminate(), index=1)
    bad = Session(session.session_id, session.user_id, tuple(steps))
    violations = validate_session(bad)
    assert any(v.step_index == 1 and "terminate" in v.message for v in violations)


def test_first_action_must_be_a_search(shop):
    session = buy_session(shop)
    steps = list(session.steps)
    steps[0] = Step(context=steps[0].context, action=Action.click("search_bar.search_input"), index=0)
    violations = validate_session(Session("s", "u", tuple(steps)))
    assert any(v.step_index == 0 for v in violations)


def test_empty_session_is_invalid():
    violations = validate_session(Session("s", "u", ()))
    assert len(violations) == 1 and violations[0].step_index is None


def test_outcome_purchase_and_termination(shop):
    assert outcome_of(buy_session(shop)) is SessionOutcome.PURCHASE
    terminated = drive(
        shop,
        [Action.type_and_submit(SEARCH_INPUT_NAME, "gift card"), Action.terminate()],
        session_id="s-test-1",
    )
    assert outcome_of(terminated) is SessionOutcome.TERMINATION


def test_outcome_rejects_sessions_ending_elsewhere(shop):
    session = buy_session(shop)
    steps = session.steps[:2]  # ends on a view_product click
    with pytest.raises(InvalidSessionError):
        outcome_of(Session("s", "u", steps))


def test_validate_session_is_pure_and_idempotent(shop):
    session = buy_session(shop)
    first = validate_session(session)
    second = validate_session(session)
    assert first == second == []


def test_serialization_round_trip(small_dataset):
    for session in small_dataset[:40]:
        assert session_from_obj(session_to_obj(session)) == session


def test_wire_format_field_names(shop):
    obj = session_to_obj(buy_session(shop))
    assert set(obj) == {"session_id", "user_id", "steps"}
    step = obj["steps"][0]
    assert step["action"]["type"] == "type_and_submit"
    assert isinstance(step["context"], str)
    assert "reasoning" not in step


def test_write_then_read_files(tmp_path, small_dataset):
    path = tmp_path / "sessions.jsonl"
    write_sessions(small_dataset[:25], path)
    loaded = read_sessions(path)
    assert loaded == small_dataset[:25]


def test_empty_file_reads_as_empty_list(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert read_sessions(path) == []


def test_truncated_line_error_names_the_line(tmp_path, small_dataset):
    path = tmp_path / "bad.jsonl"
    good = json.dumps(session_to_obj(small_dataset[0]))
    path.write_text(good + "\n" + good[: len(good) // 2] + "\n", encoding="utf-8")
    with pytest.raises(MalformedRecordError) as excinfo:
        read_sessions(path)
    assert excinfo.value.line_no == 2


def test_record_with_bad_action_is_malformed(tmp_path):
    path = tmp_path / "bad.jsonl"
    record = {"session_id": "s", "user_id": "u",
              "steps": [{"context": "<html></html>", "action": {"type": "swipe"}}]}
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    with pytest.raises(MalformedRecordError):
        read_sessions(path)


def test_purchases_plus_terminations_cover_every_session(small_dataset):
    counts = count_outcomes(small_dataset)
    assert counts["purchase"] + counts["termination"] == len(small_dataset)
    assert all(outcome_of(s) in (SessionOutcome.PURCHASE, SessionOutcome.TERMINATION)
               for s in small_dataset)
