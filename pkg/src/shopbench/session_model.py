"""Core data model for shopping sessions and their on-disk JSONL format.

A session is an ordered sequence of steps; each step pairs the simplified
context the user observed with the action they took and, once synthesized,
a first-person reasoning sentence. Sessions always start with a search and
always end with either a buy-now click or a terminate action.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .html_context import SimplifiedContext, render, resolve, simplify

BUY_NOW_SEGMENT = "buy_now"


class SessionError(Exception):
    pass


class InvalidSessionError(SessionError):
    pass


class MalformedRecordError(SessionError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class ActionKind(str, Enum):
    CLICK = "click"
    TYPE_AND_SUBMIT = "type_and_submit"
    TERMINATE = "terminate"


@dataclass(frozen=True)
class Action:
    """One browser operation: click a named element, type text into a named
    input and submit, or terminate the session."""

    kind: ActionKind
    target_name: str | None = None
    text: str | None = None

    def __post_init__(self) -> None:
        if self.kind is ActionKind.TERMINATE:
            if self.target_name is not None or self.text is not None:
                raise ValueError("terminate takes no target and no text")
        elif self.kind is ActionKind.CLICK:
            if not self.target_name:
                raise ValueError("click requires a target name")
            if self.text is not None:
                raise ValueError("click takes no text")
        elif self.kind is ActionKind.TYPE_AND_SUBMIT:
            if not self.target_name:
                raise ValueError("type_and_submit requires a target name")
            if not self.text:
                raise ValueError("type_and_submit requires non-empty text")
        else:  # pragma: no cover - enum is closed
            raise ValueError(f"unknown action kind {self.kind!r}")

    @classmethod
    def click(cls, name: str) -> "Action":
        return cls(ActionKind.CLICK, target_name=name)

    @classmethod
    def type_and_submit(cls, name: str, text: str) -> "Action":
        return cls(ActionKind.TYPE_AND_SUBMIT, target_name=name, text=text)

    @classmethod
    def terminate(cls) -> "Action":
        return cls(ActionKind.TERMINATE)

    @property
    def final_segment(self) -> str | None:
        if self.target_name is None:
            return None
        return self.target_name.rsplit(".", 1)[-1]

    def is_purchase(self) -> bool:
        return self.kind is ActionKind.CLICK and self.final_segment == BUY_NOW_SEGMENT

    def to_obj(self) -> dict:
        obj: dict = {"type": self.kind.value}
        if self.target_name is not None:
            obj["name"] = self.target_name
        if self.text is not None:
            obj["text"] = self.text
        return obj

    @classmethod
    def from_obj(cls, obj: object) -> "Action":
        if not isinstance(obj, dict):
            raise ValueError("action must be a JSON object")
        kind_raw = obj.get("type")
        if not isinstance(kind_raw, str):
            raise ValueError("action is missing a string 'type'")
        try:
            kind = ActionKind(kind_raw)
        except ValueError:
            raise ValueError(f"unknown action type {kind_raw!r}") from None
        name = obj.get("name")
        text = obj.get("text")
        if name is not None and not isinstance(name, str):
            raise ValueError("action 'name' must be a string")
        if text is not None and not isinstance(text, str):
            raise ValueError("action 'text' must be a string")
        return cls(kind, target_name=name, text=text)

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), ensure_ascii=False)


class SessionOutcome(str, Enum):
    PURCHASE = "purchase"
    TERMINATION = "termination"


@dataclass(frozen=True)
class Step:
    """One timestep: the context observed, the action taken, and (after
    synthesis) the reasoning behind it. ``index`` is the 0-based position."""

    context: SimplifiedContext
    action: Action
    reasoning: str | None = None
    index: int = 0

    def with_reasoning(self, reasoning: str) -> "Step":
        return replace(self, reasoning=reasoning)


@dataclass(frozen=True)
class Session:
    session_id: str
    user_id: str
    steps: tuple[Step, ...]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Violation:
    """One broken session invariant; ``step_index`` is None for
    session-level problems."""

    step_index: int | None
    message: str


def validate_session(session: Session) -> list[Violation]:
    """Check every session invariant; an empty list means valid."""
    violations: list[Violation] = []
    if not session.steps:
        return [Violation(None, "session has no steps")]
    for pos, step in enumerate(session.steps):
        if step.index != pos:
            violations.append(Violation(pos, f"step index {step.index} does not match position {pos}"))
    first = session.steps[0]
    if first.action.kind is not ActionKind.TYPE_AND_SUBMIT:
        violations.append(Violation(0, "first action must be a search (type_and_submit)"))
    else:
        node = resolve(first.context, first.action.target_name or "")
        if node is None:
            violations.append(Violation(0, "first action target not found in its context"))
        elif node.tag != "input":
            violations.append(Violation(0, "first action must target the search input"))
    last_index = len(session.steps) - 1
    for pos, step in enumerate(session.steps):
        if step.action.kind is ActionKind.TERMINATE and pos != last_index:
            violations.append(Violation(pos, "terminate may only appear as the final action"))
    final = session.steps[last_index].action
    if final.kind is not ActionKind.TERMINATE and not final.is_purchase():
        violations.append(
            Violation(last_index, "final action must be a buy-now click or a terminate")
        )
    return violations


def outcome_of(session: Session) -> SessionOutcome:
    """Purchase iff the final action clicks a buy-now control; termination
    iff it terminates. Anything else is an invalid session."""
    if not session.steps:
        raise InvalidSessionError("session has no steps")
    final = session.steps[-1].action
    if final.kind is ActionKind.TERMINATE:
        return SessionOutcome.TERMINATION
    if final.is_purchase():
        return SessionOutcome.PURCHASE
    raise InvalidSessionError(f"final action {final.to_json()} is neither buy-now nor terminate")


def session_to_obj(session: Session) -> dict:
    steps = []
    for step in session.steps:
        obj: dict = {"context": render(step.context)}
        if step.reasoning is not None:
            obj["reasoning"] = step.reasoning
        obj["action"] = step.action.to_obj()
        steps.append(obj)
    return {"session_id": session.session_id, "user_id": session.user_id, "steps": steps}


def session_from_obj(obj: object) -> Session:
    if not isinstance(obj, dict):
        raise ValueError("session record must be a JSON object")
    session_id = obj.get("session_id")
    user_id = obj.get("user_id")
    steps_raw = obj.get("steps")
    if not isinstance(session_id, str) or not isinstance(user_id, str):
        raise ValueError("session record needs string 'session_id' and 'user_id'")
    if not isinstance(steps_raw, list):
        raise ValueError("session record needs a 'steps' list")
    steps: list[Step] = []
    for idx, step_obj in enumerate(steps_raw):
        if not isinstance(step_obj, dict):
            raise ValueError(f"step {idx} is not an object")
        context_raw = step_obj.get("context")
        if not isinstance(context_raw, str):
            raise ValueError(f"step {idx} is missing a string 'context'")
        reasoning = step_obj.get("reasoning")
        if reasoning is not None and not isinstance(reasoning, str):
            raise ValueError(f"step {idx} has a non-string 'reasoning'")
        action = Action.from_obj(step_obj.get("action"))
        steps.append(Step(context=simplify(context_raw), action=action, reasoning=reasoning, index=idx))
    return Session(session_id=session_id, user_id=user_id, steps=tuple(steps))


def session_to_json(session: Session) -> str:
    return json.dumps(session_to_obj(session), ensure_ascii=False)


def write_sessions(sessions: Iterable[Session], path: str | Path) -> int:
    """One JSON object per line, UTF-8. Returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for session in sessions:
            fh.write(session_to_json(session))
            fh.write("\n")
            count += 1
    return count


def read_sessions(path: str | Path) -> list[Session]:
    """Inverse of :func:`write_sessions`; raises MalformedRecordError with
    the 1-based line number on any bad record."""
    sessions: list[Session] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(line_no, f"invalid JSON ({exc.msg})") from exc
            try:
                sessions.append(session_from_obj(obj))
            except ValueError as exc:
                raise MalformedRecordError(line_no, str(exc)) from exc
    return sessions


def count_outcomes(sessions: Sequence[Session]) -> dict[str, int]:
    counts = {SessionOutcome.PURCHASE.value: 0, SessionOutcome.TERMINATION.value: 0}
    for session in sessions:
        counts[outcome_of(session).value] += 1
    return counts
