"""Candidate agents and their I/O contracts.

Three agents share one interface: a replay agent that answers with the
ground truth (the measurement ceiling), a seeded random agent that samples
legal actions (the floor), and an endpoint agent that prompts a completion
API. Model output is parsed strictly: one JSON object with exactly an
``action`` and a ``rationale``, nothing else. This module also exports
sessions as loss-masked training examples (context spans excluded from the
training objective, reasoning and action spans included).
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .html_context import SimplifiedContext, list_interactables, render, resolve
from .llm_client import ChatClient
from .session_model import Action, ActionKind, Session, Step

BASELINE_PROMPT = """\
<IMPORTANT>
Your task is to predict the next action and provide rationale for the action based on the previous actions and context.
You need to pretend that you are a user, browsing one of the largest e-commerce platforms globally and searching for a product to purchase.
The history action (with details described below) and context will be provided to you.
You need to predict the next action and provide rationale for the action.
</IMPORTANT>


# Action Space

An action is represented in JSON format, and there are four primary types of actions:

#### 1. `type_and_submit`:
Type text into an input field and immediately submit the form. Equivalent to typing text into an input and pressing enter key.

{
    "type": "type_and_submit",
    "name": "input_name",
    "text": "search_text"
}


#### 2. `click`:
Click on a button or clickable element identified by `name`.


{
    "type": "click",
    "name": "clickable_name"
}


#### 3. `terminate`:
When you are unsatisfied with the current search result and you don't want to buy anything, use `terminate` to indicate that you want to close the browser window and terminate the task.

{
    "type": "terminate"
}

# Context
Your context will be an **simplified version** of the raw HTML of the one of the largest e-commerce platforms globally page you are looking at. Some interactable elements will be added a unique "name" attribute, which you can use to identify the element to interact with (click or type_and_submit).

# Rationale

The rationale is a first-person sentence of what you are thinking when you make the action. It should be a short sentence that explains why you are making the action.

# Output Format

You need to predict the next action and provide rationale for the action. Your output should follow a strict JSON form:

{
    "action": {
        // action goes here
        "type": "<type>",
        ...
    },
    "rationale": "<rationale>" // rationale goes here, a string
}

<IMPORTANT>
OUTPUT A SINGLE JSON OBJECT, NOTHING ELSE.
</IMPORTANT>"""


@dataclass(frozen=True)
class AgentResponse:
    rationale: str
    action: Action


class IllegalCause(str, Enum):
    NOT_JSON = "not_json"
    SCHEMA_VIOLATION = "schema_violation"
    UNKNOWN_ACTION_TYPE = "unknown_action_type"
    UNRESOLVABLE_TARGET = "unresolvable_target"


@dataclass(frozen=True)
class IllegalOutput:
    raw: str
    cause: IllegalCause


_ACTION_TYPES = {k.value for k in ActionKind}
_REQUIRED_ACTION_KEYS = {
    "click": {"type", "name"},
    "type_and_submit": {"type", "name", "text"},
    "terminate": {"type"},
}


def _strip_fence(text: str) -> str:
    stripped = text.strip()
    if not stripped.startswith("```"):
        return stripped
    lines = stripped.split("\n")
    if len(lines) >= 2 and lines[-1].strip() == "```":
        return "\n".join(lines[1:-1]).strip()
    return stripped


def parse_agent_output(raw: str | bytes) -> AgentResponse | IllegalOutput:
    """Total parser for model output. Accepts exactly one top-level JSON
    object with the fields ``action`` and ``rationale`` (surrounding
    whitespace and a single fenced code block are tolerated); everything
    else comes back as an IllegalOutput value, never an exception."""
    if isinstance(raw, (bytes, bytearray)):
        text = bytes(raw).decode("utf-8", errors="replace")
    else:
        text = str(raw)
    candidate = _strip_fence(text)
    try:
        obj = json.loads(candidate)
    except Exception:
        return IllegalOutput(raw=text, cause=IllegalCause.NOT_JSON)
    if not isinstance(obj, dict):
        return IllegalOutput(raw=text, cause=IllegalCause.NOT_JSON)
    if set(obj.keys()) != {"action", "rationale"}:
        return IllegalOutput(raw=text, cause=IllegalCause.SCHEMA_VIOLATION)
    rationale = obj["rationale"]
    action_obj = obj["action"]
    if not isinstance(rationale, str) or not isinstance(action_obj, dict):
        return IllegalOutput(raw=text, cause=IllegalCause.SCHEMA_VIOLATION)
    action_type = action_obj.get("type")
    if not isinstance(action_type, str):
        return IllegalOutput(raw=text, cause=IllegalCause.SCHEMA_VIOLATION)
    if action_type not in _ACTION_TYPES:
        return IllegalOutput(raw=text, cause=IllegalCause.UNKNOWN_ACTION_TYPE)
    if set(action_obj.keys()) != _REQUIRED_ACTION_KEYS[action_type]:
        return IllegalOutput(raw=text, cause=IllegalCause.SCHEMA_VIOLATION)
    name = action_obj.get("name")
    submitted = action_obj.get("text")
    if "name" in action_obj and (not isinstance(name, str) or not name):
        return IllegalOutput(raw=text, cause=IllegalCause.SCHEMA_VIOLATION)
    if "text" in action_obj and (not isinstance(submitted, str) or not submitted):
        return IllegalOutput(raw=text, cause=IllegalCause.SCHEMA_VIOLATION)
    try:
        action = Action.from_obj(action_obj)
    except ValueError:
        return IllegalOutput(raw=text, cause=IllegalCause.SCHEMA_VIOLATION)
    return AgentResponse(rationale=rationale, action=action)


def serialize_history(history: Sequence[Step]) -> str:
    blocks: list[str] = []
    for step_ in history:
        lines = [f"## Step {step_.index + 1}", "Context:", render(step_.context),
                 "Action:", step_.action.to_json()]
        if step_.reasoning is not None:
            lines += ["Rationale:", step_.reasoning]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def build_baseline_prompt(history: Sequence[Step], current_context: SimplifiedContext) -> str:
    """The fixed instruction block followed by the serialized session
    history (actions, and rationales when present) and the current page."""
    parts = [BASELINE_PROMPT, "", "# Session History", ""]
    history_block = serialize_history(history)
    parts.append(history_block if history_block else "(no previous steps)")
    parts += ["", "# Current Context", render(current_context)]
    return "\n".join(parts)


class Agent(Protocol):
    agent_id: str

    def generate(self, session_id: str, history: Sequence[Step],
                 context: SimplifiedContext) -> AgentResponse | IllegalOutput: ...


class ReplayAgent:
    """Answers every step with the recorded ground truth."""

    def __init__(self, sessions: Iterable[Session]):
        self.agent_id = "replay"
        self._by_id = {s.session_id: s for s in sessions}

    def generate(self, session_id: str, history: Sequence[Step],
                 context: SimplifiedContext) -> AgentResponse | IllegalOutput:
        session = self._by_id.get(session_id)
        if session is None:
            raise KeyError(f"replay agent has no session {session_id!r}")
        step_ = session.steps[len(history)]
        return AgentResponse(rationale=step_.reasoning or "", action=step_.action)


def _mix_seed(session_id: str, step_index: int) -> int:
    digest = hashlib.sha256(f"{session_id}:{step_index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


_RANDOM_WORDS = (
    "shirt", "gift", "card", "blue", "lamp", "socks", "connector",
    "wrench", "mug", "cheap", "best", "large", "holiday",
)


class RandomAgent:
    """Uniformly samples a legal action: one of the page's interactables
    (typing a few lexicon words into inputs) or terminate. Seeded by
    (session id, step index) so runs repeat exactly."""

    def __init__(self) -> None:
        self.agent_id = "random"

    def generate(self, session_id: str, history: Sequence[Step],
                 context: SimplifiedContext) -> AgentResponse | IllegalOutput:
        rng = random.Random(_mix_seed(session_id, len(history)))
        options = list_interactables(context)
        pick = rng.randrange(len(options) + 1)
        if pick == len(options):
            return AgentResponse(rationale="I'm done looking around.", action=Action.terminate())
        name, kind = options[pick]
        if kind == "input":
            text = " ".join(rng.choice(_RANDOM_WORDS) for _ in range(rng.randint(1, 3)))
            action = Action.type_and_submit(name, text)
        else:
            action = Action.click(name)
        return AgentResponse(rationale="Just exploring this page.", action=action)


class EndpointAgent:
    """Prompts a completion client with the baseline instructions.

    By default one call returns rationale and action together; with
    ``two_call`` the rationale is requested first and the action is then
    generated conditioned on it.
    """

    def __init__(self, client: ChatClient, model_name: str = "endpoint", two_call: bool = False):
        self.client = client
        self.two_call = two_call
        self.agent_id = f"endpoint:{model_name}"

    def generate(self, session_id: str, history: Sequence[Step],
                 context: SimplifiedContext) -> AgentResponse | IllegalOutput:
        prompt = build_baseline_prompt(history, context)
        if not self.two_call:
            return parse_agent_output(self.client.complete(prompt))
        rationale = self.client.complete(
            prompt + "\n\nFirst, output only the rationale for the next action as one plain-text sentence."
        ).strip()
        raw = self.client.complete(
            prompt + f"\n\nRationale: {rationale}\nNow output the single JSON object."
        )
        parsed = parse_agent_output(raw)
        if isinstance(parsed, IllegalOutput):
            return parsed
        return AgentResponse(rationale=rationale or parsed.rationale, action=parsed.action)


def generate_step(
    agent: Agent,
    history: Sequence[Step],
    current_context: SimplifiedContext,
    session_id: str = "",
) -> tuple[str, Action] | IllegalOutput:
    """Run one agent step and validate the action against the current page:
    a click or type target that does not resolve is an illegal output."""
    response = agent.generate(session_id, history, current_context)
    if isinstance(response, IllegalOutput):
        return response
    action = response.action
    if action.kind is not ActionKind.TERMINATE:
        if resolve(current_context, action.target_name or "") is None:
            raw = json.dumps({"action": action.to_obj(), "rationale": response.rationale},
                             ensure_ascii=False)
            return IllegalOutput(raw=raw, cause=IllegalCause.UNRESOLVABLE_TARGET)
    return response.rationale, action


# --- training-corpus export ------------------------------------------------


class MissingReasoningError(ValueError):
    def __init__(self, session_id: str, step_index: int):
        super().__init__(f"session {session_id} has no reasoning at step {step_index}")
        self.session_id = session_id
        self.step_index = step_index


@dataclass(frozen=True)
class Segment:
    text: str
    train: bool


@dataclass(frozen=True)
class TrainingExample:
    session_id: str
    segments: tuple[Segment, ...]

    def serialization(self) -> str:
        return "".join(seg.text for seg in self.segments)


def _session_segments(session: Session) -> tuple[Segment, ...]:
    segments: list[Segment] = []
    for step_ in session.steps:
        if step_.reasoning is None:
            raise MissingReasoningError(session.session_id, step_.index)
        segments.append(Segment(f"Context:\n{render(step_.context)}\n", train=False))
        segments.append(Segment(f"Reasoning:\n{step_.reasoning}\n", train=True))
        segments.append(Segment(f"Action:\n{step_.action.to_json()}\n", train=True))
    return tuple(segments)


def export_training_examples(sessions: Sequence[Session]) -> list[TrainingExample]:
    """One example per session: the whole session serialized as alternating
    (context, reasoning, action) segments, where only reasoning and action
    segments carry the training flag. Concatenating the segments reproduces
    the serialization exactly."""
    return [TrainingExample(s.session_id, _session_segments(s)) for s in sessions]


def training_serialization(session: Session) -> str:
    return TrainingExample(session.session_id, _session_segments(session)).serialization()


def write_training_examples(examples: Sequence[TrainingExample], path: str | Path) -> tuple[int, int]:
    """Write one JSON object per line; returns (masked_chars, trained_chars)."""
    masked = trained = 0
    with open(path, "w", encoding="utf-8") as fh:
        for example in examples:
            obj = {
                "session_id": example.session_id,
                "segments": [{"text": seg.text, "train": seg.train} for seg in example.segments],
            }
            fh.write(json.dumps(obj, ensure_ascii=False))
            fh.write("\n")
            for seg in example.segments:
                if seg.train:
                    trained += len(seg.text)
                else:
                    masked += len(seg.text)
    return masked, trained
