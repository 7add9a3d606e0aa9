"""Reasoning synthesis: attach a first-person rationale to every step.

Given the context a user observed and the action they took, a completion
client is prompted (with a few in-context examples) to produce the likely
rationale. Results are content-addressed on disk so interrupted batch runs
resume where they stopped, and identical inputs never trigger two live
calls. Synthesized rationales are labeled synthetic in dataset metadata;
they are plausibility glosses, not recovered human thoughts.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .html_context import SimplifiedContext, render
from .llm_client import ChatClient, EmptyCompletionError
from .session_model import Action, ActionKind, Session, Step

PROMPT_VERSION = "synthesis-v1"

SYNTHESIS_PROMPT_SKELETON = """\
You will be given a customer's shopping journey on one of the largest e-commerce platforms globally. you will be given the context (what the user is looking at), the action (what the user did), and your job is to predict the user's rationale for the action. The rationale should follow
Here is an example:
{example}
For each action in the input, output a rationale.
If the action is "terminate", it means that you didn't find any desired product and you decided to leave the website by closing the browser window."""


@dataclass(frozen=True)
class Exemplar:
    context_text: str
    action: Action
    rationale: str


DEFAULT_FEW_SHOT: tuple[Exemplar, ...] = (
    Exemplar(
        context_text=(
            '<html>\n  <body>\n    <div>\n'
            '      <input name="search_bar.search_input" placeholder="Search products" type="text"/>\n'
            "    </div>\n    <p>Search the catalog to get started.</p>\n  </body>\n</html>"
        ),
        action=Action.type_and_submit("search_bar.search_input", "running shoes"),
        rationale="I need a comfortable pair of running shoes, so I'm searching for them.",
    ),
    Exemplar(
        context_text=(
            '<html>\n  <body>\n    <div>\n'
            '      <h2>24 results for "fleece jacket" (page 1)</h2>\n'
            '      <a name="results.filter.rating_4_up">4 stars and up</a>\n'
            '      <a name="results.northpeak_fleece_jacket_blue.view_product">View product</a>\n'
            "    </div>\n  </body>\n</html>"
        ),
        action=Action.click("results.filter.rating_4_up"),
        rationale="I want something that will hold up, so I'm looking for options with high ratings.",
    ),
    Exemplar(
        context_text=(
            '<html>\n  <body>\n    <div>\n'
            '      <h2>No results for "left handed smoke shifter"</h2>\n'
            "    </div>\n  </body>\n</html>"
        ),
        action=Action.terminate(),
        rationale="Nothing here is what I was after, so I'm closing the browser window.",
    ),
)


def format_exemplar(context_text: str, action: Action, rationale: str) -> str:
    return f"Context:\n{context_text}\nAction:\n{action.to_json()}\nRationale:\n{rationale}"


@dataclass(frozen=True)
class SynthesisRequest:
    context: SimplifiedContext
    action: Action
    few_shot: tuple[Exemplar, ...] = DEFAULT_FEW_SHOT


def build_synthesis_prompt(request: SynthesisRequest) -> str:
    """The synthesis prompt: the fixed skeleton with its example slot filled,
    then the step to annotate."""
    example_block = "\n".join(
        format_exemplar(ex.context_text, ex.action, ex.rationale) for ex in request.few_shot
    )
    skeleton = SYNTHESIS_PROMPT_SKELETON.format(example=example_block)
    return (
        f"{skeleton}\n\n"
        f"Context:\n{render(request.context)}\n"
        f"Action:\n{request.action.to_json()}\n"
        f"Rationale:"
    )


def cache_key(context: SimplifiedContext, action: Action, prompt_version: str = PROMPT_VERSION) -> str:
    """Content digest of (rendered context, action, prompt version)."""
    payload = f"{prompt_version}\n{render(context)}\n{action.to_json()}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Synthesizer:
    """Batch rationale generation with a two-level (memory + disk) cache."""

    def __init__(
        self,
        client: ChatClient,
        cache_dir: str | Path | None = None,
        few_shot: tuple[Exemplar, ...] = DEFAULT_FEW_SHOT,
        prompt_version: str = PROMPT_VERSION,
    ):
        self.client = client
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.few_shot = few_shot
        self.prompt_version = prompt_version
        self._memory: dict[str, str] = {}
        self._cache_lock = threading.Lock()

    def _cache_path(self, digest: str) -> Path | None:
        return self.cache_dir / f"{digest}.txt" if self.cache_dir is not None else None

    def _cache_get(self, digest: str) -> str | None:
        with self._cache_lock:
            cached = self._memory.get(digest)
            if cached is not None:
                return cached
            path = self._cache_path(digest)
            if path is not None and path.exists():
                text = path.read_text(encoding="utf-8")
                self._memory[digest] = text
                return text
        return None

    def _cache_put(self, digest: str, text: str) -> None:
        with self._cache_lock:
            self._memory[digest] = text
            path = self._cache_path(digest)
            if path is not None:
                path.write_text(text, encoding="utf-8")

    def reasoning_for(self, context: SimplifiedContext, action: Action) -> str:
        digest = cache_key(context, action, self.prompt_version)
        cached = self._cache_get(digest)
        if cached is not None:
            return cached
        prompt = build_synthesis_prompt(SynthesisRequest(context, action, self.few_shot))
        text = self.client.complete(prompt).strip()
        if not text:
            raise EmptyCompletionError("synthesis returned an empty rationale")
        self._cache_put(digest, text)
        return text

    def synthesize_session(self, session: Session) -> Session:
        """Fill in reasoning for every step; contexts and actions are left
        untouched. Steps that already carry a reasoning are kept as-is."""
        steps: list[Step] = []
        for step_ in session.steps:
            if step_.reasoning is not None:
                steps.append(step_)
                continue
            try:
                reasoning = self.reasoning_for(step_.context, step_.action)
            except Exception as exc:
                raise SynthesisError(session.session_id, step_.index, exc) from exc
            steps.append(step_.with_reasoning(reasoning))
        return Session(session.session_id, session.user_id, tuple(steps))

    def synthesize_dataset(self, sessions: Sequence[Session], concurrency: int = 4) -> list[Session]:
        """Synthesize many sessions with a bounded worker pool; output order
        matches input order regardless of completion order."""
        if concurrency <= 1 or len(sessions) <= 1:
            return [self.synthesize_session(s) for s in sessions]
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            return list(pool.map(self.synthesize_session, sessions))


class SynthesisError(RuntimeError):
    def __init__(self, session_id: str, step_index: int, cause: Exception):
        super().__init__(f"synthesis failed for session {session_id} at step {step_index}: {cause}")
        self.session_id = session_id
        self.step_index = step_index


def synthesize_step(request: SynthesisRequest, client: ChatClient,
                    cache_dir: str | Path | None = None) -> str:
    return Synthesizer(client, cache_dir=cache_dir, few_shot=request.few_shot).reasoning_for(
        request.context, request.action
    )


def synthesize_session(session: Session, client: ChatClient,
                       cache_dir: str | Path | None = None) -> Session:
    return Synthesizer(client, cache_dir=cache_dir).synthesize_session(session)


_ACTION_BLOCK_RE = re.compile(r"\nAction:\n(\{.*?\})\nRationale:", re.DOTALL)


class StubReasoningClient:
    """Deterministic offline synthesizer.

    Reads the action out of the synthesis prompt and answers from fixed
    first-person templates, so whole pipelines run without a network.
    """

    def __init__(self) -> None:
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        matches = _ACTION_BLOCK_RE.findall(prompt)
        if not matches:
            return "I'm weighing my options on this page."
        try:
            action = Action.from_obj(json.loads(matches[-1]))
        except (ValueError, json.JSONDecodeError):
            return "I'm weighing my options on this page."
        return self._rationale(action)

    @staticmethod
    def _rationale(action: Action) -> str:
        if action.kind is ActionKind.TERMINATE:
            return "I didn't find anything I wanted, so I'm closing the browser window."
        if action.kind is ActionKind.TYPE_AND_SUBMIT:
            return f"I'm searching for {action.text} to see what options come up."
        name = action.target_name or ""
        segments = name.split(".")
        last = segments[-1]
        if last == "buy_now":
            return "This one checks every box for me, so I'm buying it now."
        if ".filter." in name:
            if "rating" in last:
                return "I'm looking for options with high ratings."
            return "I want to stay in my price range, so I'm filtering by price."
        if last == "view_product" and len(segments) >= 2:
            words = segments[-2].replace("_", " ")
            return f"The {words} listing looks promising, so I'm opening it."
        if last == "next_page":
            return "Nothing on this page convinced me, so I'm checking the next one."
        if last == "prev_page":
            return "I want another look at the previous page of results."
        if last == "back_to_results":
            return "This product isn't quite right, so I'm going back to the results."
        return "This looks relevant, so I'm clicking it."
