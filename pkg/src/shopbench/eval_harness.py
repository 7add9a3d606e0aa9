"""Teacher-forced evaluation and its metrics.

Agents are scored on next-action generation over held-out sessions: for
every step after the first, the agent receives the ground-truth history
(never its own prior outputs) and must reproduce the recorded action.
Reported metrics: exact-match accuracy macro-averaged over sessions, a
purchase-vs-termination F1 on final steps, a five-way error taxonomy
(illegal outputs counted separately), action-category distributions, and
McNemar significance between two runs.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .agents import Agent, IllegalOutput, generate_step
from .html_context import SimplifiedContext
from .session_model import Action, ActionKind, Session

SEARCH_INPUT_SEGMENT = "search_input"


class ErrorType(str, Enum):
    NONE = "none"
    DIDNT_TERMINATE = "didnt_terminate"
    DIDNT_CLICK = "didnt_click"
    DIDNT_SEARCH = "didnt_search"
    SEARCHED_WRONG_KEYWORD = "searched_wrong_keyword"
    CLICKED_WRONG_BUTTON = "clicked_wrong_button"
    ILLEGAL = "illegal"


FIVE_ERROR_TYPES: tuple[ErrorType, ...] = (
    ErrorType.DIDNT_TERMINATE,
    ErrorType.DIDNT_CLICK,
    ErrorType.DIDNT_SEARCH,
    ErrorType.SEARCHED_WRONG_KEYWORD,
    ErrorType.CLICKED_WRONG_BUTTON,
)

ACTION_CATEGORIES = ("search", "filter", "view_product", "purchase", "terminate", "other")


@dataclass(frozen=True)
class StepResult:
    session_id: str
    step_index: int
    gold: Action
    predicted: Action | IllegalOutput
    match: bool
    error_type: ErrorType


def _norm_text(text: str) -> str:
    return unicodedata.normalize("NFC", text).strip()


def exact_match(pred: Action, gold: Action) -> bool:
    """Kinds and target names must be equal (case-sensitive); submitted text
    is compared after NFC normalization and whitespace trim, so typos still
    count as mismatches but invisible serialization artifacts do not."""
    if pred.kind is not gold.kind:
        return False
    if pred.target_name != gold.target_name:
        return False
    if pred.kind is ActionKind.TYPE_AND_SUBMIT:
        return _norm_text(pred.text or "") == _norm_text(gold.text or "")
    return True


def classify_error(pred: Action | IllegalOutput, gold: Action,
                   context: SimplifiedContext | None = None) -> ErrorType:
    """Assign exactly one label per scored step: match, one of the five
    error types keyed on what the user actually did, or illegal."""
    if isinstance(pred, IllegalOutput):
        return ErrorType.ILLEGAL
    if exact_match(pred, gold):
        return ErrorType.NONE
    if pred.kind is not gold.kind:
        if gold.kind is ActionKind.TERMINATE:
            return ErrorType.DIDNT_TERMINATE
        if gold.kind is ActionKind.CLICK:
            return ErrorType.DIDNT_CLICK
        return ErrorType.DIDNT_SEARCH
    if gold.kind is ActionKind.TYPE_AND_SUBMIT:
        # Covers a different query and (rarely) a different input box.
        return ErrorType.SEARCHED_WRONG_KEYWORD
    return ErrorType.CLICKED_WRONG_BUTTON


def evaluate_session(agent: Agent, session: Session) -> list[StepResult]:
    """Score steps 1..N-1 of a session under teacher forcing. The first step
    is never scored (it has no preceding context), so a 1-step session
    yields no results."""
    results: list[StepResult] = []
    for t in range(1, len(session.steps)):
        history = session.steps[:t]
        context = session.steps[t].context
        gold = session.steps[t].action
        outcome = generate_step(agent, history, context, session_id=session.session_id)
        if isinstance(outcome, IllegalOutput):
            results.append(
                StepResult(session.session_id, t, gold, outcome, match=False,
                           error_type=ErrorType.ILLEGAL)
            )
            continue
        _, action = outcome
        matched = exact_match(action, gold)
        results.append(
            StepResult(session.session_id, t, gold, action, match=matched,
                       error_type=classify_error(action, gold, context))
        )
    return results


def per_session_accuracy(results: Iterable[StepResult]) -> dict[str, float]:
    counts: dict[str, list[int]] = {}
    for result in results:
        bucket = counts.setdefault(result.session_id, [0, 0])
        bucket[0] += 1 if result.match else 0
        bucket[1] += 1
    return {sid: hits / total for sid, (hits, total) in counts.items()}


def macro_accuracy(results: Iterable[StepResult]) -> float:
    """Mean of per-session accuracies: every session weighs the same no
    matter how many steps it has."""
    per_session = per_session_accuracy(results)
    if not per_session:
        raise ValueError("macro accuracy needs at least one scored step")
    return sum(per_session.values()) / len(per_session)


def _predicts_purchase(pred: Action | IllegalOutput) -> bool:
    return isinstance(pred, Action) and pred.is_purchase()


@dataclass(frozen=True)
class OutcomeStats:
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    degenerate: bool = False


def outcome_f1(final_results: Sequence[StepResult]) -> OutcomeStats:
    """Binary session-outcome score with purchase as the positive class.

    A final-step prediction counts positive iff it clicks a buy-now control;
    illegal outputs count as negative predictions (they can never be a true
    positive). F1 is 0 (and flagged degenerate) when precision and recall
    are both undefined or zero.
    """
    tp = fp = fn = tn = 0
    for result in final_results:
        gold_positive = result.gold.is_purchase()
        pred_positive = _predicts_purchase(result.predicted)
        if gold_positive and pred_positive:
            tp += 1
        elif not gold_positive and pred_positive:
            fp += 1
        elif gold_positive and not pred_positive:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return OutcomeStats(0.0, tp, fp, fn, tn, degenerate=True)
    return OutcomeStats(2 * precision * recall / (precision + recall), tp, fp, fn, tn)


def mcnemar(correct_a: Sequence[bool], correct_b: Sequence[bool]) -> float:
    """Two-sided McNemar p-value over paired correctness outcomes.

    Uses the exact binomial test on the discordant pairs when there are
    fewer than 25 of them, otherwise the chi-square statistic with
    continuity correction (|b-c|-1)^2/(b+c) at one degree of freedom.
    """
    if len(correct_a) != len(correct_b):
        raise ValueError(f"paired outcome lists differ in length: {len(correct_a)} vs {len(correct_b)}")
    b = sum(1 for x, y in zip(correct_a, correct_b) if x and not y)
    c = sum(1 for x, y in zip(correct_a, correct_b) if not x and y)
    n = b + c
    if n == 0:
        return 1.0
    if n < 25:
        k = min(b, c)
        tail = sum(math.comb(n, i) for i in range(k + 1))
        return min(1.0, 2.0 * tail / 2.0**n)
    stat = (abs(b - c) - 1) ** 2 / n
    return math.erfc(math.sqrt(stat / 2.0))


def action_category(action: Action) -> str:
    """Name-convention bucketing used for distribution reports."""
    if action.kind is ActionKind.TERMINATE:
        return "terminate"
    name = action.target_name or ""
    last = name.rsplit(".", 1)[-1]
    if action.kind is ActionKind.TYPE_AND_SUBMIT:
        return "search" if last == SEARCH_INPUT_SEGMENT else "other"
    if name.startswith("results.filter."):
        return "filter"
    if last == "view_product":
        return "view_product"
    if last == "buy_now":
        return "purchase"
    return "other"


def action_distribution(actions: Iterable[Action]) -> dict[str, int]:
    counts = {category: 0 for category in ACTION_CATEGORIES}
    for action in actions:
        counts[action_category(action)] += 1
    return counts


def predicted_actions(results: Iterable[StepResult]) -> list[Action]:
    """Legal predicted actions only; illegal outputs carry no action."""
    return [r.predicted for r in results if isinstance(r.predicted, Action)]


def dataset_action_distribution(sessions: Iterable[Session]) -> dict[str, int]:
    counts = {category: 0 for category in ACTION_CATEGORIES}
    for session in sessions:
        for step_ in session.steps:
            counts[action_category(step_.action)] += 1
    return counts


@dataclass
class EvalReport:
    per_session_accuracy: dict[str, float]
    macro_accuracy: float
    outcome_f1: float
    outcome_confusion: dict[str, int]
    error_histogram: dict[str, int]
    n_illegal: int
    n_match: int
    action_distribution: dict[str, int]
    gold_action_distribution: dict[str, int]
    n_sessions: int
    n_steps: int
    per_step_match: list[tuple[str, int, bool]]
    session_outcome_correct: dict[str, bool]
    f1_degenerate: bool = False
    metadata: dict = field(default_factory=dict)

    def to_obj(self) -> dict:
        return {
            "per_session_accuracy": self.per_session_accuracy,
            "macro_accuracy": self.macro_accuracy,
            "outcome_f1": self.outcome_f1,
            "outcome_confusion": self.outcome_confusion,
            "error_histogram": self.error_histogram,
            "n_illegal": self.n_illegal,
            "n_match": self.n_match,
            "action_distribution": self.action_distribution,
            "gold_action_distribution": self.gold_action_distribution,
            "n_sessions": self.n_sessions,
            "n_steps": self.n_steps,
            "per_step_match": [[sid, idx, match] for sid, idx, match in self.per_step_match],
            "session_outcome_correct": self.session_outcome_correct,
            "f1_degenerate": self.f1_degenerate,
            "metadata": self.metadata,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "EvalReport":
        return cls(
            per_session_accuracy=dict(obj["per_session_accuracy"]),
            macro_accuracy=float(obj["macro_accuracy"]),
            outcome_f1=float(obj["outcome_f1"]),
            outcome_confusion=dict(obj["outcome_confusion"]),
            error_histogram=dict(obj["error_histogram"]),
            n_illegal=int(obj["n_illegal"]),
            n_match=int(obj["n_match"]),
            action_distribution=dict(obj["action_distribution"]),
            gold_action_distribution=dict(obj["gold_action_distribution"]),
            n_sessions=int(obj["n_sessions"]),
            n_steps=int(obj["n_steps"]),
            per_step_match=[(sid, int(idx), bool(match)) for sid, idx, match in obj["per_step_match"]],
            session_outcome_correct={k: bool(v) for k, v in obj["session_outcome_correct"].items()},
            f1_degenerate=bool(obj.get("f1_degenerate", False)),
            metadata=dict(obj.get("metadata", {})),
        )


def _step_result_obj(result: StepResult) -> dict:
    obj: dict = {
        "session_id": result.session_id,
        "step_index": result.step_index,
        "gold": result.gold.to_obj(),
        "match": result.match,
        "error_type": result.error_type.value,
    }
    if isinstance(result.predicted, IllegalOutput):
        obj["predicted"] = {"illegal": result.predicted.cause.value,
                            "raw": result.predicted.raw[:500]}
    else:
        obj["predicted"] = result.predicted.to_obj()
    return obj


def _step_result_from_obj(obj: dict) -> StepResult:
    from .agents import IllegalCause

    predicted_obj = obj["predicted"]
    predicted: Action | IllegalOutput
    if "illegal" in predicted_obj:
        predicted = IllegalOutput(raw=predicted_obj.get("raw", ""),
                                  cause=IllegalCause(predicted_obj["illegal"]))
    else:
        predicted = Action.from_obj(predicted_obj)
    return StepResult(
        session_id=obj["session_id"],
        step_index=int(obj["step_index"]),
        gold=Action.from_obj(obj["gold"]),
        predicted=predicted,
        match=bool(obj["match"]),
        error_type=ErrorType(obj["error_type"]),
    )


def write_step_results(results: Sequence[StepResult], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for result in sorted(results, key=lambda r: (r.session_id, r.step_index)):
            fh.write(json.dumps(_step_result_obj(result), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_step_results(path: str | Path) -> list[StepResult]:
    results: list[StepResult] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if stripped:
                results.append(_step_result_from_obj(json.loads(stripped)))
    return results


def run_evaluation(
    agent: Agent,
    sessions: Sequence[Session],
    concurrency: int = 1,
    metadata: Mapping[str, object] | None = None,
    checkpoint_path: str | Path | None = None,
) -> tuple[EvalReport, list[StepResult]]:
    """Evaluate a dataset and aggregate every metric.

    Sessions with fewer than two steps have nothing to score and are
    skipped. Results are sorted by (session id, step index) before any
    aggregation, so reports do not depend on worker scheduling.

    With ``checkpoint_path``, each finished session's step results are
    appended to that file as the run progresses; a rerun after a crash
    loads it and only evaluates the sessions that are still missing. The
    file is rewritten in sorted order once the run completes.
    """
    scorable = [s for s in sessions if len(s.steps) >= 2]
    final_index = {s.session_id: len(s.steps) - 1 for s in scorable}

    done: dict[str, list[StepResult]] = {}
    if checkpoint_path is not None and Path(checkpoint_path).exists():
        recovered: dict[str, list[StepResult]] = {}
        with open(checkpoint_path, "r", encoding="utf-8") as fh:
            for line in fh:
                stripped = line.strip()
                if not stripped:
                    continue
                try:
                    row = _step_result_from_obj(json.loads(stripped))
                except Exception:
                    continue  # torn tail line from an interrupted run
                recovered.setdefault(row.session_id, []).append(row)
        for sid, rows in recovered.items():
            expected = final_index.get(sid)
            if expected is not None and len(rows) == expected:
                done[sid] = sorted(rows, key=lambda r: r.step_index)

    pending = [s for s in scorable if s.session_id not in done]
    checkpoint_fh = None
    write_lock = threading.Lock()
    if checkpoint_path is not None:
        checkpoint_fh = open(checkpoint_path, "a", encoding="utf-8")

    def score(session: Session) -> list[StepResult]:
        rows = evaluate_session(agent, session)
        if checkpoint_fh is not None:
            payload = "".join(
                json.dumps(_step_result_obj(r), ensure_ascii=False, sort_keys=True) + "\n"
                for r in rows
            )
            with write_lock:
                checkpoint_fh.write(payload)
                checkpoint_fh.flush()
        return rows

    try:
        if concurrency > 1 and len(pending) > 1:
            with ThreadPoolExecutor(max_workers=concurrency) as pool:
                chunks = list(pool.map(score, pending))
        else:
            chunks = [score(s) for s in pending]
    finally:
        if checkpoint_fh is not None:
            checkpoint_fh.close()

    results: list[StepResult] = [r for rows in done.values() for r in rows]
    results.extend(r for chunk in chunks for r in chunk)
    results.sort(key=lambda r: (r.session_id, r.step_index))
    if checkpoint_path is not None:
        write_step_results(results, checkpoint_path)

    final_results = [r for r in results if r.step_index == final_index[r.session_id]]

    per_session = per_session_accuracy(results)
    macro = sum(per_session.values()) / len(per_session) if per_session else 0.0
    outcome = outcome_f1(final_results)

    histogram = {e.value: 0 for e in FIVE_ERROR_TYPES}
    n_illegal = n_match = 0
    for result in results:
        if result.error_type is ErrorType.ILLEGAL:
            n_illegal += 1
        elif result.error_type is ErrorType.NONE:
            n_match += 1
        else:
            histogram[result.error_type.value] += 1

    outcome_correct = {
        r.session_id: _predicts_purchase(r.predicted) == r.gold.is_purchase()
        for r in final_results
    }

    report = EvalReport(
        per_session_accuracy={sid: per_session[sid] for sid in sorted(per_session)},
        macro_accuracy=macro,
        outcome_f1=outcome.f1,
        outcome_confusion={"tp": outcome.tp, "fp": outcome.fp, "fn": outcome.fn, "tn": outcome.tn},
        error_histogram=histogram,
        n_illegal=n_illegal,
        n_match=n_match,
        action_distribution=action_distribution(predicted_actions(results)),
        gold_action_distribution=action_distribution(r.gold for r in results),
        n_sessions=len(per_session),
        n_steps=len(results),
        per_step_match=[(r.session_id, r.step_index, r.match) for r in results],
        session_outcome_correct={sid: outcome_correct[sid] for sid in sorted(outcome_correct)},
        f1_degenerate=outcome.degenerate,
        metadata={
            "agent_id": agent.agent_id,
            "f1_positive_class": "purchase",
            "train_test_disjointness": "caller-asserted",
            **(dict(metadata) if metadata else {}),
        },
    )
    return report, results


def dataset_digest(path: str | Path) -> str:
    hasher = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            hasher.update(chunk)
    return hasher.hexdigest()


def write_report(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report.to_obj(), ensure_ascii=False, indent=2, sort_keys=True))
        fh.write("\n")


def read_report(path: str | Path) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        return EvalReport.from_obj(json.load(fh))


def summary_table(report: EvalReport) -> str:
    """Aligned two-group text summary: next-action generation metrics, then
    session-outcome metrics."""
    rows = [
        ("Generated Next Action", "macro exact-match accuracy", f"{report.macro_accuracy:.4f}"),
        ("Generated Next Action", "scored steps", str(report.n_steps)),
        ("Generated Next Action", "exact matches", str(report.n_match)),
        ("Generated Next Action", "illegal outputs", str(report.n_illegal)),
        ("Session Outcome", "F1 (purchase positive)", f"{report.outcome_f1:.4f}"),
        ("Session Outcome", "confusion tp/fp/fn/tn",
         "/".join(str(report.outcome_confusion[k]) for k in ("tp", "fp", "fn", "tn"))),
        ("Session Outcome", "sessions", str(report.n_sessions)),
    ]
    for error_type in FIVE_ERROR_TYPES:
        rows.append(("Error Types", error_type.value, str(report.error_histogram[error_type.value])))
    widths = [max(len(row[i]) for row in rows + [("Group", "Metric", "Value")]) for i in range(3)]
    lines = [
        f"{'Group':<{widths[0]}}  {'Metric':<{widths[1]}}  {'Value':>{widths[2]}}",
        f"{'-' * widths[0]}  {'-' * widths[1]}  {'-' * widths[2]}",
    ]
    for group, metric, value in rows:
        lines.append(f"{group:<{widths[0]}}  {metric:<{widths[1]}}  {value:>{widths[2]}}")
    return "\n".join(lines)


def compare_reports(report_a: EvalReport, report_b: EvalReport) -> dict[str, float]:
    """McNemar significance between two runs over the same dataset: over
    steps for accuracy and over sessions for outcome correctness."""
    steps_a = {(sid, idx): match for sid, idx, match in report_a.per_step_match}
    steps_b = {(sid, idx): match for sid, idx, match in report_b.per_step_match}
    if steps_a.keys() != steps_b.keys():
        raise ValueError("reports do not cover the same test cases")
    keys = sorted(steps_a)
    step_p = mcnemar([steps_a[k] for k in keys], [steps_b[k] for k in keys])
    outcome_a = report_a.session_outcome_correct
    outcome_b = report_b.session_outcome_correct
    if outcome_a.keys() != outcome_b.keys():
        raise ValueError("reports do not cover the same sessions")
    sids = sorted(outcome_a)
    outcome_p = mcnemar([outcome_a[s] for s in sids], [outcome_b[s] for s in sids])
    return {
        "macro_accuracy_a": report_a.macro_accuracy,
        "macro_accuracy_b": report_b.macro_accuracy,
        "outcome_f1_a": report_a.outcome_f1,
        "outcome_f1_b": report_b.outcome_f1,
        "step_mcnemar_p": step_p,
        "outcome_mcnemar_p": outcome_p,
    }
