"""shopbench: generate, annotate, and score simulated online-shopping sessions."""

from .agents import (
    AgentResponse,
    EndpointAgent,
    IllegalCause,
    IllegalOutput,
    RandomAgent,
    ReplayAgent,
    build_baseline_prompt,
    export_training_examples,
    generate_step,
    parse_agent_output,
)
from .eval_harness import (
    ErrorType,
    EvalReport,
    StepResult,
    action_distribution,
    classify_error,
    evaluate_session,
    exact_match,
    macro_accuracy,
    mcnemar,
    outcome_f1,
    run_evaluation,
)
from .html_context import (
    ContextNode,
    NamePath,
    SimplifiedContext,
    assign_names,
    list_interactables,
    render,
    resolve,
    simplify,
    simplify_and_name,
)
from .reasoning_synth import (
    StubReasoningClient,
    Synthesizer,
    SynthesisRequest,
    build_synthesis_prompt,
    synthesize_session,
    synthesize_step,
)
from .session_model import (
    Action,
    ActionKind,
    Session,
    SessionOutcome,
    Step,
    Violation,
    outcome_of,
    read_sessions,
    validate_session,
    write_sessions,
)
from .shopsim import (
    Catalog,
    IllegalAction,
    Product,
    Shop,
    ShopState,
    gen_catalog,
    initial_state,
    rank,
    replay_session,
    step,
)
from .user_oracle import IntentProfile, OracleConfig, generate_dataset, generate_session

__version__ = "0.1.0"
