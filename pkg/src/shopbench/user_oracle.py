"""Scripted stochastic shopper that emits ground-truth sessions.

Each session is generated by driving the simulated store with a seeded
policy: search (optionally with a typo that gets corrected), refine the
query, occasionally filter, inspect products, and finish with a buy-now
click or a termination. Aggregate behavior is calibrated by construction:
search counts are drawn from a shifted Poisson with the configured mean,
the purchase decision is a Bernoulli draw at the configured rate, and the
per-session filter probability is derived from the search:filter ratio
floor with headroom.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass

from .session_model import Action, Session, Step, validate_session
from .shopsim import (
    FILTER_PREFIX,
    FILTERS,
    RESULTS_PER_PAGE,
    SEARCH_INPUT_NAME,
    Catalog,
    Product,
    SearchPage,
    Shop,
    tokens_of,
)
from .html_context import resolve

# Policy tuning: chosen so an average session lands around seven actions.
FILTER_RATIO_HEADROOM = 1.5
VIEW_PROB = 0.45
EXTRA_VIEW_PROB = 0.30
NEXT_PAGE_PROB = 0.08
_FINAL_VIEW_WEIGHTS = (45, 40, 15)  # 0, 1, or 2 inspections before terminating

_REFINE_WORDS = (
    "best", "cheap", "top rated", "new", "sale", "quality",
    "good", "popular", "online", "deal", "nice", "great",
)


@dataclass(frozen=True)
class OracleConfig:
    mean_searches_per_session: float = 2.82
    purchase_rate: float = 0.1391
    search_to_filter_ratio_min: float = 7.0
    typo_prob: float = 0.25
    seed: int = 0
    n_sessions: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.purchase_rate <= 1.0:
            raise ValueError("purchase_rate must be in [0, 1]")
        if not 0.0 <= self.typo_prob <= 1.0:
            raise ValueError("typo_prob must be in [0, 1]")
        if self.mean_searches_per_session < 1.0:
            raise ValueError("mean_searches_per_session must be >= 1 (sessions start with a search)")
        if self.search_to_filter_ratio_min <= 0.0:
            raise ValueError("search_to_filter_ratio_min must be positive")
        if self.n_sessions < 1:
            raise ValueError("n_sessions must be >= 1")

    @property
    def filter_prob(self) -> float:
        """Per-session probability of one filter click, set so the expected
        search:filter ratio clears the configured floor with 50% headroom."""
        return min(
            1.0,
            self.mean_searches_per_session
            / (self.search_to_filter_ratio_min * FILTER_RATIO_HEADROOM),
        )


@dataclass(frozen=True)
class IntentProfile:
    """What this shopper wants: a product whose title covers all target
    tokens and whose rating clears the satisfaction threshold."""

    target_tokens: tuple[str, ...]
    patience: int = 40
    satisfaction_threshold: float = 4.0

    def __post_init__(self) -> None:
        if self.patience < 2:
            raise ValueError("patience must be >= 2")

    def satisfied_by(self, product: Product) -> bool:
        title_tokens = set(tokens_of(product.title))
        return (
            set(self.target_tokens).issubset(title_tokens)
            and product.rating >= self.satisfaction_threshold
        )


def derive_session_seed(seed: int, index: int) -> int:
    """Per-session seed: the first 8 bytes (big-endian) of
    sha256(f"{seed}:{index}"), so any one session reproduces in isolation."""
    digest = hashlib.sha256(f"{seed}:{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0.0:
        return 0
    threshold = math.exp(-lam)
    k = 0
    p = 1.0
    while True:
        p *= rng.random()
        if p <= threshold:
            return k
        k += 1


def _typo(rng: random.Random, query: str) -> str:
    """Corrupt a query with a single edit: an adjacent transposition or a
    one-character deletion inside a word."""
    letters = [i for i, ch in enumerate(query) if ch.isalpha()]
    if len(letters) < 3:
        return query + "e"
    for _ in range(20):
        if rng.random() < 0.5:
            i = rng.choice(letters[:-1])
            if query[i + 1].isalpha() and query[i] != query[i + 1]:
                corrupted = query[:i] + query[i + 1] + query[i] + query[i + 2 :]
                if corrupted != query:
                    return corrupted
        else:
            i = rng.choice(letters)
            corrupted = query[:i] + query[i + 1 :]
            if corrupted.strip() and corrupted != query:
                return corrupted
    return query[:-1] if len(query) > 1 else query + "e"


def _query_ladder(
    rng: random.Random, shop: Shop, target: Product, n_queries: int, need_page1: bool
) -> list[str] | None:
    """Build a broad-to-specific query sequence ending at the final query.

    When ``need_page1`` is set the final query must place the target on the
    first results page; returns None if even the full title fails to.
    """
    tokens = list(tokens_of(target.title))
    prefixes = [" ".join(tokens[:n]) for n in range(1, len(tokens) + 1)]
    if need_page1:
        final_idx = None
        for i, query in enumerate(prefixes):
            if i == 0 and len(prefixes) > 1:
                continue  # a one-word final query reads unnaturally specific
            if target in shop.rank(query)[:RESULTS_PER_PAGE]:
                final_idx = i
                break
        if final_idx is None:
            return None
    else:
        final_idx = rng.randrange(1, len(prefixes)) if len(prefixes) > 1 else 0
    pool = prefixes[:final_idx]
    final = prefixes[final_idx]
    earlier_needed = n_queries - 1
    if earlier_needed <= len(pool):
        earlier = pool[-earlier_needed:] if earlier_needed else []
    else:
        base = pool[0] if pool else final
        pads = [f"{_REFINE_WORDS[j % len(_REFINE_WORDS)]} {base}" for j in range(earlier_needed - len(pool))]
        earlier = list(reversed(pads)) + pool
    return earlier + [final]


def _pick_filter_for(rng: random.Random, target: Product | None) -> str:
    """A filter id; when a target is given, one the target still passes."""
    options = []
    for filter_id, spec in FILTERS.items():
        if target is None or spec.matches(target):
            options.append(filter_id)
    if not options:  # pragma: no cover - rating/price bands always cover a product
        return "rating_4_up"
    # Rating filters dominate observed behavior; bias toward them.
    if "rating_4_up" in options and rng.random() < 0.6:
        return "rating_4_up"
    return rng.choice(options)


def generate_session(
    catalog: Catalog | Shop,
    config: OracleConfig,
    session_seed: int,
    session_id: str | None = None,
    user_id: str | None = None,
) -> Session:
    """One valid, replayable session, deterministic in (catalog, config,
    session_seed)."""
    shop = catalog if isinstance(catalog, Shop) else Shop(catalog)
    rng = random.Random(session_seed)
    sid = session_id if session_id is not None else f"s-{config.seed}-{session_seed % 10**8:08d}"
    uid = user_id if user_id is not None else f"u-{config.seed}-0"

    buy = rng.random() < config.purchase_rate
    n_searches = 1 + _poisson(rng, config.mean_searches_per_session - 1.0)
    use_typo = n_searches >= 2 and rng.random() < config.typo_prob
    use_filter = rng.random() < config.filter_prob
    filter_after = rng.randrange(1, n_searches + 1) if use_filter else 0

    if buy:
        pool = [p for p in shop.catalog.products if p.rating >= 4.0]
        target = rng.choice(pool) if pool else max(shop.catalog.products, key=lambda p: (p.rating, p.product_id))
        threshold = 4.0 if target.rating >= 4.0 else target.rating
    else:
        target = rng.choice(shop.catalog.products)
        threshold = 5.0

    planned = n_searches - 1 if use_typo else n_searches
    queries = _query_ladder(rng, shop, target, planned, need_page1=buy)
    if queries is None:
        # The intended item never makes page one: settle for whatever tops
        # the full-title query instead.
        final = " ".join(tokens_of(target.title))
        page1 = shop.rank(final)[:RESULTS_PER_PAGE]
        preferred = [p for p in page1 if p.rating >= 4.0]
        target = preferred[0] if preferred else page1[0]
        threshold = 4.0 if target.rating >= 4.0 else target.rating
        final_tokens = tokens_of(final)
        pool = [" ".join(final_tokens[:n]) for n in range(1, len(final_tokens))]
        if planned - 1 <= len(pool):
            earlier = pool[len(pool) - (planned - 1) :]
        else:
            base = pool[0] if pool else final
            pads = [f"{_REFINE_WORDS[j % len(_REFINE_WORDS)]} {base}" for j in range(planned - 1 - len(pool))]
            earlier = list(reversed(pads)) + pool
        queries = earlier + [final]
    if use_typo:
        queries = [_typo(rng, queries[0])] + queries

    intent = IntentProfile(
        target_tokens=tokens_of(queries[-1]),
        satisfaction_threshold=threshold,
    )

    state, ctx = shop.initial_state()
    steps: list[Step] = []

    def do(action: Action) -> None:
        nonlocal state, ctx
        steps.append(Step(context=ctx, action=action, index=len(steps)))
        state, ctx = shop.step(state, action)

    def decoys() -> list[Product]:
        if not isinstance(state.page, SearchPage):
            return []
        page_products = shop.page_products(state.page)
        return [
            p for p in page_products
            if p.slug != target.slug and not intent.satisfied_by(p)
        ]

    def room_for(extra: int) -> bool:
        remaining_searches = n_searches - searches_done
        return len(steps) + extra + remaining_searches + 2 <= intent.patience

    searches_done = 0
    for i, query in enumerate(queries):
        do(Action.type_and_submit(SEARCH_INPUT_NAME, query))
        searches_done += 1
        is_final = i == len(queries) - 1
        if filter_after == searches_done:
            filter_id = _pick_filter_for(rng, target if buy else None)
            control = FILTER_PREFIX + filter_id
            if resolve(ctx, control) is not None:
                do(Action.click(control))
        if is_final:
            break
        if resolve(ctx, "results.next_page") is not None and rng.random() < NEXT_PAGE_PROB and room_for(1):
            do(Action.click("results.next_page"))
        if rng.random() < VIEW_PROB and room_for(2):
            candidates = decoys()
            if candidates:
                pick = rng.choice(candidates)
                do(Action.click(f"results.{pick.slug}.view_product"))
                do(Action.click("product_page.back_to_results"))

    if buy:
        if rng.random() < EXTRA_VIEW_PROB and room_for(2):
            candidates = decoys()
            if candidates:
                pick = rng.choice(candidates)
                do(Action.click(f"results.{pick.slug}.view_product"))
                do(Action.click("product_page.back_to_results"))
        target_link = f"results.{target.slug}.view_product"
        if resolve(ctx, target_link) is None:  # pragma: no cover - guarded by planning
            raise RuntimeError(f"planned purchase target not on page one of {queries[-1]!r}")
        do(Action.click(target_link))
        do(Action.click("product_page.buy_now"))
    else:
        n_views = rng.choices((0, 1, 2), weights=_FINAL_VIEW_WEIGHTS, k=1)[0]
        terminated = False
        for v in range(n_views):
            if not room_for(2):
                break
            candidates = decoys()
            if not candidates:
                break
            pick = rng.choice(candidates)
            do(Action.click(f"results.{pick.slug}.view_product"))
            last_view = v == n_views - 1
            if last_view and rng.random() < 0.5:
                do(Action.terminate())
                terminated = True
            else:
                do(Action.click("product_page.back_to_results"))
        if not terminated:
            do(Action.terminate())

    session = Session(session_id=sid, user_id=uid, steps=tuple(steps))
    problems = validate_session(session)
    if problems:  # pragma: no cover - the policy only emits valid sessions
        raise RuntimeError(f"oracle produced an invalid session: {problems}")
    return session


def generate_dataset(catalog: Catalog | Shop, config: OracleConfig) -> list[Session]:
    """``config.n_sessions`` sessions, each reproducible from its derived
    seed; roughly nine sessions share one synthetic user id."""
    shop = catalog if isinstance(catalog, Shop) else Shop(catalog)
    sessions: list[Session] = []
    for i in range(config.n_sessions):
        sessions.append(
            generate_session(
                shop,
                config,
                derive_session_seed(config.seed, i),
                session_id=f"s-{config.seed}-{i:06d}",
                user_id=f"u-{config.seed}-{i // 9:05d}",
            )
        )
    return sessions


def dataset_statistics(sessions: list[Session]) -> dict[str, float]:
    """Behavioral aggregates used for calibration checks."""
    from .session_model import ActionKind, outcome_of, SessionOutcome

    n_sessions = len(sessions)
    searches = 0
    filters = 0
    actions = 0
    purchases = 0
    for session in sessions:
        for step_ in session.steps:
            actions += 1
            action = step_.action
            if action.kind is ActionKind.TYPE_AND_SUBMIT:
                searches += 1
            elif action.kind is ActionKind.CLICK and (action.target_name or "").startswith(FILTER_PREFIX):
                filters += 1
        if outcome_of(session) is SessionOutcome.PURCHASE:
            purchases += 1
    return {
        "n_sessions": float(n_sessions),
        "mean_searches_per_session": searches / n_sessions if n_sessions else 0.0,
        "purchase_rate": purchases / n_sessions if n_sessions else 0.0,
        "search_filter_ratio": (searches / filters) if filters else math.inf,
        "mean_actions_per_session": actions / n_sessions if n_sessions else 0.0,
        "total_actions": float(actions),
        "total_searches": float(searches),
        "total_filters": float(filters),
    }
