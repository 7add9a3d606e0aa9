"""Deterministic simulated shopping site.

A seeded catalog generator plus a pure state machine over landing, search
results (with filters and pagination), and product-detail pages. Every state
renders to a simplified context with fixed naming conventions:

    search_bar.search_input        the (only) search input, on every page
    results.<slug>.view_product    product link on a results page
    results.filter.<filter_id>     filter controls
    results.next_page / results.prev_page
    product_page.buy_now           purchase button on a product page
    product_page.back_to_results
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .html_context import (
    ContextNode,
    SimplifiedContext,
    assign_names,
    render,
    sanitize_segment,
)
from .session_model import Action, ActionKind, Session

RESULTS_PER_PAGE = 10

SEARCH_INPUT_NAME = "search_bar.search_input"
BUY_NOW_NAME = "product_page.buy_now"
BACK_TO_RESULTS_NAME = "product_page.back_to_results"
NEXT_PAGE_NAME = "results.next_page"
PREV_PAGE_NAME = "results.prev_page"
FILTER_PREFIX = "results.filter."

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class IllegalAction(Exception):
    """The action does not apply to the current page state."""


@dataclass(frozen=True)
class Product:
    product_id: str
    title: str
    price: float
    rating: float
    review_count: int
    category: str
    description: str
    slug: str

    def to_obj(self) -> dict:
        return {
            "product_id": self.product_id,
            "title": self.title,
            "price": self.price,
            "rating": self.rating,
            "review_count": self.review_count,
            "category": self.category,
            "description": self.description,
            "slug": self.slug,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "Product":
        return cls(
            product_id=obj["product_id"],
            title=obj["title"],
            price=float(obj["price"]),
            rating=float(obj["rating"]),
            review_count=int(obj["review_count"]),
            category=obj["category"],
            description=obj["description"],
            slug=obj["slug"],
        )


@dataclass(frozen=True)
class Catalog:
    products: tuple[Product, ...]
    seed: int


@dataclass(frozen=True)
class FilterSpec:
    """A results-page filter: either a minimum rating or a price band."""

    filter_id: str
    label: str
    min_rating: float | None = None
    price_lo: float | None = None
    price_hi: float | None = None

    @property
    def control_name(self) -> str:
        return FILTER_PREFIX + self.filter_id

    def matches(self, product: Product) -> bool:
        if self.min_rating is not None and product.rating < self.min_rating:
            return False
        if self.price_lo is not None and product.price < self.price_lo:
            return False
        if self.price_hi is not None and product.price >= self.price_hi:
            return False
        return True


FILTERS: dict[str, FilterSpec] = {
    spec.filter_id: spec
    for spec in (
        FilterSpec("rating_4_up", "4 stars and up", min_rating=4.0),
        FilterSpec("price_under_25", "Under $25", price_hi=25.0),
        FilterSpec("price_25_to_50", "$25 to $50", price_lo=25.0, price_hi=50.0),
        FilterSpec("price_50_up", "$50 and up", price_lo=50.0),
    )
}
FILTER_ORDER = ("rating_4_up", "price_under_25", "price_25_to_50", "price_50_up")


@dataclass(frozen=True)
class LandingPage:
    pass


@dataclass(frozen=True)
class SearchPage:
    query: str
    filters: tuple[str, ...] = ()
    page_no: int = 1


@dataclass(frozen=True)
class ProductPage:
    product_id: str
    from_query: str
    from_filters: tuple[str, ...] = ()
    from_page_no: int = 1


@dataclass(frozen=True)
class ShopState:
    shop: "Shop" = field(compare=False, repr=False)
    page: LandingPage | SearchPage | ProductPage = field(default_factory=LandingPage)
    terminal: str | None = None  # None | "purchase" | "terminate"
    history_depth: int = 0


# --- catalog generation --------------------------------------------------

_BRANDS = (
    "Columbia", "Disney", "Acme", "Brassco", "Northpeak",
    "Sunhome", "Oakline", "Pixelworks", "Ferndale", "Truegrip",
)

_CATEGORY_ITEMS: dict[str, tuple[str, ...]] = {
    "apparel": (
        "shirt", "jacket", "hoodie", "socks", "jeans",
        "sneakers", "hat", "scarf", "gloves", "dress",
    ),
    "gifts": (
        "gift card", "mug", "candle", "puzzle", "keychain",
        "photo frame", "gift basket",
    ),
    "hardware": (
        "tee connector", "elbow fitting", "hose clamp", "pipe wrench",
        "wall anchor", "drill bit", "ball valve",
    ),
    "home": (
        "table lamp", "throw blanket", "pillow", "curtain",
        "wall shelf", "desk organizer",
    ),
}

_CATEGORY_MODIFIERS: dict[str, tuple[str, ...]] = {
    "apparel": ("cotton", "fleece", "waterproof", "classic", "slim fit", "thermal"),
    "gifts": ("birthday", "holiday", "deluxe", "mini", "ceramic", "wooden"),
    "hardware": ("brass", "steel", "heavy duty", "compact", "galvanized"),
    "home": ("soft", "modern", "rustic", "bamboo", "linen"),
}

_VARIANTS = (
    "blue", "red", "green", "black", "white", "grey",
    "small", "large", "25", "50", "3 pack", "pro",
)

_PRICE_RANGES = {
    "apparel": (9.99, 89.99),
    "gifts": (4.99, 59.99),
    "hardware": (2.99, 39.99),
    "home": (7.99, 119.99),
}

_RATING_VALUES = (1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)
_RATING_WEIGHTS = (1, 2, 4, 6, 12, 18, 25, 22, 10)


def tokens_of(text: str) -> tuple[str, ...]:
    """Lowercased alphanumeric tokens, duplicates removed, order kept."""
    seen: dict[str, None] = {}
    for tok in _TOKEN_RE.findall(text.lower()):
        seen.setdefault(tok, None)
    return tuple(seen)


def gen_catalog(seed: int, n_products: int) -> Catalog:
    """Deterministic catalog with unique titles and slugs."""
    if n_products < 1:
        raise ValueError("n_products must be >= 1")
    rng = random.Random(seed)
    categories = tuple(_CATEGORY_ITEMS)
    products: list[Product] = []
    seen_slugs: set[str] = set()
    seen_titles: set[str] = set()
    for idx in range(n_products):
        for _ in range(1000):
            category = rng.choice(categories)
            brand = rng.choice(_BRANDS)
            modifier = rng.choice(_CATEGORY_MODIFIERS[category])
            item = rng.choice(_CATEGORY_ITEMS[category])
            variant = rng.choice(_VARIANTS)
            title = " ".join(w.capitalize() for w in f"{brand} {modifier} {item} {variant}".split())
            slug = sanitize_segment(title)
            if title not in seen_titles and slug not in seen_slugs:
                break
        else:  # pragma: no cover - word bank is large enough in practice
            raise RuntimeError("could not draw a unique product title")
        seen_titles.add(title)
        seen_slugs.add(slug)
        lo, hi = _PRICE_RANGES[category]
        price = round(rng.uniform(lo, hi), 2)
        rating = rng.choices(_RATING_VALUES, weights=_RATING_WEIGHTS, k=1)[0]
        review_count = int(rng.random() ** 2 * 5000)
        description = f"{modifier.capitalize()} {item} by {brand}. A dependable pick in {category}."
        products.append(
            Product(
                product_id=f"p{idx:05d}",
                title=title,
                price=price,
                rating=rating,
                review_count=review_count,
                category=category,
                description=description,
                slug=slug,
            )
        )
    return Catalog(products=tuple(products), seed=seed)


def write_catalog(catalog: Catalog, path: str | Path) -> None:
    """One JSON object per product per line; each carries the catalog seed."""
    with open(path, "w", encoding="utf-8") as fh:
        for product in catalog.products:
            obj = product.to_obj()
            obj["catalog_seed"] = catalog.seed
            fh.write(json.dumps(obj, ensure_ascii=False))
            fh.write("\n")


def read_catalog(path: str | Path) -> Catalog:
    products: list[Product] = []
    seed = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
                if line_no == 1:
                    seed = int(obj.get("catalog_seed", 0))
                products.append(Product.from_obj(obj))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"catalog line {line_no}: {exc}") from exc
    return Catalog(products=tuple(products), seed=seed)


# --- context construction -------------------------------------------------


def _el(tag: str, *, name: str | None = None, text: str = "",
        attrs: Iterable[tuple[str, str]] = (), children: Iterable[ContextNode] = ()) -> ContextNode:
    return ContextNode(tag, name=name, text=text, attrs=tuple(attrs), children=tuple(children))


def _search_bar() -> ContextNode:
    return _el(
        "div",
        name="search_bar",
        children=[
            _el("input", name="search_input",
                attrs=(("placeholder", "Search products"), ("type", "text"))),
        ],
    )


def _page(children: Iterable[ContextNode]) -> SimplifiedContext:
    root = _el("html", children=[_el("body", children=list(children))])
    return assign_names(SimplifiedContext(root))


def _product_entry(product: Product) -> ContextNode:
    info = (
        f"{product.title} | ${product.price:.2f} | "
        f"{product.rating:g} stars ({product.review_count} reviews)"
    )
    return _el(
        "div",
        name=product.slug,
        children=[
            _el("span", text=info),
            _el("a", name="view_product", text="View product"),
        ],
    )


class Shop:
    """A catalog plus memoized ranking, page composition, and rendering.

    States are immutable; :meth:`step` returns a fresh state and the context
    it renders to. Catalog access is read-only, so one Shop may serve many
    concurrent sessions.
    """

    def __init__(self, catalog: Catalog):
        self.catalog = catalog
        self.by_id = {p.product_id: p for p in catalog.products}
        self.by_slug = {p.slug: p for p in catalog.products}
        self._rank_cache: dict[str, tuple[Product, ...]] = {}
        self._ctx_cache: dict[tuple, tuple[SimplifiedContext, dict[str, ContextNode], str]] = {}

    # -- ranking and page composition --

    def rank(self, query: str) -> tuple[Product, ...]:
        """Token-overlap ranking: score is the number of distinct query
        tokens found in the title; ties break on ascending product_id;
        zero scores are excluded."""
        cached = self._rank_cache.get(query)
        if cached is not None:
            return cached
        query_tokens = set(tokens_of(query))
        scored: list[tuple[int, str, Product]] = []
        for product in self.catalog.products:
            score = len(query_tokens.intersection(tokens_of(product.title)))
            if score > 0:
                scored.append((score, product.product_id, product))
        scored.sort(key=lambda item: (-item[0], item[1]))
        ranked = tuple(product for _, _, product in scored)
        self._rank_cache[query] = ranked
        return ranked

    def filtered(self, query: str, filters: Sequence[str]) -> tuple[Product, ...]:
        ranked = self.rank(query)
        if not filters:
            return ranked
        specs = [FILTERS[f] for f in filters]
        return tuple(p for p in ranked if all(spec.matches(p) for spec in specs))

    def page_products(self, page: SearchPage) -> tuple[Product, ...]:
        matching = self.filtered(page.query, page.filters)
        start = (page.page_no - 1) * RESULTS_PER_PAGE
        return matching[start : start + RESULTS_PER_PAGE]

    # -- context rendering --

    def _build_search_page(self, page: SearchPage) -> SimplifiedContext:
        matching = self.filtered(page.query, page.filters)
        total = len(matching)
        start = (page.page_no - 1) * RESULTS_PER_PAGE
        shown = matching[start : start + RESULTS_PER_PAGE]
        results_children: list[ContextNode] = []
        if not shown:
            results_children.append(_el("h2", text=f'No results for "{page.query}"'))
        else:
            results_children.append(
                _el("h2", text=f'{total} results for "{page.query}" (page {page.page_no})')
            )
            filter_children: list[ContextNode] = []
            active = [FILTERS[f].label for f in page.filters]
            if active:
                filter_children.append(_el("p", text="Active: " + ", ".join(sorted(active))))
            for filter_id in FILTER_ORDER:
                if filter_id not in page.filters:
                    filter_children.append(_el("a", name=filter_id, text=FILTERS[filter_id].label))
            results_children.append(
                _el("div", name="filter", text="Filter results:", children=filter_children)
            )
            results_children.extend(_product_entry(p) for p in shown)
            if page.page_no > 1:
                results_children.append(_el("a", name="prev_page", text="Previous page"))
            if total > page.page_no * RESULTS_PER_PAGE:
                results_children.append(_el("a", name="next_page", text="Next page"))
        return _page([_search_bar(), _el("div", name="results", children=results_children)])

    def _build_product_page(self, product: Product) -> SimplifiedContext:
        detail = _el(
            "div",
            name="product_page",
            children=[
                _el("h1", text=product.title),
                _el("p", text=f"${product.price:.2f}"),
                _el("p", text=f"{product.rating:g} stars | {product.review_count} reviews"),
                _el("p", text=product.description),
                _el("p", text=f"Category: {product.category}"),
                _el("button", name="buy_now", text="Buy now"),
                _el("a", name="back_to_results", text="Back to results"),
            ],
        )
        return _page([_search_bar(), detail])

    def _cache_key(self, state: ShopState) -> tuple:
        if state.terminal is not None:
            return ("terminal", state.terminal)
        page = state.page
        if isinstance(page, LandingPage):
            return ("landing",)
        if isinstance(page, SearchPage):
            return ("search", page.query, page.filters, page.page_no)
        return ("product", page.product_id)

    def _entry(self, state: ShopState) -> tuple[SimplifiedContext, dict[str, ContextNode], str]:
        key = self._cache_key(state)
        entry = self._ctx_cache.get(key)
        if entry is not None:
            return entry
        if key[0] == "terminal":
            message = "Order placed. Thanks for shopping." if key[1] == "purchase" else "Session ended."
            ctx = _page([_el("p", text=message)])
        elif key[0] == "landing":
            ctx = _page([_search_bar(), _el("p", text="Search the catalog to get started.")])
        elif key[0] == "search":
            ctx = self._build_search_page(state.page)  # type: ignore[arg-type]
        else:
            ctx = self._build_product_page(self.by_id[key[1]])
        index: dict[str, ContextNode] = {}

        def collect(node: ContextNode) -> None:
            if node.name:
                index[node.name] = node
            for child in node.children:
                collect(child)

        collect(ctx.root)
        entry = (ctx, index, render(ctx))
        self._ctx_cache[key] = entry
        return entry

    def context_of(self, state: ShopState) -> SimplifiedContext:
        return self._entry(state)[0]

    def rendered_context_of(self, state: ShopState) -> str:
        return self._entry(state)[2]

    # -- the state machine --

    def initial_state(self) -> tuple[ShopState, SimplifiedContext]:
        state = ShopState(shop=self)
        return state, self.context_of(state)

    def step(self, state: ShopState, action: Action) -> tuple[ShopState, SimplifiedContext]:
        if state.terminal is not None:
            raise IllegalAction("the session has already ended")
        _, index, _ = self._entry(state)
        depth = state.history_depth + 1

        if action.kind is ActionKind.TERMINATE:
            new = replace(state, terminal="terminate", history_depth=depth)
            return new, self.context_of(new)

        target = action.target_name or ""
        node = index.get(target)
        if node is None:
            raise IllegalAction(f"no element named {target!r} on the current page")

        if action.kind is ActionKind.TYPE_AND_SUBMIT:
            if node.tag != "input":
                raise IllegalAction(f"{target!r} is not an input field")
            new = replace(state, page=SearchPage(query=action.text or ""), history_depth=depth)
            return new, self.context_of(new)

        # Clicks, by naming convention.
        segments = target.split(".")
        last = segments[-1]
        page = state.page
        if target == BUY_NOW_NAME:
            new = replace(state, terminal="purchase", history_depth=depth)
        elif target == BACK_TO_RESULTS_NAME and isinstance(page, ProductPage):
            new = replace(
                state,
                page=SearchPage(page.from_query, page.from_filters, page.from_page_no),
                history_depth=depth,
            )
        elif target in (NEXT_PAGE_NAME, PREV_PAGE_NAME) and isinstance(page, SearchPage):
            delta = 1 if target == NEXT_PAGE_NAME else -1
            new = replace(state, page=replace(page, page_no=page.page_no + delta), history_depth=depth)
        elif target.startswith(FILTER_PREFIX) and isinstance(page, SearchPage):
            filters = tuple(sorted(set(page.filters) | {last}))
            new = replace(state, page=SearchPage(page.query, filters, 1), history_depth=depth)
        elif last == "view_product" and len(segments) >= 3 and isinstance(page, SearchPage):
            product = self.by_slug.get(segments[-2])
            if product is None:
                raise IllegalAction(f"unknown product link {target!r}")
            new = replace(
                state,
                page=ProductPage(product.product_id, page.query, page.filters, page.page_no),
                history_depth=depth,
            )
        else:
            raise IllegalAction(f"{target!r} is not a supported control here")
        return new, self.context_of(new)


def initial_state(catalog_or_shop: Catalog | Shop) -> tuple[ShopState, SimplifiedContext]:
    shop = catalog_or_shop if isinstance(catalog_or_shop, Shop) else Shop(catalog_or_shop)
    return shop.initial_state()


def step(state: ShopState, action: Action) -> tuple[ShopState, SimplifiedContext]:
    return state.shop.step(state, action)


def rank(catalog: Catalog | Shop, query: str) -> tuple[Product, ...]:
    shop = catalog if isinstance(catalog, Shop) else Shop(catalog)
    return shop.rank(query)


def replay_session(catalog_or_shop: Catalog | Shop, session: Session,
                   check_contexts: bool = False) -> ShopState:
    """Drive a session's actions through the state machine from the start.

    Raises IllegalAction if any action does not apply, and AssertionError
    when ``check_contexts`` is set and a stored context disagrees with the
    freshly rendered one.
    """
    shop = catalog_or_shop if isinstance(catalog_or_shop, Shop) else Shop(catalog_or_shop)
    state, ctx = shop.initial_state()
    for step_ in session.steps:
        if check_contexts and step_.context != ctx:
            raise AssertionError(f"context mismatch at step {step_.index} of {session.session_id}")
        state, ctx = shop.step(state, step_.action)
    return state
