from __future__ import annotations

import pytest

from shopbench.html_context import list_interactables, resolve
from shopbench.session_model import Action
from shopbench.shopsim import (
    FILTERS,
    RESULTS_PER_PAGE,
    SEARCH_INPUT_NAME,
    Catalog,
    IllegalAction,
    Product,
    SearchPage,
    gen_catalog,
    rank,
    read_catalog,
    replay_session,
    tokens_of,
    write_catalog,
)


def _product(pid: str, title: str, price: float = 10.0, rating: float = 4.0) -> Product:
    return Product(
        product_id=pid,
        title=title,
        price=price,
        rating=rating,
        review_count=10,
        category="hardware",
        description="d",
        slug=title.lower().replace(" ", "_").replace("/", "_"),
    )


@pytest.fixture()
def tiny_catalog():
    return Catalog(
        products=(
            _product("p0", "Brass Tee Connector 16mm"),
            _product("p1", "Steel Tee Hose Clamp"),
            _product("p2", "Compact Elbow Connector"),
        ),
        seed=0,
    )


def brute_force_rank(catalog: Catalog, query: str) -> list[Product]:
    """Independent scorer: recount token hits per product, stable sort."""
    qtokens = set(tokens_of(query))
    scored = []
    for p in catalog.products:
        hits = sum(1 for t in qtokens if t in tokens_of(p.title))
        if hits:
            scored.append((hits, p))
    scored.sort(key=lambda pair: (-pair[0], pair[1].product_id))
    return [p for _, p in scored]


def test_gen_catalog_is_deterministic():
    assert gen_catalog(42, 100).products == gen_catalog(42, 100).products


def test_gen_catalog_single_product():
    catalog = gen_catalog(1, 1)
    assert len(catalog.products) == 1


def test_catalog_invariants_across_seed_sweep():
    # 100 seeds x 100 products = 10k samples
    allowed_ratings = {1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0}
    for seed in range(100):
        catalog = gen_catalog(seed, 100)
        ids = [p.product_id for p in catalog.products]
        slugs = [p.slug for p in catalog.products]
        assert len(set(ids)) == len(ids)
        assert len(set(slugs)) == len(slugs)
        for p in catalog.products:
            assert p.rating in allowed_ratings
            assert p.price > 0
            assert p.review_count >= 0


def test_initial_state_exposes_only_the_search_input(shop):
    _, ctx = shop.initial_state()
    interactables = list_interactables(ctx)
    assert (SEARCH_INPUT_NAME, "input") in interactables
    assert sum(1 for _, kind in interactables if kind == "input") == 1
    assert not any(name.endswith(".buy_now") for name, _ in interactables)


def test_initial_render_is_deterministic(shop):
    a = shop.rendered_context_of(shop.initial_state()[0])
    b = shop.rendered_context_of(shop.initial_state()[0])
    assert a == b


def test_search_gives_ranked_first_page(shop):
    state, _ = shop.initial_state()
    state, ctx = shop.step(state, Action.type_and_submit(SEARCH_INPUT_NAME, "gift card"))
    assert isinstance(state.page, SearchPage)
    shown = shop.page_products(state.page)
    assert list(shown) == brute_force_rank(shop.catalog, "gift card")[:RESULTS_PER_PAGE]
    for product in shown:
        assert resolve(ctx, f"results.{product.slug}.view_product") is not None


def test_click_product_reaches_detail_page_with_buy_now(shop):
    state, _ = shop.initial_state()
    state, ctx = shop.step(state, Action.type_and_submit(SEARCH_INPUT_NAME, "shirt"))
    product = shop.page_products(state.page)[0]
    state, ctx = shop.step(state, Action.click(f"results.{product.slug}.view_product"))
    assert resolve(ctx, "product_page.buy_now") is not None
    assert resolve(ctx, "product_page.back_to_results") is not None
    assert product.title in shop.rendered_context_of(state)


def test_rating_filter_keeps_only_four_stars_and_up(shop):
    state, _ = shop.initial_state()
    state, ctx = shop.step(state, Action.type_and_submit(SEARCH_INPUT_NAME, "columbia"))
    state, ctx = shop.step(state, Action.click("results.filter.rating_4_up"))
    shown = shop.page_products(state.page)
    assert shown, "filtered page should not be empty for a broad query"
    for product in shown:
        assert product.rating >= 4.0
    # independent oracle: re-scan the catalog
    expected = [p for p in brute_force_rank(shop.catalog, "columbia") if p.rating >= 4.0]
    assert list(shown) == expected[:RESULTS_PER_PAGE]


def test_price_filter_respects_band(shop):
    state, _ = shop.initial_state()
    state, _ = shop.step(state, Action.type_and_submit(SEARCH_INPUT_NAME, "disney"))
    state, _ = shop.step(state, Action.click("results.filter.price_under_25"))
    for product in shop.page_products(state.page):
        assert product.price < 25.0


def test_pagination_moves_one_page(shop):
    state, _ = shop.initial_state()
    state, ctx = shop.step(state, Action.type_and_submit(SEARCH_INPUT_NAME, "columbia"))
    if resolve(ctx, "results.next_page") is None:
        pytest.skip("query does not span two pages in this catalog")
    state, ctx = shop.step(state, Action.click("results.next_page"))
    assert state.page.page_no == 2
    assert resolve(ctx, "results.prev_page") is not None
    state, _ = shop.step(state, Action.click("results.prev_page"))
    assert state.page.page_no == 1


def test_buy_now_is_terminal(shop):
    state, _ = shop.initial_state()
    state, _ = shop.step(state, Action.type_and_submit(SEARCH_INPUT_NAME, "lamp"))
    product = shop.page_products(state.page)[0]
    state, _ = shop.step(state, Action.click(f"results.{product.slug}.view_product"))
    state, _ = shop.step(state, Action.click("product_page.buy_now"))
    assert state.terminal == "purchase"
    with pytest.raises(IllegalAction):
        shop.step(state, Action.terminate())


def test_terminate_is_always_legal_and_terminal(shop):
    state, _ = shop.initial_state()
    state, _ = shop.step(state, Action.terminate())
    assert state.terminal == "terminate"


def test_unknown_target_is_illegal(shop):
    state, _ = shop.initial_state()
    with pytest.raises(IllegalAction):
        shop.step(state, Action.click("nonexistent.button"))


def test_typing_into_a_non_input_is_illegal(shop):
    state, _ = shop.initial_state()
    state, _ = shop.step(state, Action.type_and_submit(SEARCH_INPUT_NAME, "mug"))
    product = shop.page_products(state.page)[0]
    with pytest.raises(IllegalAction):
        shop.step(state, Action.type_and_submit(f"results.{product.slug}.view_product", "text"))


def test_step_is_pure(shop):
    state, _ = shop.initial_state()
    action = Action.type_and_submit(SEARCH_INPUT_NAME, "socks")
    first_state, first_ctx = shop.step(state, action)
    second_state, second_ctx = shop.step(state, action)
    assert first_state == second_state
    assert first_ctx == second_ctx


def test_rank_matches_brute_force_oracle(tiny_catalog):
    for query in ("tee connector", "tee", "elbow connector brass", "nothing matches"):
        assert list(rank(tiny_catalog, query)) == brute_force_rank(tiny_catalog, query)


def test_typo_query_ranks_differently_from_corrected(tiny_catalog):
    typo = rank(tiny_catalog, "tee conector")
    corrected = rank(tiny_catalog, "tee connector")
    assert typo != corrected
    assert list(typo) == brute_force_rank(tiny_catalog, "tee conector")
    assert list(corrected) == brute_force_rank(tiny_catalog, "tee connector")
    # the misspelled token matches nothing, so only "tee" scores
    assert [p.product_id for p in typo] == ["p0", "p1"]


def test_zero_score_products_are_excluded(tiny_catalog):
    assert rank(tiny_catalog, "zzz qqq") == ()


def test_no_results_page_keeps_search_input(shop):
    state, ctx = shop.initial_state()
    state, ctx = shop.step(state, Action.type_and_submit(SEARCH_INPUT_NAME, "zzzqqqxxx"))
    names = [name for name, _ in list_interactables(ctx)]
    assert names == [SEARCH_INPUT_NAME]
    assert "No results" in shop.rendered_context_of(state)


def test_every_search_context_has_chrome_and_product_pages_have_buy_now(shop, small_dataset):
    from shopbench.session_model import ActionKind

    for session in small_dataset[:30]:
        for step_ in session.steps:
            names = {name for name, _ in list_interactables(step_.context)}
            if any(n.endswith(".view_product") for n in names):
                assert SEARCH_INPUT_NAME in names
            if step_.action.kind is ActionKind.CLICK and step_.action.target_name == "product_page.buy_now":
                assert "product_page.buy_now" in names


def test_replay_closure_on_sample(shop, small_dataset):
    for session in small_dataset[:50]:
        replay_session(shop, session, check_contexts=True)


def test_catalog_file_round_trip(tmp_path, catalog):
    path = tmp_path / "catalog.jsonl"
    write_catalog(catalog, path)
    loaded = read_catalog(path)
    assert loaded.products == catalog.products
    assert loaded.seed == catalog.seed


def test_filter_specs_match_their_own_bands():
    p_cheap = _product("p0", "A", price=10.0, rating=3.0)
    p_mid = _product("p1", "B", price=30.0, rating=4.5)
    assert FILTERS["price_under_25"].matches(p_cheap)
    assert not FILTERS["price_under_25"].matches(p_mid)
    assert FILTERS["rating_4_up"].matches(p_mid)
    assert not FILTERS["rating_4_up"].matches(p_cheap)
