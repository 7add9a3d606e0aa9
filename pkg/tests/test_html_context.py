from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shopbench.html_context import (
    MAX_DEPTH,
    NamePath,
    UnparseableMarkupError,
    assign_names,
    list_interactables,
    render,
    resolve,
    sanitize_segment,
    simplify,
    simplify_and_name,
)


def test_scripts_and_styles_are_removed():
    ctx = simplify("<html><body><script>alert(1)</script><style>a{}</style><p>hi</p></body></html>")
    rendered = render(ctx)
    assert "script" not in rendered and "alert" not in rendered
    assert "style" not in rendered
    assert "hi" in rendered


def test_tables_and_lists_survive():
    ctx = simplify("<table><tr><td>one</td><td>two</td></tr></table><ul><li>x</li></ul>")
    rendered = render(ctx)
    assert "<table>" in rendered and "<tr>" in rendered and "<td>" in rendered
    assert "<ul>" in rendered and "<li>" in rendered


def test_unknown_wrappers_flatten_but_keep_content():
    ctx = simplify("<section><strong>bold words</strong><a href='#'>go</a></section>")
    rendered = render(ctx)
    assert "section" not in rendered and "strong" not in rendered
    assert "bold words" in rendered
    assert "<a" in rendered


def test_hierarchical_name_from_nested_containers():
    ctx = simplify_and_name('<div name="columbia_shirt"><a name="view_product">View</a></div>')
    assert list_interactables(ctx) == [("columbia_shirt.view_product", "link")]


def test_sibling_collision_gets_numeric_suffix():
    ctx = simplify_and_name('<a name="view_product">a</a><a name="view_product">b</a>')
    names = [name for name, _ in list_interactables(ctx)]
    assert names == ["view_product", "view_product_2"]


def test_unnamed_interactable_falls_back_to_inner_text():
    ctx = simplify_and_name("<a>Buy Now!</a>")
    assert list_interactables(ctx) == [("buy_now", "link")]


def test_unnamed_textless_interactable_falls_back_to_kind():
    ctx = simplify_and_name("<button></button>")
    assert list_interactables(ctx) == [("button", "button")]


def test_resolve_hits_and_misses():
    ctx = simplify_and_name('<div name="box"><button name="go">Go</button></div>')
    node = resolve(ctx, "box.go")
    assert node is not None and node.tag == "button"
    assert resolve(ctx, "missing.name") is None
    assert resolve(ctx, "Box.Go") is None  # case-sensitive


def test_name_sources_priority_name_then_id_then_aria():
    ctx = simplify_and_name('<a id="by_id" aria-label="by aria">x</a>')
    assert list_interactables(ctx)[0][0] == "by_id"
    ctx = simplify_and_name('<a aria-label="Add To Cart">x</a>')
    assert list_interactables(ctx)[0][0] == "add_to_cart"


def test_img_kept_only_with_alt_text():
    with_alt = render(simplify('<img alt="red shoe"><img src="x.png">'))
    assert "red shoe" in with_alt
    assert with_alt.count("<img") == 1


def test_empty_context_renders_bare_root():
    assert render(simplify("")) == "<html></html>"


def test_invalid_utf8_bytes_raise():
    with pytest.raises(UnparseableMarkupError):
        simplify(b"\xff\xfe<html>")


def test_malformed_html_is_repaired():
    ctx = simplify("<div><p>unclosed <a name=link>text</div></wat>")
    assert list_interactables(assign_names(ctx)) == [("link", "link")]


_SAMPLES = [
    "<html><body><div name='a'><a name='b'>x</a></div></body></html>",
    "<p>one</p><p>two</p>",
    "<div><div><div><a>deep &amp; dark</a></div></div></div>",
    '<input name="q" type="text" value="preset">',
    "<table><tr><th>h</th></tr><tr><td><a name='x.y'>cell</a></td></tr></table>",
    "plain text only",
    "<img alt='пример'><span>mixed  whitespace\n\n here</span>",
]


@pytest.mark.parametrize("raw", _SAMPLES)
def test_simplify_render_round_trip_is_stable(raw):
    once = assign_names(simplify(raw))
    # parsing the canonical render reproduces the tree exactly
    assert simplify(render(once)) == once
    again = assign_names(simplify(render(once)))
    assert again == once
    assert render(again) == render(once)


@pytest.mark.parametrize("raw", _SAMPLES)
def test_render_is_a_fixed_point(raw):
    ctx = assign_names(simplify(raw))
    assert render(simplify(render(ctx))) == render(ctx)


def test_document_order_of_interactables_is_preserved():
    raw = "".join(f'<a name="link_{i}">x</a>' for i in range(12))
    names = [name for name, _ in list_interactables(simplify_and_name(raw))]
    assert names == [f"link_{i}" for i in range(12)]


def test_depth_cap_flattens_but_keeps_interactables():
    raw = "<div>" * (MAX_DEPTH + 6) + '<a name="deep">найди</a>' + "</div>" * (MAX_DEPTH + 6)
    ctx = simplify_and_name(raw)
    assert ("deep", "link") in list_interactables(ctx)

    def max_depth(node, depth=0):
        return max([depth] + [max_depth(c, depth + 1) for c in node.children])

    assert max_depth(ctx.root) <= MAX_DEPTH + 2


@given(st.text(alphabet=st.characters(codec="utf-8"), max_size=60))
def test_sanitize_segment_matches_grammar(raw):
    seg = sanitize_segment(raw)
    assert len(seg) <= 40
    if seg:
        assert all(ch.islower() or ch.isdigit() or ch == "_" for ch in seg)
        assert not seg.startswith("_") and not seg.endswith("_")
        assert "__" not in seg


@given(st.text(max_size=300))
@settings(max_examples=150)
def test_simplify_never_raises_on_text(raw):
    ctx = simplify(raw)
    assert ctx.root.tag == "html"


def _random_markup(seed: int) -> str:
    rng = random.Random(seed)
    tags = ["div", "span", "p", "ul", "li", "a", "button", "input", "section", "b"]
    names = ["view_product", "buy_now", "box", "box", "search", ""]
    parts: list[str] = []

    def emit(depth: int) -> None:
        tag = rng.choice(tags)
        name = rng.choice(names)
        attr = f' name="{name}"' if name else ""
        if tag == "input":
            parts.append(f"<input{attr}>")
            return
        parts.append(f"<{tag}{attr}>")
        for _ in range(rng.randint(0, 3)):
            if depth < 4 and rng.random() < 0.5:
                emit(depth + 1)
            else:
                parts.append(rng.choice(["text", "Buy Now", "", "item 7"]))
        parts.append(f"</{tag}>")

    for _ in range(rng.randint(1, 4)):
        emit(0)
    return "".join(parts)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=200)
def test_assigned_names_are_always_unique(seed):
    ctx = simplify_and_name(_random_markup(seed))
    names = [name for name, _ in list_interactables(ctx)]
    assert len(names) == len(set(names))
    assert all(names)


def test_namepath_helpers():
    path = NamePath.from_segments(("results", "shirt", "view_product"))
    assert path == "results.shirt.view_product"
    assert path.segments == ("results", "shirt", "view_product")
