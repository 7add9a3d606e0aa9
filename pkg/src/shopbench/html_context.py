"""Simplified-HTML observation trees.

Raw markup is pruned down to a small set of structural tags, interactable
elements (links, buttons, inputs) receive unique dot-joined hierarchical
names, and the result renders to a canonical plain-text HTML form that
parses back to an identical tree.
"""

from __future__ import annotations

import functools
import html as _htmllib
import re
from dataclasses import dataclass, replace
from html.parser import HTMLParser

ALLOWED_TAGS = frozenset(
    {
        "html",
        "body",
        "div",
        "span",
        "p",
        "h1",
        "h2",
        "h3",
        "h4",
        "h5",
        "h6",
        "ul",
        "ol",
        "li",
        "table",
        "tr",
        "td",
        "th",
        "a",
        "button",
        "input",
        "form",
        "label",
        "img",
    }
)

# Dropped with their whole subtree: invisible or purely presentational.
DROPPED_TAGS = frozenset(
    {
        "script",
        "style",
        "noscript",
        "template",
        "head",
        "title",
        "meta",
        "link",
        "svg",
        "canvas",
        "iframe",
        "object",
        "embed",
        "video",
        "audio",
    }
)

INTERACTABLE_KINDS = {"a": "link", "button": "button", "input": "input"}

# Attributes carried through simplification (besides naming sources).
RETAINED_ATTRS = ("placeholder", "type", "value")

# Elements that never take a closing tag in source HTML.
_VOID_TAGS = frozenset(
    {"img", "input", "br", "hr", "meta", "link", "source", "area", "base", "col", "track", "wbr"}
)

MAX_SEGMENT_LEN = 40
MAX_DEPTH = 32

_WS_RE = re.compile(r"\s+")
_SANITIZE_RE = re.compile(r"[^a-z0-9]+")


class UnparseableMarkupError(ValueError):
    """Input bytes are not valid UTF-8 markup."""


class NamePath(str):
    """A rendered hierarchical name: sanitized segments joined by dots."""

    @property
    def segments(self) -> tuple[str, ...]:
        return tuple(self.split("."))

    @classmethod
    def from_segments(cls, segments: tuple[str, ...] | list[str]) -> "NamePath":
        return cls(".".join(segments))


@dataclass(frozen=True)
class ContextNode:
    """One element of a simplified context tree."""

    tag: str
    name: str | None = None
    text: str = ""
    attrs: tuple[tuple[str, str], ...] = ()
    children: tuple["ContextNode", ...] = ()


@dataclass(frozen=True)
class SimplifiedContext:
    """A pruned element tree rooted at an ``html`` node."""

    root: ContextNode


def sanitize_segment(raw: str) -> str:
    """Lowercase, map non-alphanumeric runs to ``_``, trim, cap length."""
    seg = _SANITIZE_RE.sub("_", raw.lower()).strip("_")
    return seg[:MAX_SEGMENT_LEN].rstrip("_")


def split_local_name(value: str) -> tuple[str, ...]:
    """Attribute-sourced names may be dotted paths; sanitize each segment."""
    return tuple(s for s in (sanitize_segment(p) for p in value.split(".")) if s)


def _collapse_ws(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


class _RawNode:
    __slots__ = ("tag", "attrs", "children")

    def __init__(self, tag: str, attrs: dict[str, str]):
        self.tag = tag
        self.attrs = attrs
        self.children: list[object] = []  # str | _RawNode


class _TreeBuilder(HTMLParser):
    """Lenient tree builder: unmatched closers are ignored, open tags
    auto-close at end of input."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.roots: list[object] = []
        self._stack: list[_RawNode] = []

    def _sink(self) -> list[object]:
        return self._stack[-1].children if self._stack else self.roots

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        tag = tag.lower()
        attr_map: dict[str, str] = {}
        for key, value in attrs:
            attr_map.setdefault(key.lower(), value if value is not None else "")
        node = _RawNode(tag, attr_map)
        self._sink().append(node)
        if tag not in _VOID_TAGS:
            self._stack.append(node)

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        tag = tag.lower()
        attr_map: dict[str, str] = {}
        for key, value in attrs:
            attr_map.setdefault(key.lower(), value if value is not None else "")
        self._sink().append(_RawNode(tag, attr_map))

    def handle_endtag(self, tag: str) -> None:
        tag = tag.lower()
        for i in range(len(self._stack) - 1, -1, -1):
            if self._stack[i].tag == tag:
                del self._stack[i:]
                return
        # Stray closer: ignore.

    def handle_data(self, data: str) -> None:
        if data:
            self._sink().append(data)


def _local_name_from_attrs(attrs: dict[str, str]) -> tuple[str, ...]:
    for key in ("name", "id", "aria-label"):
        value = attrs.get(key)
        if value:
            segments = split_local_name(value)
            if segments:
                return segments
    return ()


def _subtree_text(raw: _RawNode) -> str:
    parts: list[str] = []

    def walk(node: _RawNode) -> None:
        if node.tag in DROPPED_TAGS:
            return
        if node.tag == "img":
            alt = _collapse_ws(node.attrs.get("alt", ""))
            if alt:
                parts.append(alt)
            return
        for child in node.children:
            if isinstance(child, str):
                collapsed = _collapse_ws(child)
                if collapsed:
                    parts.append(collapsed)
            else:
                walk(child)

    walk(raw)
    return " ".join(parts)


def _retained_attrs(attrs: dict[str, str]) -> tuple[tuple[str, str], ...]:
    kept = [(k, _collapse_ws(attrs[k])) for k in RETAINED_ATTRS if attrs.get(k)]
    return tuple(sorted(kept))


def _convert_children(raw_children: list[object], depth: int) -> tuple[list[str], list[ContextNode]]:
    texts: list[str] = []
    nodes: list[ContextNode] = []
    for child in raw_children:
        if isinstance(child, str):
            collapsed = _collapse_ws(child)
            if collapsed:
                texts.append(collapsed)
            continue
        tag = child.tag
        if tag in DROPPED_TAGS:
            continue
        if tag == "img":
            alt = _collapse_ws(child.attrs.get("alt", ""))
            if not alt:
                continue
            if depth > MAX_DEPTH:
                texts.append(alt)
            else:
                nodes.append(ContextNode("img", text=alt))
            continue
        if tag in ALLOWED_TAGS:
            if depth > MAX_DEPTH:
                # Beyond the depth cap, structure folds into the parent;
                # interactables survive as flattened leaves.
                if tag in INTERACTABLE_KINDS:
                    local = _local_name_from_attrs(child.attrs)
                    nodes.append(
                        ContextNode(
                            tag,
                            name=".".join(local) or None,
                            text=_subtree_text(child),
                            attrs=_retained_attrs(child.attrs),
                        )
                    )
                else:
                    inner_texts, inner_nodes = _convert_children(child.children, depth)
                    texts.extend(inner_texts)
                    nodes.extend(inner_nodes)
                continue
            nodes.append(_convert_element(child, depth))
            continue
        # Unknown tag: splice its content into the current element.
        inner_texts, inner_nodes = _convert_children(child.children, depth)
        texts.extend(inner_texts)
        nodes.extend(inner_nodes)
    return texts, nodes


def _convert_element(raw: _RawNode, depth: int) -> ContextNode:
    local = _local_name_from_attrs(raw.attrs)
    texts, children = _convert_children(raw.children, depth + 1)
    return ContextNode(
        raw.tag,
        name=".".join(local) or None,
        text=" ".join(texts),
        attrs=_retained_attrs(raw.attrs),
        children=tuple(children),
    )


def simplify(raw: str | bytes) -> SimplifiedContext:
    """Parse markup (repairing it best-effort) and prune it to the allowed
    structural subset. Double quotes around attributes, whitespace, scripts,
    styles, and unknown wrappers all normalize away."""
    if isinstance(raw, (bytes, bytearray)):
        try:
            text = bytes(raw).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise UnparseableMarkupError(f"input is not valid UTF-8: {exc}") from exc
    else:
        text = raw
    builder = _TreeBuilder()
    builder.feed(text)
    builder.close()
    texts, nodes = _convert_children(builder.roots, 0)
    if not texts and len(nodes) == 1 and nodes[0].tag == "html":
        return SimplifiedContext(nodes[0])
    return SimplifiedContext(ContextNode("html", text=" ".join(texts), children=tuple(nodes)))


def _reserve(path: str, used: set[str]) -> str:
    if path not in used:
        used.add(path)
        return path
    head, _, last = path.rpartition(".")
    counter = 2
    while True:
        suffix = f"_{counter}"
        candidate_last = last[: MAX_SEGMENT_LEN - len(suffix)] + suffix
        candidate = f"{head}.{candidate_last}" if head else candidate_last
        if candidate not in used:
            used.add(candidate)
            return candidate
        counter += 1


def assign_names(ctx: SimplifiedContext) -> SimplifiedContext:
    """Give every interactable a unique hierarchical name.

    A name is the dot-join of all named ancestors' local names plus the
    element's own local name (attribute-sourced, else sanitized inner text,
    else its element kind). Already-dotted names are treated as final paths.
    Container names are folded into their descendants' paths and cleared, so
    rendering and re-simplifying reproduces the same tree. Collisions get
    deterministic ``_2``, ``_3``, ... suffixes in document order.
    """
    used: set[str] = set()

    def walk(node: ContextNode, prefix: tuple[str, ...]) -> ContextNode:
        local = split_local_name(node.name) if node.name else ()
        if node.tag in INTERACTABLE_KINDS:
            if not local:
                text_seg = sanitize_segment(node.text)
                local = (text_seg,) if text_seg else (INTERACTABLE_KINDS[node.tag],)
            path_segments = local if len(local) > 1 else prefix + local
            rendered = _reserve(".".join(path_segments), used)
            children = tuple(walk(c, tuple(rendered.split("."))) for c in node.children)
            return replace(node, name=rendered, children=children)
        child_prefix = prefix + local
        children = tuple(walk(c, child_prefix) for c in node.children)
        return replace(node, name=None, children=children)

    return SimplifiedContext(walk(ctx.root, ()))


def simplify_and_name(raw: str | bytes) -> SimplifiedContext:
    return assign_names(simplify(raw))


def list_interactables(ctx: SimplifiedContext) -> list[tuple[str, str]]:
    """All named interactables as (hierarchical name, kind), document order."""
    found: list[tuple[str, str]] = []

    def walk(node: ContextNode) -> None:
        kind = INTERACTABLE_KINDS.get(node.tag)
        if kind is not None and node.name:
            found.append((node.name, kind))
        for child in node.children:
            walk(child)

    walk(ctx.root)
    return found


@functools.lru_cache(maxsize=4096)
def _name_index(ctx: SimplifiedContext) -> dict[str, ContextNode]:
    index: dict[str, ContextNode] = {}

    def walk(node: ContextNode) -> None:
        if node.tag in INTERACTABLE_KINDS and node.name:
            index.setdefault(node.name, node)
        for child in node.children:
            walk(child)

    walk(ctx.root)
    return index


def resolve(ctx: SimplifiedContext, name: str) -> ContextNode | None:
    """Case-sensitive lookup of an interactable by its rendered name."""
    return _name_index(ctx).get(name)


def _attr_string(node: ContextNode) -> str:
    parts: list[str] = []
    if node.name:
        parts.append(f'name="{_htmllib.escape(node.name, quote=True)}"')
    if node.tag == "img" and node.text:
        parts.append(f'alt="{_htmllib.escape(node.text, quote=True)}"')
    for key, value in node.attrs:
        parts.append(f'{key}="{_htmllib.escape(value, quote=True)}"')
    return " " + " ".join(parts) if parts else ""


def _emit(node: ContextNode, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    attrs = _attr_string(node)
    tag = node.tag
    if tag in ("img", "input"):
        out.append(f"{pad}<{tag}{attrs}/>")
        return
    if not node.children:
        text = _htmllib.escape(node.text, quote=False) if node.text else ""
        out.append(f"{pad}<{tag}{attrs}>{text}</{tag}>")
        return
    out.append(f"{pad}<{tag}{attrs}>")
    if node.text:
        out.append(f"{pad}  {_htmllib.escape(node.text, quote=False)}")
    for child in node.children:
        _emit(child, depth + 1, out)
    out.append(f"{pad}</{tag}>")


@functools.lru_cache(maxsize=4096)
def render(ctx: SimplifiedContext) -> str:
    """Canonical simplified-HTML text: 2-space indent, name attribute first,
    retained attributes in sorted order. ``simplify(render(ctx)) == ctx`` for
    trees produced by :func:`assign_names`."""
    out: list[str] = []
    _emit(ctx.root, 0, out)
    return "\n".join(out)
