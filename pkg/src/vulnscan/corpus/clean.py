"""Text-level cleaning of C/C++ source: comments, label markers, layout."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from vulnscan.corpus.lexer import (
    BLOCK_COMMENT,
    CHAR,
    IDENT,
    LINE_COMMENT,
    NUMBER,
    PUNCT,
    SPLICE,
    STRING,
    WS,
    Token,
    lex,
)

MARKER_RE = re.compile(r"good|bad", re.IGNORECASE)

INDENT = "    "


def has_marker(text: str) -> bool:
    return MARKER_RE.search(text) is not None


# -- comments -------------------------------------------------------------


def strip_comments(text: str) -> str:
    """Remove ``//`` and ``/* */`` comments, leaving literals alone.

    A block comment becomes a single space, or its newlines when it spans
    lines, so neighbouring tokens never fuse.
    """
    out = []
    for tok in lex(text):
        if tok.kind == LINE_COMMENT:
            continue
        if tok.kind == BLOCK_COMMENT:
            newlines = tok.text.count("\n")
            out.append("\n" * newlines if newlines else " ")
            continue
        out.append(tok.text)
    return "".join(out)


# -- markers ----------------------------------------------------------------

_LITERAL_PIECE_RE = re.compile(
    r"\\(?:x[0-9A-Fa-f]+|[0-7]{1,3}|u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8}|.)|\w+|.",
    re.DOTALL,
)
_SIMPLE_ESCAPES = {"a": 7, "b": 8, "f": 12, "n": 10, "r": 13, "t": 9, "v": 11}


@dataclass
class _Renamer:
    taken: set[str]
    functions: set[str]
    mapping: dict[str, str] = field(default_factory=dict)
    n_func: int = 0
    n_var: int = 0

    def name_for(self, ident: str) -> str:
        if ident in self.mapping:
            return self.mapping[ident]
        while True:
            if ident in self.functions:
                self.n_func += 1
                candidate = f"func{self.n_func}"
            else:
                self.n_var += 1
                candidate = f"var{self.n_var}"
            if candidate not in self.taken:
                break
        self.mapping[ident] = candidate
        return candidate


def _scrub_literal(text: str, renamer: _Renamer) -> str:
    if not has_marker(text):
        return text
    pieces = [m.group(0) for m in _LITERAL_PIECE_RE.finditer(text)]
    out = []
    for piece in pieces:
        if piece[0] == "\\" and len(piece) > 1:
            out.append(piece)
        elif has_marker(piece):
            out.append(renamer.name_for(piece))
        else:
            out.append(piece)
    scrubbed = "".join(out)
    if not has_marker(scrubbed):
        return scrubbed
    # A marker can still straddle an escape ("\bad" is backspace + "ad");
    # spell such escapes in octal, which never contains a letter.
    out = []
    for piece in pieces:
        if piece[0] == "\\" and len(piece) > 1:
            esc = piece[1:]
            if esc in _SIMPLE_ESCAPES:
                piece = f"\\{_SIMPLE_ESCAPES[esc]:03o}"
            elif esc[0] == "x":
                piece = f"\\{int(esc[1:], 16) & 0xFF:03o}"
            elif esc[0] in "uU":
                piece = f"\\{int(esc[1:], 16) & 0xFF:03o}"
        elif has_marker(piece):
            piece = renamer.name_for(piece)
        out.append(piece)
    return "".join(out)


def _scrub_number(text: str, renamer: _Renamer) -> str:
    m = re.fullmatch(r"0[xX]([0-9A-Fa-f']+)([uUlLzZ]*)", text)
    if m is not None:
        return str(int(m.group(1).replace("'", ""), 16)) + m.group(2)
    return renamer.name_for(text)


def scrub_markers(text: str) -> str:
    """Rename every identifier containing "good"/"bad" (any case).

    Identifiers used as functions become ``func1, func2, ...`` and all
    others ``var1, var2, ...``, numbered by first appearance. Marker words
    inside string and character literals are renamed through the same
    mapping so nothing of the label survives.
    """
    tokens = lex(text)
    significant = [i for i, t in enumerate(tokens) if t.kind not in (WS, SPLICE, LINE_COMMENT, BLOCK_COMMENT)]
    functions: set[str] = set()
    taken: set[str] = set()
    for pos, i in enumerate(significant):
        tok = tokens[i]
        if tok.kind != IDENT:
            continue
        name = tok.value
        taken.add(name)
        if pos + 1 < len(significant) and tokens[significant[pos + 1]].text == "(":
            functions.add(name)
    renamer = _Renamer(taken=taken, functions=functions)
    out = []
    for tok in tokens:
        if tok.kind == IDENT and has_marker(tok.value):
            out.append(renamer.name_for(tok.value))
        elif tok.kind in (STRING, CHAR, LINE_COMMENT, BLOCK_COMMENT):
            out.append(_scrub_literal(tok.text, renamer))
        elif tok.kind == NUMBER and has_marker(tok.value):
            out.append(_scrub_number(tok.value, renamer))
        else:
            out.append(tok.text)
    return "".join(out)


# -- layout -----------------------------------------------------------------


@dataclass
class _Item:
    tok: Token
    space: bool
    newlines: int
    directive: bool = False
    block: bool = False
    decl_body: bool = False
    after_do: bool = False
    removed: bool = False


_BLOCK_OPENERS = frozenset({")", ";", "{", "}", ":", "else", "do", "try"})
_NOT_DECL_NAMES = frozenset({"else", "do", "try", "return"})


def _tidy_token(tok: Token) -> str:
    if tok.kind in (IDENT, NUMBER):
        return tok.value
    if tok.kind in (STRING, CHAR):
        return tok.text.replace("\t", "\\t")
    if tok.kind in (BLOCK_COMMENT, LINE_COMMENT):
        return "\n".join(line.rstrip() for line in tok.text.expandtabs(4).split("\n"))
    return tok.text


def _items(text: str) -> list[_Item]:
    items: list[_Item] = []
    space = False
    newlines = 0
    for tok in lex(text):
        if tok.kind == WS:
            space = True
            newlines += tok.text.count("\n")
        elif tok.kind == SPLICE:
            continue
        else:
            items.append(_Item(tok, space or newlines > 0, newlines))
            space = False
            newlines = 0
    # every "#" outside a directive opens one that runs to the end of its line
    in_directive = False
    for it in items:
        if in_directive and it.newlines == 0:
            it.directive = True
            continue
        in_directive = it.tok.kind == PUNCT and it.tok.text == "#"
        it.directive = in_directive
    return items


def _classify_braces(items: list[_Item]) -> None:
    stack: list[_Item] = []
    parens = 0
    prev: _Item | None = None
    for it in items:
        if it.directive:
            prev = None
            continue
        t = it.tok.text
        if it.tok.kind == PUNCT:
            if t in "([":
                parens += 1
            elif t in ")]":
                parens = max(parens - 1, 0)
            elif t == "{":
                enclosing_inline = any(not s.block for s in stack)
                is_block = (
                    parens == 0
                    and not enclosing_inline
                    and (
                        prev is None
                        or prev.tok.text in _BLOCK_OPENERS
                        or prev.tok.kind == STRING
                        or (prev.tok.kind == IDENT and prev.tok.text != "return")
                    )
                )
                it.block = is_block
                if is_block and prev is not None and prev.tok.kind == IDENT:
                    it.decl_body = prev.tok.text not in _NOT_DECL_NAMES
                    it.after_do = prev.tok.text == "do"
                stack.append(it)
            elif t == "}":
                opener = stack.pop() if stack else None
                if opener is not None:
                    it.block = opener.block
                    it.decl_body = opener.decl_body
                    it.after_do = opener.after_do
        prev = it


def _flatten_redundant_blocks(items: list[_Item]) -> None:
    match: dict[int, int] = {}
    stack: list[int] = []
    for i, it in enumerate(items):
        if it.tok.kind != PUNCT or it.directive:
            continue
        if it.tok.text == "{":
            stack.append(i)
        elif it.tok.text == "}" and stack:
            match[stack.pop()] = i
    for i in sorted(match):
        outer = items[i]
        if not outer.block or outer.removed:
            continue
        p, q = i + 1, match[i] - 1
        while p < q and items[p].block and items[p].tok.text == "{" and match.get(p) == q:
            items[p].removed = True
            items[q].removed = True
            p += 1
            q -= 1


def normalize_format(text: str) -> str:
    """Re-emit source in one canonical layout.

    Line endings become LF, tabs become spaces, each statement gets its own
    line, block braces sit on their own lines (Allman style) with four-space
    indentation, and at most one blank line is kept between statements.
    Spacing inside a line follows the source: one space where there was any
    whitespace, none otherwise. A block whose only content is another bare
    block is collapsed into one. The function is idempotent.
    """
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    items = _items(text)
    _classify_braces(items)
    _flatten_redundant_blocks(items)
    items = [it for it in items if not it.removed]

    lines: list[str] = []
    buf: list[str] = []
    buf_depth = 0
    depth = 0
    parens = 0
    inline_braces = 0
    attach_after_close = None  # the closing brace item a following token may join

    def flush() -> None:
        nonlocal buf
        if buf:
            lines.append(INDENT * buf_depth + "".join(buf))
            buf = []

    def start(it: _Item, at_depth: int, allow_blank: bool = True) -> None:
        nonlocal buf_depth
        flush()
        if allow_blank and it.newlines >= 2 and lines and lines[-1].strip() not in ("", "{"):
            lines.append("")
        buf_depth = at_depth

    def put(it: _Item) -> None:
        if not buf:
            start(it, depth)
            buf.append(_tidy_token(it.tok))
        else:
            buf.append((" " if it.space else "") + _tidy_token(it.tok))

    i = 0
    n = len(items)
    while i < n:
        it = items[i]
        t = it.tok.text
        kind = it.tok.kind

        if attach_after_close is not None:
            closer = attach_after_close
            attach_after_close = None
            joins = t in (";", ",", ")") or (
                closer.after_do and t == "while"
            ) or (closer.decl_body and it.newlines == 0 and t != "}" and not (kind == PUNCT and t == "{"))
            if not joins:
                flush()
            elif closer.decl_body and t not in (";", ",", ")"):
                # keep the declarator list on the closing-brace line
                attach_after_close = closer

        if it.directive:
            start(it, 0)
            buf.append("#")
            i += 1
            while i < n and items[i].directive and items[i].newlines == 0:
                nxt = items[i]
                buf.append((" " if nxt.space else "") + _tidy_token(nxt.tok))
                i += 1
            flush()
            continue

        if kind == PUNCT and t == "{" and it.block:
            start(it, depth, allow_blank=False)
            buf.append("{")
            flush()
            depth += 1
        elif kind == PUNCT and t == "}" and it.block:
            depth = max(depth - 1, 0)
            start(it, depth, allow_blank=False)
            buf.append("}")
            attach_after_close = it
        elif kind == PUNCT and t == "{":
            inline_braces += 1
            put(it)
        elif kind == PUNCT and t == "}":
            inline_braces = max(inline_braces - 1, 0)
            put(it)
        elif kind == LINE_COMMENT:
            put(it)
            flush()
        else:
            put(it)
            if kind == PUNCT:
                if t in ("(", "["):
                    parens += 1
                elif t in (")", "]"):
                    parens = max(parens - 1, 0)
                elif t == ";" and parens == 0 and inline_braces == 0:
                    flush()
                elif t == ":" and parens == 0 and inline_braces == 0 and _is_label_line(buf):
                    flush()
        i += 1
    flush()
    return "\n".join(line.rstrip() for line in lines).strip("\n")


def _is_label_line(buf: list[str]) -> bool:
    # buf ends with ":"; a label line is "case ...:", "default:" or "name:"
    head = buf[0].strip()
    if head in ("case", "default"):
        return True
    return len(buf) == 2 and re.fullmatch(r"[A-Za-z_]\w*", head) is not None


def clean_source(text: str) -> str:
    """Full cleaning pipeline: comments, then markers, then layout."""
    return normalize_format(scrub_markers(strip_comments(text)))
