"""A small, lossless C/C++ lexer.

``lex`` splits source text into tokens whose texts concatenate back to the
input exactly. It knows just enough of the language to tell comments apart
from string and character literals, which is all the preprocessing passes
need.
"""

from __future__ import annotations

import re
from typing import NamedTuple

WS = "ws"
SPLICE = "splice"
LINE_COMMENT = "line_comment"
BLOCK_COMMENT = "block_comment"
STRING = "string"
CHAR = "char"
IDENT = "ident"
NUMBER = "number"
PUNCT = "punct"

LITERAL_PREFIXES = frozenset({"L", "u", "U", "u8"})
RAW_PREFIXES = frozenset({"R", "LR", "uR", "UR", "u8R"})

_PUNCTUATORS = sorted(
    [
        "<<=", ">>=", "...", "->*", "<=>",
        "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
        "*=", "/=", "%=", "+=", "-=", "&=", "^=", "|=", "##", "::", ".*",
    ],
    key=len,
    reverse=True,
)

_NUMBER_RE = re.compile(r"\.?[0-9](?:[eEpP][+-]|[0-9A-Za-z_.]|'(?=[0-9A-Za-z_])|\\\n)*")
_RAW_DELIM_RE = re.compile(r'[^\s()\\"]{0,16}\(')


class Token(NamedTuple):
    kind: str
    text: str

    @property
    def value(self) -> str:
        """Token text with line splices removed (identifiers and numbers)."""
        return self.text.replace("\\\n", "")


def _is_ident_start(ch: str) -> bool:
    return ch == "_" or ch == "$" or ch.isalpha()


def _is_ident_char(ch: str) -> bool:
    return ch == "_" or ch == "$" or ch.isalnum()


def _scan_quoted(text: str, i: int, quote: str) -> int:
    """Return the end index of a quoted literal whose opening quote is at i.

    An unescaped newline terminates an unterminated literal without being
    consumed.
    """
    n = len(text)
    j = i + 1
    while j < n:
        c = text[j]
        if c == "\\":
            j += 2
        elif c == quote:
            return j + 1
        elif c == "\n":
            return j
        else:
            j += 1
    return n


def _scan_raw(text: str, i: int) -> int | None:
    # i points at the opening quote of R"delim( ... )delim"
    m = _RAW_DELIM_RE.match(text, i + 1)
    if m is None:
        return None
    delim = m.group(0)[:-1]
    end = text.find(")" + delim + '"', m.end())
    if end < 0:
        return len(text)
    return end + len(delim) + 2


def _scan_ident(text: str, i: int) -> int:
    n = len(text)
    j = i + 1
    while j < n:
        if _is_ident_char(text[j]):
            j += 1
        elif text.startswith("\\\n", j) and j + 2 < n and _is_ident_char(text[j + 2]):
            j += 2
        else:
            break
    return j


def lex(text: str) -> list[Token]:
    tokens: list[Token] = []
    n = len(text)
    i = 0
    while i < n:
        ch = text[i]
        if ch == "\\" and text.startswith("\\\n", i):
            tokens.append(Token(SPLICE, "\\\n"))
            i += 2
            continue
        if ch.isspace():
            j = i + 1
            while j < n and text[j].isspace():
                j += 1
            tokens.append(Token(WS, text[i:j]))
            i = j
            continue
        if ch == "/" and i + 1 < n:
            nxt = text[i + 1]
            if nxt == "/":
                j = i + 2
                while j < n:
                    if text.startswith("\\\n", j):
                        j += 2
                    elif text[j] == "\n":
                        break
                    else:
                        j += 1
                tokens.append(Token(LINE_COMMENT, text[i:j]))
                i = j
                continue
            if nxt == "*":
                end = text.find("*/", i + 2)
                j = n if end < 0 else end + 2
                tokens.append(Token(BLOCK_COMMENT, text[i:j]))
                i = j
                continue
        if ch == '"':
            j = _scan_quoted(text, i, '"')
            tokens.append(Token(STRING, text[i:j]))
            i = j
            continue
        if ch == "'":
            j = _scan_quoted(text, i, "'")
            tokens.append(Token(CHAR, text[i:j]))
            i = j
            continue
        if _is_ident_start(ch):
            j = _scan_ident(text, i)
            word = text[i:j]
            if j < n and text[j] in "\"'":
                if text[j] == '"' and word in RAW_PREFIXES:
                    end = _scan_raw(text, j)
                    if end is not None:
                        tokens.append(Token(STRING, text[i:end]))
                        i = end
                        continue
                if word in LITERAL_PREFIXES:
                    end = _scan_quoted(text, j, text[j])
                    tokens.append(Token(STRING if text[j] == '"' else CHAR, text[i:end]))
                    i = end
                    continue
            tokens.append(Token(IDENT, word))
            i = j
            continue
        m = _NUMBER_RE.match(text, i)
        if m is not None:
            tokens.append(Token(NUMBER, m.group(0)))
            i = m.end()
            continue
        for p in _PUNCTUATORS:
            if text.startswith(p, i):
                tokens.append(Token(PUNCT, p))
                i += len(p)
                break
        else:
            tokens.append(Token(PUNCT, ch))
            i += 1
    return tokens
