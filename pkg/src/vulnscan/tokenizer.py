"""Syntax-aware pre-tokenization and a byte-level BPE subword vocabulary.

Words are runs of word characters; every other non-space character is a
word of its own. Each word is encoded as UTF-8 bytes, prefixed with a space
byte when whitespace preceded it in the text, so that decoding restores the
text up to whitespace normalization (``" ".join(text.split())``).
"""

from __future__ import annotations

import heapq
import os
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

PAD, UNK, CLS, SEP, MASK = 0, 1, 2, 3, 4
SPECIAL_NAMES = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
N_SPECIAL = len(SPECIAL_NAMES)
BASE_SIZE = N_SPECIAL + 256
MAX_VOCAB = 32768
DEFAULT_MAX_SIZE = 32000

HEADER = "vulnscan-vocab v1"
MERGES_SENTINEL = "#merges"

_WORD_RE = re.compile(r"\w+|[^\w\s]")


def pretokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text)


def _pieces(text: str) -> list[bytes]:
    pieces = []
    for m in _WORD_RE.finditer(text):
        word = m.group(0).encode("utf-8")
        if pieces and text[m.start() - 1].isspace():
            word = b" " + word
        pieces.append(word)
    return pieces


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    mask: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Segment:
    ids: tuple[int, ...]
    mask: tuple[int, ...]


class Vocabulary:
    """Special tokens at ids 0-4, the 256 single bytes, then merged tokens."""

    def __init__(self, merges: Sequence[tuple[bytes, bytes]] = ()):
        self.tokens: list[bytes | None] = [None] * N_SPECIAL + [bytes([b]) for b in range(256)]
        self.index: dict[bytes, int] = {t: i for i, t in enumerate(self.tokens) if t is not None}
        self.merges: list[tuple[bytes, bytes]] = []
        self.ranks: dict[tuple[bytes, bytes], int] = {}
        self._cache: dict[bytes, tuple[int, ...]] = {}
        for left, right in merges:
            self.add_merge(left, right)

    def add_merge(self, left: bytes, right: bytes) -> None:
        self.ranks[(left, right)] = len(self.merges)
        self.merges.append((left, right))
        merged = left + right
        if merged not in self.index:
            self.index[merged] = len(self.tokens)
            self.tokens.append(merged)
        self._cache.clear()

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def specials(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(SPECIAL_NAMES)}

    def token_text(self, idx: int) -> str:
        tok = self.tokens[idx]
        if tok is None:
            return SPECIAL_NAMES[idx]
        return tok.decode("utf-8", errors="backslashreplace")

    def encode_piece(self, piece: bytes) -> tuple[int, ...]:
        cached = self._cache.get(piece)
        if cached is not None:
            return cached
        parts = [bytes([b]) for b in piece]
        ranks = self.ranks
        while len(parts) > 1:
            best = None
            best_rank = None
            for j in range(len(parts) - 1):
                r = ranks.get((parts[j], parts[j + 1]))
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = j, r
            if best is None:
                break
            pair = (parts[best], parts[best + 1])
            merged = []
            j = 0
            while j < len(parts):
                if j < len(parts) - 1 and (parts[j], parts[j + 1]) == pair:
                    merged.append(pair[0] + pair[1])
                    j += 2
                else:
                    merged.append(parts[j])
                    j += 1
            parts = merged
        ids = tuple(self.index.get(p, UNK) for p in parts)
        self._cache[piece] = ids
        return ids

    # -- file format ---------------------------------------------------------

    def dumps(self) -> str:
        lines = [f"{HEADER} {len(self)}"]
        for i in range(len(self)):
            tok = self.tokens[i]
            lines.append(SPECIAL_NAMES[i] if tok is None else _escape(tok))
        lines.append(MERGES_SENTINEL)
        lines.extend(f"{_escape(a)}\t{_escape(b)}" for a, b in self.merges)
        return "\n".join(lines) + "\n"

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Vocabulary":
        lines = text.split("\n")
        head = lines[0].split(" ")
        if " ".join(head[:2]) != HEADER or len(head) != 3:
            raise ValueError("not a vulnscan vocabulary file")
        size = int(head[2])
        if lines[size + 1] != MERGES_SENTINEL:
            raise ValueError("vocabulary file: merge section missing")
        merges = []
        for line in lines[size + 2:]:
            if not line:
                continue
            a, b = line.split("\t")
            merges.append((_unescape(a), _unescape(b)))
        vocab = cls(merges)
        expected = [None if i < N_SPECIAL else _unescape(t) for i, t in enumerate(lines[1: size + 1])]
        if vocab.tokens != expected:
            raise ValueError("vocabulary file: token list does not match its merges")
        return vocab

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Vocabulary":
        with open(path, encoding="ascii") as fh:
            return cls.loads(fh.read())


def _escape(tok: bytes) -> str:
    out = []
    for b in tok:
        if 0x21 <= b <= 0x7E and b != 0x5C:
            out.append(chr(b))
        else:
            out.append(f"\\x{b:02x}")
    return "".join(out)


def _unescape(s: str) -> bytes:
    out = bytearray()
    i = 0
    while i < len(s):
        if s[i] == "\\":
            out.append(int(s[i + 2: i + 4], 16))
            i += 4
        else:
            out.append(ord(s[i]))
            i += 1
    return bytes(out)


def build_vocab(corpus: Iterable[str], max_size: int = DEFAULT_MAX_SIZE) -> Vocabulary:
    """Learn byte-pair merges over the pretokenized corpus.

    Repeatedly merges the most frequent adjacent pair (ties go to the
    lexicographically smallest pair) until ``max_size`` tokens exist or no
    pair occurs more than once.
    """
    if max_size < BASE_SIZE:
        raise ValueError(f"max_size must be at least {BASE_SIZE}")
    max_size = min(max_size, MAX_VOCAB)
    freq: Counter[bytes] = Counter()
    n_texts = 0
    for text in corpus:
        n_texts += 1
        freq.update(_pieces(text))
    if n_texts == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")

    words = [[bytes([b]) for b in piece] for piece in freq]
    counts = list(freq.values())
    pair_counts: Counter[tuple[bytes, bytes]] = Counter()
    where: dict[tuple[bytes, bytes], set[int]] = defaultdict(set)
    for w, (parts, c) in enumerate(zip(words, counts)):
        for pair in zip(parts, parts[1:]):
            pair_counts[pair] += c
            where[pair].add(w)
    # max-heap on (count, then smallest pair); stale entries are skipped on pop
    heap = [(-c, pair) for pair, c in pair_counts.items()]
    heapq.heapify(heap)

    vocab = Vocabulary()
    while len(vocab) < max_size and heap:
        neg, best = heapq.heappop(heap)
        if pair_counts.get(best, 0) != -neg:
            continue
        if -neg < 2:
            break
        vocab.add_merge(*best)
        merged_tok = best[0] + best[1]
        touched: set[tuple[bytes, bytes]] = set()
        for w in sorted(where.pop(best, ())):
            parts = words[w]
            c = counts[w]
            for pair in zip(parts, parts[1:]):
                pair_counts[pair] -= c
                touched.add(pair)
            new_parts = []
            j = 0
            while j < len(parts):
                if j < len(parts) - 1 and parts[j] == best[0] and parts[j + 1] == best[1]:
                    new_parts.append(merged_tok)
                    j += 2
                else:
                    new_parts.append(parts[j])
                    j += 1
            words[w] = new_parts
            for pair in zip(new_parts, new_parts[1:]):
                pair_counts[pair] += c
                where[pair].add(w)
                touched.add(pair)
        for pair in touched:
            c = pair_counts[pair]
            if c <= 0:
                del pair_counts[pair]
            elif pair != best:
                heapq.heappush(heap, (-c, pair))
        pair_counts.pop(best, None)
    return vocab


def encode(text: str, vocab: Vocabulary) -> TokenSequence:
    ids: list[int] = []
    for piece in _pieces(text):
        ids.extend(vocab.encode_piece(piece))
    return TokenSequence(tuple(ids), (1,) * len(ids))


def decode(ids: Iterable[int], vocab: Vocabulary) -> str:
    n = len(vocab)
    out = bytearray()
    for i in ids:
        if not 0 <= i < n:
            raise ValueError(f"token id {i} out of range for a vocabulary of {n}")
        tok = vocab.tokens[i]
        if tok is not None:
            out += tok
    return out.decode("utf-8", errors="replace").lstrip(" ")


def segment(seq: TokenSequence, seg_len: int = 256) -> list[Segment]:
    """Cut ids into CLS-prefixed windows of ``seg_len``, padding the last one.

    Always returns at least one segment, so an empty sequence becomes a
    lone CLS followed by padding.
    """
    if seg_len < 2:
        raise ValueError("seg_len must be at least 2")
    body = seg_len - 1
    ids = list(seq.ids)
    segments = []
    for start in range(0, max(len(ids), 1), body):
        chunk = ids[start: start + body]
        pad = body - len(chunk)
        segments.append(
            Segment(
                ids=tuple([CLS, *chunk] + [PAD] * pad),
                mask=tuple([1] * (1 + len(chunk)) + [0] * pad),
            )
        )
    return segments


def count_unique_tokens(corpus: Iterable[str], vocab: Vocabulary | None = None) -> int:
    """Whole-word types across the corpus, or the subword vocabulary size if given."""
    if vocab is not None:
        return len(vocab)
    seen: set[str] = set()
    for text in corpus:
        seen.update(pretokenize(text))
    return len(seen)
