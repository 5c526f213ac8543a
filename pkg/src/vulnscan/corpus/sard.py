"""SARD-style corpus ingestion: scanning, the label space, preprocessing."""

from __future__ import annotations

import enum
import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from vulnscan.corpus.clean import clean_source

log = logging.getLogger(__name__)

N_CLASSES = 124
NONVULN = "NONVULN"
SOURCE_SUFFIXES = (".c", ".cpp", ".h")

_CWE_RE = re.compile(r"^CWE[-_]?(\d+)", re.IGNORECASE)
_MARKER_TOKEN_RE = re.compile(r"(?:^|(?<=[_\-.]))(bad|good)", re.IGNORECASE)


class Variant(enum.Enum):
    VULNERABLE = "vulnerable"
    PATCHED = "patched"


class Split(enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class UnknownTagError(KeyError):
    pass


@dataclass(frozen=True)
class SourceFile:
    path: Path
    raw_text: str
    cwe_tag: str | None
    variant: Variant
    pair_id: str


@dataclass(frozen=True)
class CleanRecord:
    id: str
    text: str
    label: int
    split: Split = Split.TRAIN
    pair_id: str = ""


class ScanResult(list):
    """The scanned ``SourceFile`` list, with counts of what was skipped."""

    def __init__(self, files=(), unmarked: int = 0, undecodable: int = 0):
        super().__init__(files)
        self.unmarked = unmarked
        self.undecodable = undecodable

    @property
    def skipped(self) -> int:
        return self.unmarked + self.undecodable


def parse_cwe_tag(path: Path) -> str | None:
    """Return "CWE<digits>" from the file name or, failing that, a parent directory."""
    for part in [path.name, *reversed(path.parent.parts)]:
        m = _CWE_RE.match(part)
        if m:
            return f"CWE{int(m.group(1))}"
    return None


def parse_variant(stem: str) -> tuple[Variant, str] | None:
    """Find the single good/bad marker in a file stem.

    Returns the variant and the stem with the marker word replaced by "*",
    which is what pairs a vulnerable file with its fix. Stems with no marker
    or with both kinds are rejected.
    """
    hits = list(_MARKER_TOKEN_RE.finditer(stem))
    kinds = {m.group(1).lower() for m in hits}
    if len(kinds) != 1:
        return None
    m = hits[-1]
    variant = Variant.VULNERABLE if kinds == {"bad"} else Variant.PATCHED
    return variant, stem[: m.start()] + "*" + stem[m.end():]


def scan_sard(root: str | os.PathLike) -> ScanResult:
    root = Path(root)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise OSError(f"cannot read corpus directory: {root}")
    result = ScanResult()
    paths = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in SOURCE_SUFFIXES)
    for path in paths:
        parsed = parse_variant(path.stem)
        tag = parse_cwe_tag(path.relative_to(root))
        if parsed is None or (parsed[0] is Variant.VULNERABLE and tag is None):
            result.unmarked += 1
            continue
        try:
            raw = path.read_bytes().decode("utf-8")
        except (UnicodeDecodeError, OSError) as exc:
            log.warning("skipping %s: %s", path, exc)
            result.undecodable += 1
            continue
        variant, pair_stem = parsed
        rel_dir = path.relative_to(root).parent.as_posix()
        pair_id = pair_stem if rel_dir == "." else f"{rel_dir}/{pair_stem}"
        result.append(SourceFile(path, raw, tag, variant, pair_id))
    if result.skipped:
        log.warning("skipped %d unmarked and %d undecodable files", result.unmarked, result.undecodable)
    return result


class LabelMap:
    """Bijection between CWE tags (plus NONVULN) and class indices 0..123.

    NONVULN is 0; tags are sorted lexicographically and numbered from 1.
    Unused indices are held by placeholder tags ``UNUSED<k>`` so the label
    space always has exactly 124 entries.
    """

    def __init__(self, tags: list[str]):
        if len(tags) != N_CLASSES or tags[0] != NONVULN:
            raise ValueError(f"label map needs {N_CLASSES} entries starting with {NONVULN}")
        if len(set(tags)) != len(tags):
            raise ValueError("duplicate tags in label map")
        self.tags = list(tags)
        self._index = {t: i for i, t in enumerate(tags)}

    @classmethod
    def from_tags(cls, observed: Iterable[str]) -> "LabelMap":
        cwes = sorted(set(observed) - {NONVULN})
        if len(cwes) > N_CLASSES - 1:
            raise ValueError(f"{len(cwes)} CWE tags exceed the {N_CLASSES - 1} available labels")
        filler = [f"UNUSED{k}" for k in range(len(cwes) + 1, N_CLASSES)]
        return cls([NONVULN, *cwes, *filler])

    @classmethod
    def from_files(cls, files: Iterable[SourceFile]) -> "LabelMap":
        return cls.from_tags(f.cwe_tag for f in files if f.variant is Variant.VULNERABLE)

    def __len__(self) -> int:
        return len(self.tags)

    def __getitem__(self, tag: str) -> int:
        try:
            return self._index[tag]
        except KeyError:
            raise UnknownTagError(f"unknown CWE tag {tag!r}") from None

    def __contains__(self, tag: str) -> bool:
        return tag in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelMap) and self.tags == other.tags

    def tag(self, index: int) -> str:
        return self.tags[index]

    def write(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, tag in enumerate(self.tags):
                fh.write(f"{tag}\t{i}\n")

    @classmethod
    def read(cls, path: str | os.PathLike) -> "LabelMap":
        tags: dict[int, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    tag, idx = line.split("\t")
                    tags[int(idx)] = tag
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: malformed label-map line {line!r}") from None
        if sorted(tags) != list(range(N_CLASSES)):
            raise ValueError(f"{path}: label map must cover indices 0..{N_CLASSES - 1}")
        return cls([tags[i] for i in range(N_CLASSES)])


def preprocess(file: SourceFile, labels: LabelMap) -> CleanRecord:
    if file.variant is Variant.VULNERABLE:
        label = labels[file.cwe_tag]
        suffix = "vuln"
    else:
        label = labels[NONVULN]
        suffix = "fixed"
    return CleanRecord(
        id=f"{file.pair_id}#{suffix}",
        text=clean_source(file.raw_text),
        label=label,
        pair_id=file.pair_id,
    )
