"""Generated SARD-style corpora with planted, learnable vulnerability patterns.

Each pair is one vulnerable and one patched C file that share the same
random filler code and differ only in the planted pattern:

* CWE121: ``strcpy`` into a too-small stack buffer vs a bounded ``strncpy``.
* CWE190: unchecked ``data + 1`` vs a guard against ``INT_MAX``.
* CWE690: ``malloc`` result used without a NULL check vs a checked one.

File and function names follow the SARD bad/good convention, so the
marker scrubber gets exercised.
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass
from pathlib import Path

from vulnscan.corpus import CleanRecord, LabelMap, clean_source

CWES = {
    "CWE121": "CWE121_Stack_Based_Buffer_Overflow",
    "CWE190": "CWE190_Integer_Overflow",
    "CWE690": "CWE690_NULL_Deref_From_Return",
}

WORDS = (
    "count total index offset length width height limit step level score "
    "value result amount number chunk block size flag state mode depth scale "
    "factor weight price rate ratio slot entry item node key head tail left right "
    "start stop first last next prev temp accum sum delta span range"
).split()

PRINT_TEXT = ("processing input", "done", "checking bounds", "entering loop", "value ready", "skipping")


@dataclass(frozen=True)
class Pair:
    cwe: str
    stem: str  # file stem with "{}" where the bad/good marker goes
    vulnerable: str
    patched: str


class _Filler:
    """Random but valid-looking C statements over a handful of int locals."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        # camelCase compounds keep identifier diversity close to real test suites
        names: list[str] = []
        while len(names) < 4:
            a, b = rng.sample(WORDS, 2)
            if a + b.capitalize() not in names:
                names.append(a + b.capitalize())
        self.names = names
        self.decls = [f"int {n} = {rng.randint(0, 99)};" for n in self.names]

    def statement(self) -> list[str]:
        r = self.rng
        a, b = r.sample(self.names, 2)
        n = r.randint(2, 999)
        kind = r.randrange(7)
        if kind == 0:
            return [f"{a} = {b} * {n};"]
        if kind == 1:
            return [f"{a} = ({a} + {b}) % {n};"]
        if kind == 2:
            return [f"printIntLine({a});"]
        if kind == 3:
            return [f"for ({a} = 0; {a} < {n}; {a}++)", "{", f"{b} += {a};", "}"]
        if kind == 4:
            return [f"if ({a} > {n})", "{", f'printLine("{r.choice(PRINT_TEXT)}");', "}"]
        if kind == 5:
            return [f"while ({a} > {n})", "{", f"{a} -= {r.randint(1, 9)};", "}"]
        return [f"{a} = {b} - {n};", f"{b} = {a} / {r.randint(2, 9)};"]

    def block(self, lo: int, hi: int) -> list[str]:
        out = []
        for _ in range(self.rng.randint(lo, hi)):
            out += self.statement()
        return out


def _core(cwe: str, rng: random.Random, patched: bool) -> list[str]:
    v1, v2 = rng.sample(["data", "buffer", "dest", "source", "input", "line", "text", "payload"], 2)
    if cwe == "CWE121":
        small = rng.choice([10, 16, 20, 32])
        big = small * rng.randint(2, 5)
        lines = [
            f"char {v1}[{small}];",
            f"char {v2}[{big}];",
            f"memset({v2}, 'C', {big} - 1);",
            f"{v2}[{big} - 1] = '\\0';",
        ]
        if patched:
            lines += [f"strncpy({v1}, {v2}, sizeof({v1}) - 1);", f"{v1}[{small} - 1] = '\\0';"]
        else:
            lines += [f"strcpy({v1}, {v2});"]
        return lines + [f"printLine({v1});"]
    if cwe == "CWE190":
        lines = [f"int {v1} = RAND32();"]
        if patched:
            return lines + [
                f"if ({v1} < INT_MAX)",
                "{",
                f"int {v2} = {v1} + 1;",
                f"printIntLine({v2});",
                "}",
                "else",
                "{",
                'printLine("input value is too large to perform arithmetic safely.");',
                "}",
            ]
        return lines + [f"int {v2} = {v1} + 1;", f"printIntLine({v2});"]
    n = rng.choice([20, 50, 100, 256])
    lines = [f"char * {v1} = (char *)malloc({n} * sizeof(char));"]
    if patched:
        lines += [f"if ({v1} == NULL)", "{", "exit(-1);", "}"]
    return lines + [f'strcpy({v1}, "{rng.choice(PRINT_TEXT)}");', f"printLine({v1});", f"free({v1});"]


def _render(func: str, helper: str | None, body: list[str], helper_body: list[str]) -> str:
    out = ['#include "std_testcase.h"', "", "#include <wchar.h>", ""]
    if helper:
        out += [f"static void {helper}(int arg)", "{"] + helper_body + ["}", ""]
    out += [f"void {func}()", "{"] + body + ["}"]
    return "\n".join(out) + "\n"


def make_pair(cwe: str, index: int, rng: random.Random) -> Pair:
    """One vulnerable/patched pair; both files share every random choice but the marker."""
    stem = f"{CWES[cwe]}__s{index:03d}_{{}}"
    filler = _Filler(rng)
    pre, post = filler.block(1, 5), filler.block(1, 5)
    use_helper = rng.random() < 0.5
    helper_body = filler.block(1, 3) if use_helper else []
    core_state = rng.getstate()
    texts = []
    for marker, patched in (("bad", False), ("good", True)):
        rng.setstate(core_state)
        core = _core(cwe, rng, patched)
        func = stem.format(marker)
        helper = f"{marker}Helper{index}" if use_helper else None
        call = [f"{helper}({filler.names[0]});"] if helper else []
        texts.append(_render(func, helper, filler.decls + pre + core + call + post, helper_body))
    return Pair(cwe, stem, texts[0], texts[1])


def generate_pairs(n_pairs: int = 200, seed: int = 0) -> list[Pair]:
    """``n_pairs`` pairs, cycling through the CWEs so classes stay balanced."""
    rng = random.Random(seed)
    cwes = sorted(CWES)
    return [make_pair(cwes[k % len(cwes)], k, rng) for k in range(n_pairs)]


def write_corpus(root: str | os.PathLike, n_pairs: int = 200, seed: int = 0) -> list[Path]:
    """Write a SARD-like tree: <root>/<CWE dir>/<stem with bad|good>.c"""
    root = Path(root)
    written = []
    for pair in generate_pairs(n_pairs, seed):
        d = root / CWES[pair.cwe]
        d.mkdir(parents=True, exist_ok=True)
        for marker, text in (("bad", pair.vulnerable), ("good", pair.patched)):
            path = d / (pair.stem.format(marker) + ".c")
            path.write_text(text, encoding="utf-8", newline="\n")
            written.append(path)
    return written


def labels() -> LabelMap:
    return LabelMap.from_tags(CWES)


def toy_records(per_class: int = 5, seed: int = 0) -> list[CleanRecord]:
    """A small balanced set: ``per_class`` preprocessed files of NONVULN and of each CWE."""
    lm = labels()
    pairs = generate_pairs(per_class * len(CWES), seed)
    records = []
    for pair in pairs:
        pid = pair.stem.format("*")
        records.append(CleanRecord(f"{pid}#vuln", clean_source(pair.vulnerable), lm[pair.cwe], pair_id=pid))
    # patched files all share class 0, so one per pair would unbalance the set
    for pair in pairs[:per_class]:
        pid = pair.stem.format("*")
        records.append(CleanRecord(f"{pid}#fixed", clean_source(pair.patched), 0, pair_id=pid))
    return records


def main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(prog="python -m vulnscan.synthetic", description="Write a synthetic SARD-style corpus.")
    parser.add_argument("out", help="directory to create")
    parser.add_argument("--pairs", type=int, default=200, help="vulnerable/patched pairs (default 200)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    paths = write_corpus(args.out, args.pairs, args.seed)
    print(f"wrote {len(paths)} files under {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
