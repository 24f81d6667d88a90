"""The bundled example corpus.

Each ``*.qunity`` file under ``qunity/corpus`` holds a set of definitions and a
``main`` entry.  :data:`ENTRIES` names the instantiations exercised by the
test suite and by ``qunity verify --corpus``: every example program at the
sizes that fit on a desk, plus the classical sublanguage suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .expand import expand_text
from .parser import SourceProgram, parse
from .typecheck import Derivation, infer

__all__ = ["CorpusEntry", "ENTRIES", "corpus_files", "read_source", "load", "entry", "entries"]


def corpus_files() -> list:
    """Names of the bundled ``.qunity`` files."""
    root = resources.files(__package__) / "corpus"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".qunity"))


def corpus_path(name: str):
    """A traversable for a bundled file (usable with ``resources.as_file``)."""
    return resources.files(__package__) / "corpus" / name


def read_source(name: str) -> str:
    return corpus_path(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load(name: str) -> SourceProgram:
    """Parse a bundled file (cached)."""
    return parse(read_source(name))


@dataclass(frozen=True)
class CorpusEntry:
    """One closed term built from the definitions of a corpus file.

    The ``"classical"`` tag marks members of the classical sublanguage suite.
    """

    name: str
    file: str
    text: str
    tags: frozenset = frozenset()

    def term(self):
        return expand_text(self.text, load(self.file).definitions)

    def derivation(self) -> Derivation:
        return _derive(self.file, self.text)


@lru_cache(maxsize=None)
def _derive(file: str, text: str) -> Derivation:
    return infer(expand_text(text, load(file).definitions))


def _entries(file: str, texts, tags=()) -> list:
    return [CorpusEntry(t, file, t, frozenset(tags)) for t in texts]


_CLASSICAL = [
    "not", "ident", "swap", "rot3", "dup", "first", "second", "cnot", "toffoli",
    "fredkin", "and", "or", "xor", "halfadd", "incr", "zeroone", "isone", "unleft",
    "fromjust", "half", "const0", "drop", "guard", "equals1", "equals01", "withdefault",
    "measure", "mapnot", "cycle", "embed", "fallback", "pairswap", "sumcarry",
]

_WALK_CLASSICAL = [
    "root(1)", "rootone(0)", "asleaf(0)", "asleaf(1)", "downcast(0)", "downcast(1)",
    "leftchild(1)", "rightchild(1)", "nextcoin(0)", "nextcoin(1)",
]

ENTRIES: tuple = tuple(
    _entries("deutsch.qunity", ["deutsch(const0)", "deutsch(const1)", "deutsch(ident)",
                                "deutsch(negate)"])
    + _entries("deutsch_jozsa.qunity", ["dj(1, zero(1))", "dj(1, first(1))", "dj(2, parity2)",
                                        "dj(3, first(3))", "dj(3, zero(3))"])
    + _entries("grover.qunity", ["grover(1, marked1)", "grover(2, marked2)",
                                 "grover(3, marked3)"])
    + _entries("qft.qunity", ["qft(1)", "and", "couple(2)", "qft(2)", "qft(3)"])
    + _entries("match.qunity", ["flip", "exchange", "embed", "(plus, 1) |> exchange"])
    + _entries("dsum.qunity", ["hx", "plus |> left[Bit, Bit] |> hx"])
    + _entries("equals.qunity", ["had 0 |> equals[Bit](1)"])
    + _entries("coin.qunity", ["coin"])
    + _entries("walk.qunity", _WALK_CLASSICAL, ["classical"])
    + _entries("walk.qunity", ["ucoin", "uprime(1)", "walk(1)", "leftchild(2)",
                                "diffusion(1, leafbit)", "diffusion(1, leaffirst(0))"])
    + _entries("classical.qunity", _CLASSICAL, ["classical"])
)


def entries(tag: str | None = None) -> list:
    """Entries carrying ``tag`` (all entries when ``tag`` is None)."""
    return [e for e in ENTRIES if tag is None or tag in e.tags]


def entry(name: str, file: str | None = None) -> CorpusEntry:
    for e in ENTRIES:
        if e.name == name and (file is None or e.file == file):
            return e
    raise KeyError(name)
