"""
Built-in platforms and the registry.

Every platform exposes the same element interface (identity, multiply,
invert, canonical bytes) so the key agreement and the attack harness do
not care whether elements are portraits or affine maps.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .affine import AffineElement, AffineGroup, read_affine, serialize_affine
from .automaton import AutomatonGroup, GeneratorWord, MealyAutomaton, RewritingRules, symbol
from .config import AffineConfig, ContractionBudget, GOmegaConfig, HanoiPlatformConfig, PlatformConfig
from .contraction import Nucleus, compute_nucleus
from .errors import (
    AffineError,
    ConfigError,
    NucleusError,
    PlatformMismatchError,
    PortraitTrailingDataError,
    UnknownPlatformError,
)
from .portrait import (
    Leaf,
    Portrait,
    canonical_portrait,
    portrait_invert,
    portrait_multiply,
    read_portrait,
    serialize_portrait,
)
from .utils import SplitMix64
from .words import IndexWord, format_index_word, reduce_index_word


logger = logging.getLogger(__name__)

Element = Union[Portrait, AffineElement]
Word = Union[GeneratorWord, IndexWord]


class PlatformId(IntEnum):
    """Wire-stable registry ids."""
    GRIGORCHUK = 0x01
    G_OMEGA = 0x02
    BASILICA = 0x03
    UNIVERSAL = 0x04
    HANOI = 0x05
    AFFINE = 0x06


class PlatformKind(Enum):
    AUTOMATON = "automaton"
    AFFINE = "affine"


PLATFORM_NAMES: Dict[str, PlatformId] = {
    "grigorchuk": PlatformId.GRIGORCHUK,
    "g_omega": PlatformId.G_OMEGA,
    "basilica": PlatformId.BASILICA,
    "universal": PlatformId.UNIVERSAL,
    "hanoi": PlatformId.HANOI,
    "affine": PlatformId.AFFINE,
}


class PlatformDescriptor(ABC):
    """Uniform element interface over one platform."""

    platform_id: int
    name: str
    kind: PlatformKind
    contracting: bool

    @property
    @abstractmethod
    def generator_count(self) -> int:
        ...

    @abstractmethod
    def parse_word(self, text: str) -> Word:
        ...

    @abstractmethod
    def format_word(self, word: Word) -> str:
        ...

    @abstractmethod
    def word_is_trivial(self, word: Word) -> bool:
        ...

    @abstractmethod
    def canonical(self, word: Word) -> Element:
        """Canonical element denoted by a word."""

    @abstractmethod
    def identity(self) -> Element:
        ...

    @abstractmethod
    def multiply(self, x: Element, y: Element) -> Element:
        ...

    @abstractmethod
    def invert(self, x: Element) -> Element:
        ...

    @abstractmethod
    def serialize_element(self, x: Element) -> bytes:
        ...

    @abstractmethod
    def read_element(self, data: bytes, offset: int = 0) -> Tuple[Element, int]:
        ...

    @abstractmethod
    def random_word(self, rng: SplitMix64, length: int) -> Word:
        ...

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        ...

    def element(self, text: str) -> Element:
        return self.canonical(self.parse_word(text))

    def equal(self, x: Element, y: Element) -> bool:
        return x == y

    def is_identity(self, x: Element) -> bool:
        return x == self.identity()

    def conjugate(self, x: Element, by: Element) -> Element:
        """by^-1 . x . by"""
        return self.multiply(self.invert(by), self.multiply(x, by))

    def deserialize_element(self, data: bytes) -> Element:
        element, end = self.read_element(data, 0)
        if end != len(data):
            raise self._trailing_error(len(data) - end)
        return element

    @staticmethod
    def _trailing_error(count: int) -> Exception:
        return PortraitTrailingDataError(f"{count} bytes after the element")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, id={self.platform_id:#04x})"


class AutomatonPlatform(PlatformDescriptor):
    """A platform backed by an invertible Mealy automaton."""

    kind = PlatformKind.AUTOMATON

    def __init__(
        self,
        group: AutomatonGroup,
        contracting: bool,
        budget: Optional[ContractionBudget] = None,
        description: str = "",
    ):
        self.group = group
        self.platform_id = group.platform_id
        self.name = group.name
        self.contracting = contracting
        self.budget = budget or ContractionBudget()
        self.description = description
        self.nucleus: Optional[Nucleus] = compute_nucleus(group, self.budget) if contracting else None
        if not contracting:
            logger.warning("%s is not contracting; canonical elements and key exchange are unavailable", self.name)

    @property
    def alphabet_size(self) -> int:
        return self.group.alphabet_size

    @property
    def generator_count(self) -> int:
        return len(self.group.generator_states)

    def _require_nucleus(self) -> Nucleus:
        if self.nucleus is None:
            raise NucleusError(f"{self.name} has no nucleus; it is not flagged as contracting")
        return self.nucleus

    def parse_word(self, text: str) -> GeneratorWord:
        return self.group.parse(text)

    def format_word(self, word: GeneratorWord) -> str:
        return self.group.format(word)

    def word_is_trivial(self, word: GeneratorWord) -> bool:
        return self.group.is_trivial(word, self.budget)

    def canonical(self, word: GeneratorWord) -> Portrait:
        return canonical_portrait(self.group, self._require_nucleus(), word, self.budget)

    def identity(self) -> Portrait:
        nucleus = self._require_nucleus()
        return Portrait(self.platform_id, self.alphabet_size, len(nucleus), Leaf(nucleus.identity))

    def multiply(self, x: Portrait, y: Portrait) -> Portrait:
        return portrait_multiply(x, y, self._require_nucleus(), self.budget)

    def invert(self, x: Portrait) -> Portrait:
        return portrait_invert(x, self._require_nucleus())

    def serialize_element(self, x: Portrait) -> bytes:
        if x.platform_id != self.platform_id:
            raise PlatformMismatchError(f"element of platform {x.platform_id:#04x} on {self.name}")
        return serialize_portrait(x)

    def read_element(self, data: bytes, offset: int = 0) -> Tuple[Portrait, int]:
        nucleus = self._require_nucleus()
        return read_portrait(data, offset, nucleus)

    def random_word(self, rng: SplitMix64, length: int) -> GeneratorWord:
        """Uniform-ish reduced word: draw signed generators, keep those that lengthen the word."""
        group = self.group
        choices = []
        for s in group.generator_states:
            choices.append(symbol(s))
            if s not in group.rules.involutions:
                choices.append(symbol(s, True))
        letters: Tuple[int, ...] = ()
        if not choices:
            return group.identity()
        attempts = 0
        while len(letters) < length and attempts < 64 * (length + 1):
            attempts += 1
            extended = group.reduce_letters(letters + (choices[rng.below(len(choices))],))
            if len(extended) == len(letters) + 1:
                letters = extended
        return GeneratorWord(self.platform_id, letters)

    def describe(self) -> Dict[str, Any]:
        automaton = self.group.automaton
        return {
            "id": self.platform_id,
            "name": self.name,
            "kind": self.kind.value,
            "alphabet": self.alphabet_size,
            "states": list(automaton.states),
            "generators": [automaton.states[s] for s in self.group.generator_states],
            "rules": self.group.rules.name,
            "contracting": self.contracting,
            "nucleus": len(self.nucleus) if self.nucleus is not None else None,
            "description": self.description,
        }


class AffinePlatform(PlatformDescriptor):
    """Z^n semidirect a unimodular matrix group, words over fixed generators."""

    kind = PlatformKind.AFFINE
    contracting = False

    def __init__(self, group: AffineGroup, name: str = "affine", description: str = ""):
        self.group = group
        self.platform_id = int(PlatformId.AFFINE)
        self.name = name
        self.description = description

    @property
    def dimension(self) -> int:
        return self.group.dimension

    @property
    def generator_count(self) -> int:
        return len(self.group.generators)

    def parse_word(self, text: str) -> IndexWord:
        return self.group.parse(text)

    def format_word(self, word: IndexWord) -> str:
        return format_index_word(word)

    def word_is_trivial(self, word: IndexWord) -> bool:
        return self.group.evaluate(word).is_identity

    def canonical(self, word: IndexWord) -> AffineElement:
        return self.group.evaluate(word)

    def identity(self) -> AffineElement:
        return self.group.identity()

    def multiply(self, x: AffineElement, y: AffineElement) -> AffineElement:
        return x.compose(y)

    def invert(self, x: AffineElement) -> AffineElement:
        return x.inverse()

    def serialize_element(self, x: AffineElement) -> bytes:
        if x.dimension != self.dimension:
            raise PlatformMismatchError(f"element of dimension {x.dimension} on a {self.dimension}-dimensional platform")
        return serialize_affine(x)

    def read_element(self, data: bytes, offset: int = 0) -> Tuple[AffineElement, int]:
        element, end = read_affine(data, offset)
        if element.dimension != self.dimension:
            raise PlatformMismatchError(f"element of dimension {element.dimension}, expected {self.dimension}")
        return element, end

    @staticmethod
    def _trailing_error(count: int) -> Exception:
        return AffineError(f"{count} bytes after the element")

    def random_word(self, rng: SplitMix64, length: int) -> IndexWord:
        count = self.generator_count
        word: IndexWord = ()
        while len(word) < length:
            letter = (rng.below(count), 1 if rng.below(2) == 0 else -1)
            extended = reduce_index_word(word + (letter,))
            if len(extended) == len(word) + 1:
                word = extended
        return word

    def describe(self) -> Dict[str, Any]:
        return {
            "id": self.platform_id,
            "name": self.name,
            "kind": self.kind.value,
            "dimension": self.dimension,
            "generators": [str(g) for g in self.group.generators],
            "contracting": False,
            "nucleus": None,
            "description": self.description,
        }


# --- automaton tables ---------------------------------------------------------

KLEIN_RULES = "involutions+klein"


def grigorchuk_automaton() -> MealyAutomaton:
    return MealyAutomaton.from_tables(
        2,
        ["e", "a", "b", "c", "d"],
        transition={
            "e": ["e", "e"],
            "a": ["e", "e"],
            "b": ["a", "c"],
            "c": ["a", "d"],
            "d": ["e", "b"],
        },
        output={"e": [0, 1], "a": [1, 0], "b": [0, 1], "c": [0, 1], "d": [0, 1]},
    )


def _klein_rules(automaton: MealyAutomaton, triples: Sequence[Tuple[str, str, str]]) -> RewritingRules:
    involutions = frozenset(i for i, name in enumerate(automaton.states) if i != automaton.identity)
    klein = tuple(tuple(automaton.state_index(n) for n in t) for t in triples)
    return RewritingRules(KLEIN_RULES, involutions, klein)


@lru_cache(maxsize=None)
def grigorchuk(budget: Optional[ContractionBudget] = None) -> AutomatonPlatform:
    automaton = grigorchuk_automaton()
    group = AutomatonGroup(
        automaton,
        _klein_rules(automaton, [("b", "c", "d")]),
        platform_id=int(PlatformId.GRIGORCHUK),
        name="grigorchuk",
    )
    return AutomatonPlatform(group, True, budget, "first Grigorchuk group on the binary tree")


@dataclass(frozen=True)
class GOmegaSpec:
    """Eventually periodic omega = preperiod . period period period ..."""
    preperiod: str = ""
    period: str = "012"

    def __post_init__(self) -> None:
        if not self.period:
            raise ConfigError("period must be nonempty")
        for ch in self.preperiod + self.period:
            if ch not in "012":
                raise ConfigError(f"omega letters must be 0, 1 or 2, got {ch!r}")

    @property
    def levels(self) -> int:
        return len(self.preperiod) + len(self.period)

    def letter(self, level: int) -> int:
        """omega at a level below ``levels``."""
        return int((self.preperiod + self.period)[level])

    def next_level(self, level: int) -> int:
        return level + 1 if level + 1 < self.levels else len(self.preperiod)

    def __str__(self) -> str:
        return f"{self.preperiod}({self.period})"


# sections at letter 0 of (b, c, d) for each letter of omega
OMEGA_COLUMNS = {0: ("a", "a", "e"), 1: ("a", "e", "a"), 2: ("e", "a", "a")}


def _level_name(letter: str, level: int) -> str:
    return letter if level == 0 else f"{letter}{level}"


def g_omega_automaton(spec: GOmegaSpec) -> MealyAutomaton:
    states = ["e", "a"]
    transition = {"e": ["e", "e"], "a": ["e", "e"]}
    output = {"e": [0, 1], "a": [1, 0]}
    for level in range(spec.levels):
        column = OMEGA_COLUMNS[spec.letter(level)]
        nxt = spec.next_level(level)
        for letter, at_zero in zip("bcd", column):
            name = _level_name(letter, level)
            states.append(name)
            transition[name] = [at_zero, _level_name(letter, nxt)]
            output[name] = [0, 1]
    return MealyAutomaton.from_tables(2, states, transition, output)


@lru_cache(maxsize=None)
def g_omega(spec: GOmegaSpec = GOmegaSpec(), budget: Optional[ContractionBudget] = None) -> AutomatonPlatform:
    automaton = g_omega_automaton(spec)
    triples = [tuple(_level_name(x, level) for x in "bcd") for level in range(spec.levels)]
    group = AutomatonGroup(
        automaton,
        _klein_rules(automaton, triples),
        platform_id=int(PlatformId.G_OMEGA),
        name=f"g_omega[{spec}]",
        generator_states=[automaton.state_index(n) for n in "abcd"],
    )
    return AutomatonPlatform(group, True, budget, f"Grigorchuk-type group for omega = {spec}")


def basilica_automaton() -> MealyAutomaton:
    return MealyAutomaton.from_tables(
        2,
        ["e", "a", "b"],
        transition={"e": ["e", "e"], "a": ["e", "b"], "b": ["e", "a"]},
        output={"e": [0, 1], "a": [0, 1], "b": [1, 0]},
    )


@lru_cache(maxsize=None)
def basilica(budget: Optional[ContractionBudget] = None) -> AutomatonPlatform:
    group = AutomatonGroup(
        basilica_automaton(),
        RewritingRules("free"),
        platform_id=int(PlatformId.BASILICA),
        name="basilica",
    )
    return AutomatonPlatform(group, True, budget, "Basilica group (torsion free)")


def universal_letter(x: int, y: int) -> int:
    """Byte encoding of the letter (x, y) of {0,1} x {0,1,2}."""
    return 3 * x + y


def universal_automaton() -> MealyAutomaton:
    fixed = list(range(6))
    swap = [universal_letter(1 - x, y) for x in (0, 1) for y in (0, 1, 2)]
    return MealyAutomaton.from_tables(
        6,
        ["e", "a", "b", "c", "d"],
        transition={
            "e": ["e"] * 6,
            "a": ["e"] * 6,
            "b": ["a", "a", "e", "b", "b", "b"],
            "c": ["a", "e", "a", "c", "c", "c"],
            "d": ["e", "a", "a", "d", "d", "d"],
        },
        output={"e": fixed, "a": swap, "b": fixed, "c": fixed, "d": fixed},
    )


@lru_cache(maxsize=None)
def universal(budget: Optional[ContractionBudget] = None) -> AutomatonPlatform:
    automaton = universal_automaton()
    group = AutomatonGroup(
        automaton,
        _klein_rules(automaton, [("b", "c", "d")]),
        platform_id=int(PlatformId.UNIVERSAL),
        name="universal",
    )
    return AutomatonPlatform(group, True, budget, "universal Grigorchuk group over {0,1}x{0,1,2}")


def hanoi_state_name(i: int, j: int, pegs: int) -> str:
    return f"a{i}{j}" if pegs <= 10 else f"a{i}_{j}"


def hanoi_automaton(pegs: int = 3) -> MealyAutomaton:
    if pegs < 3:
        raise ConfigError(f"Hanoi towers need at least 3 pegs, got {pegs}")
    states = ["e"]
    transition = {"e": ["e"] * pegs}
    output = {"e": list(range(pegs))}
    for i in range(pegs):
        for j in range(i + 1, pegs):
            name = hanoi_state_name(i, j, pegs)
            states.append(name)
            transition[name] = ["e" if x in (i, j) else name for x in range(pegs)]
            output[name] = [j if x == i else i if x == j else x for x in range(pegs)]
    return MealyAutomaton.from_tables(pegs, states, transition, output)


@lru_cache(maxsize=None)
def hanoi(pegs: int = 3, budget: Optional[ContractionBudget] = None) -> AutomatonPlatform:
    automaton = hanoi_automaton(pegs)
    involutions = frozenset(range(1, len(automaton.states)))
    group = AutomatonGroup(
        automaton,
        RewritingRules("involutions", involutions),
        platform_id=int(PlatformId.HANOI),
        name=f"hanoi[{pegs}]",
    )
    return AutomatonPlatform(group, pegs == 3, budget, f"Hanoi towers group on {pegs} pegs")


def affine(generators: Sequence[AffineElement], name: str = "affine") -> AffinePlatform:
    return AffinePlatform(AffineGroup(generators), name, f"affine maps on Z^{generators[0].dimension if generators else 0}")


def sanov() -> AffinePlatform:
    return AffinePlatform(AffineGroup.sanov(), "affine", "Sanov pair on Z^2 (sample generators)")


# --- Hanoi game oracle --------------------------------------------------------

@dataclass(frozen=True)
class HanoiConfig:
    """Peg of each disc, smallest disc first."""
    pegs: int
    discs: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.pegs < 3:
            raise ConfigError(f"Hanoi towers need at least 3 pegs, got {self.pegs}")
        if any(not 0 <= x < self.pegs for x in self.discs):
            raise ConfigError(f"disc positions must lie in 0..{self.pegs - 1}")

    @classmethod
    def from_string(cls, text: str, pegs: int = 3) -> "HanoiConfig":
        return cls(pegs, tuple(int(ch) for ch in text))

    def __str__(self) -> str:
        return "".join(str(x) for x in self.discs)


def hanoi_legal_move(config: HanoiConfig, i: int, j: int) -> HanoiConfig:
    """Move the smallest disc sitting on peg i or j to the other of the two."""
    if not (0 <= i < j < config.pegs):
        raise ConfigError(f"need pegs 0 <= i < j < {config.pegs}, got {i}, {j}")
    discs = list(config.discs)
    for position, peg in enumerate(discs):
        if peg in (i, j):
            discs[position] = j if peg == i else i
            break
    return HanoiConfig(config.pegs, tuple(discs))


# --- registry -------------------------------------------------------------------

def _lookup_id(name_or_id: Union[str, int]) -> PlatformId:
    if isinstance(name_or_id, int):
        try:
            return PlatformId(name_or_id)
        except ValueError as exc:
            raise UnknownPlatformError(f"no platform with id {name_or_id:#04x}") from exc
    key = name_or_id.strip().lower().replace("-", "_")
    if key.startswith("0x") or key.isdigit():
        return _lookup_id(int(key, 0))
    if key in ("gomega", "g_ω", "gω"):
        key = "g_omega"
    if key not in PLATFORM_NAMES:
        raise UnknownPlatformError(f"unknown platform {name_or_id!r}; known: {', '.join(PLATFORM_NAMES)}")
    return PLATFORM_NAMES[key]


def get_platform(
    name_or_id: Union[str, int],
    budget: Optional[ContractionBudget] = None,
    config: Optional[PlatformConfig] = None,
) -> PlatformDescriptor:
    """
    Build (or fetch the cached) platform; parametrized kinds take their config.

    Args:
        name_or_id: Registry name ("grigorchuk", "g-omega", ...) or numeric id
        budget: Contraction budget for the nucleus and word problem
        config: Parsed platform config for affine, g_omega or hanoi

    Returns:
        The platform descriptor

    Raises:
        UnknownPlatformError: No platform under that name or id
        ConfigError: The config is for another kind
    """
    platform_id = _lookup_id(name_or_id)
    if platform_id == PlatformId.GRIGORCHUK:
        return grigorchuk(budget)
    if platform_id == PlatformId.BASILICA:
        return basilica(budget)
    if platform_id == PlatformId.UNIVERSAL:
        return universal(budget)
    if platform_id == PlatformId.G_OMEGA:
        if config is not None and not isinstance(config, GOmegaConfig):
            raise ConfigError("g_omega needs a g_omega config")
        spec = GOmegaSpec(config.preperiod, config.period) if config else GOmegaSpec()
        return g_omega(spec, budget)
    if platform_id == PlatformId.HANOI:
        if config is not None and not isinstance(config, HanoiPlatformConfig):
            raise ConfigError("hanoi needs a hanoi config")
        return hanoi(config.pegs if config else 3, budget)
    if config is None:
        return sanov()
    if not isinstance(config, AffineConfig):
        raise ConfigError("affine needs an affine config")
    generators = [AffineElement.create(g.translation, g.matrix) for g in config.generators]
    return affine(generators)


def list_platforms(budget: Optional[ContractionBudget] = None) -> List[PlatformDescriptor]:
    """Default instance of every registered platform, in id order."""
    return [get_platform(pid, budget) for pid in PlatformId]
