"""
Invertible Mealy automata and the groups of tree automorphisms they generate.

A word s1 s2 ... sn acts on the tree with sn applied first, so sections
compose as (gh)_x = g_{h(x)} . h_x.
"""

import logging
from dataclasses import dataclass
from itertools import permutations
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

from .config import ContractionBudget
from .errors import (
    AutomatonError,
    BudgetExhaustedError,
    LetterOutOfRangeError,
    PlatformMismatchError,
    WordSyntaxError,
)


logger = logging.getLogger(__name__)

Symbol = int
Letters = Tuple[Symbol, ...]
Permutation = Tuple[int, ...]
LetterString = Union[str, Sequence[int]]

INVERSE_SUFFIXES = ("^-1", "⁻¹", "'")
IDENTITY_ALIASES = ("", "e", "ε", "1")


def symbol(state: int, inverse: bool = False) -> Symbol:
    """Encode a signed state reference as one int: 2*state + inverse."""
    return (state << 1) | int(inverse)


def symbol_state(sym: Symbol) -> int:
    return sym >> 1


def symbol_is_inverse(sym: Symbol) -> bool:
    return bool(sym & 1)


def invert_symbol(sym: Symbol) -> Symbol:
    return sym ^ 1


def compose_permutations(outer: Sequence[int], inner: Sequence[int]) -> Permutation:
    """The permutation x -> outer[inner[x]]."""
    return tuple(outer[y] for y in inner)


def invert_permutation(perm: Sequence[int]) -> Permutation:
    result = [0] * len(perm)
    for x, y in enumerate(perm):
        result[y] = x
    return tuple(result)


@dataclass(frozen=True)
class MealyAutomaton:
    """Finite transition/output tables over the alphabet {0..k-1}."""
    alphabet_size: int
    states: Tuple[str, ...]
    transition: Tuple[Tuple[int, ...], ...]
    output: Tuple[Tuple[int, ...], ...]
    identity: int = 0

    def __post_init__(self) -> None:
        k = self.alphabet_size
        count = len(self.states)
        if k < 1:
            raise AutomatonError(f"alphabet size must be positive, got {k}")
        if count == 0 or len(set(self.states)) != count:
            raise AutomatonError("state names must be nonempty and distinct")
        if not 0 <= self.identity < count:
            raise AutomatonError(f"identity index {self.identity} out of range")
        if len(self.transition) != count or len(self.output) != count:
            raise AutomatonError("tables must have one row per state")
        for s, name in enumerate(self.states):
            row_t, row_o = self.transition[s], self.output[s]
            if len(row_t) != k or len(row_o) != k:
                raise AutomatonError(f"state {name!r}: tables must be total on {k} letters")
            if any(not 0 <= t < count for t in row_t):
                raise AutomatonError(f"state {name!r}: transition to an unknown state")
            if sorted(row_o) != list(range(k)):
                raise AutomatonError(f"state {name!r}: output is not a permutation (automaton not invertible)")
        ident = self.identity
        if self.output[ident] != tuple(range(k)) or any(t != ident for t in self.transition[ident]):
            raise AutomatonError(f"identity state {self.states[ident]!r} must fix letters and loop to itself")

    @classmethod
    def from_tables(
        cls,
        alphabet_size: int,
        states: Sequence[str],
        transition: Mapping[str, Sequence[str]],
        output: Mapping[str, Sequence[int]],
        identity: str = "e",
    ) -> "MealyAutomaton":
        """Build from name-keyed tables: ``transition[s][x]`` is a state name, ``output[s][x]`` a letter."""
        index = {name: i for i, name in enumerate(states)}
        for table in (transition, output):
            missing = [name for name in states if name not in table]
            if missing:
                raise AutomatonError(f"tables missing rows for {missing}")
        if identity not in index:
            raise AutomatonError(f"identity state {identity!r} not among states")
        try:
            trans = tuple(tuple(index[t] for t in transition[name]) for name in states)
        except KeyError as exc:
            raise AutomatonError(f"transition to unknown state {exc.args[0]!r}") from exc
        out = tuple(tuple(int(y) for y in output[name]) for name in states)
        return cls(alphabet_size, tuple(states), trans, out, index[identity])

    def state_index(self, name: str) -> int:
        try:
            return self.states.index(name)
        except ValueError as exc:
            raise AutomatonError(f"unknown state {name!r}") from exc


@dataclass(frozen=True)
class RewritingRules:
    """
    Length-reducing rewriting applied on top of free reduction.

    ``involutions`` are states with s^2 = e; ``klein`` triples (x, y, z)
    satisfy xy = yx = z and cyclic variants (a Klein four-group with e).
    """
    name: str = "free"
    involutions: FrozenSet[int] = frozenset()
    klein: Tuple[Tuple[int, int, int], ...] = ()


@dataclass(frozen=True)
class GeneratorWord:
    """A reduced word over signed states, tagged with its platform id."""
    platform_id: int
    letters: Letters = ()

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def is_empty(self) -> bool:
        return not self.letters


class AutomatonGroup:
    """
    The group generated by an invertible Mealy automaton.

    Inverse states are virtual: the tables for s^-1 are derived on the fly
    (output pi_s^-1, section at y equal to tau(s, pi_s^-1(y))^-1).
    """

    def __init__(
        self,
        automaton: MealyAutomaton,
        rules: Optional[RewritingRules] = None,
        platform_id: int = 0,
        name: str = "",
        generator_states: Optional[Sequence[int]] = None,
    ):
        self.automaton = automaton
        self.rules = rules or RewritingRules()
        self.platform_id = platform_id
        self.name = name or f"platform-{platform_id:#04x}"
        self.alphabet_size = automaton.alphabet_size
        self.identity_state = automaton.identity
        self.identity_permutation: Permutation = tuple(range(automaton.alphabet_size))

        if generator_states is None:
            generator_states = [s for s in range(len(automaton.states)) if s != automaton.identity]
        self.generator_states: Tuple[int, ...] = tuple(generator_states)

        self._out, self._trans = self._symbol_tables(automaton)
        self._cancel, self._merge = self._rewriting_tables(automaton, self.rules)
        self._names = sorted(
            ((name, i) for i, name in enumerate(automaton.states)),
            key=lambda item: -len(item[0]),
        )

    # --- construction helpers -------------------------------------------

    @staticmethod
    def _symbol_tables(automaton: MealyAutomaton):
        out: List[Permutation] = []
        trans: List[Tuple[Symbol, ...]] = []
        k = automaton.alphabet_size
        for s in range(len(automaton.states)):
            forward = automaton.output[s]
            backward = invert_permutation(forward)
            row = automaton.transition[s]
            out.append(tuple(forward))
            trans.append(tuple(symbol(row[x]) for x in range(k)))
            out.append(backward)
            trans.append(tuple(symbol(row[backward[y]], True) for y in range(k)))
        return tuple(out), tuple(trans)

    @staticmethod
    def _rewriting_tables(automaton: MealyAutomaton, rules: RewritingRules):
        cancel = set()
        merge: Dict[Tuple[Symbol, Symbol], Symbol] = {}
        for s in range(len(automaton.states)):
            cancel.add((symbol(s), symbol(s, True)))
            cancel.add((symbol(s, True), symbol(s)))
            if s in rules.involutions:
                cancel.add((symbol(s), symbol(s)))
        for triple in rules.klein:
            if len(set(triple)) != 3 or not set(triple) <= set(rules.involutions):
                raise AutomatonError(f"klein triple {triple} must be three distinct involutions")
            for x, y, z in permutations(triple):
                merge[(symbol(x), symbol(y))] = symbol(z)
        return frozenset(cancel), merge

    # --- words ------------------------------------------------------------

    def check(self, word: GeneratorWord) -> None:
        if word.platform_id != self.platform_id:
            raise PlatformMismatchError(
                f"word belongs to platform {word.platform_id:#04x}, not {self.platform_id:#04x}"
            )

    def _normalize(self, sym: Symbol) -> Optional[Symbol]:
        state = sym >> 1
        if state == self.identity_state:
            return None
        if state in self.rules.involutions:
            return sym & ~1
        return sym

    def reduce_letters(self, letters: Sequence[Symbol]) -> Letters:
        """Free reduction plus the platform's rewriting rules."""
        stack: List[Symbol] = []
        cancel, merge = self._cancel, self._merge
        for raw in letters:
            sym = self._normalize(raw)
            while sym is not None and stack:
                top = stack[-1]
                if (top, sym) in cancel:
                    stack.pop()
                    sym = None
                    break
                merged = merge.get((top, sym))
                if merged is None:
                    break
                stack.pop()
                sym = merged
            if sym is not None:
                stack.append(sym)
        return tuple(stack)

    def word(self, letters: Union[str, Sequence[Symbol]] = ()) -> GeneratorWord:
        """Reduced word from text or from raw symbols."""
        if isinstance(letters, str):
            return self.parse(letters)
        k_states = len(self.automaton.states)
        for sym in letters:
            if not 0 <= (sym >> 1) < k_states:
                raise WordSyntaxError(f"symbol {sym} refers to an unknown state")
        return GeneratorWord(self.platform_id, self.reduce_letters(letters))

    def identity(self) -> GeneratorWord:
        return GeneratorWord(self.platform_id, ())

    def generators(self) -> List[GeneratorWord]:
        return [GeneratorWord(self.platform_id, (symbol(s),)) for s in self.generator_states]

    def parse(self, text: str) -> GeneratorWord:
        """Parse e.g. ``"bcd"``, ``"a01 a01"`` or ``"b⁻¹a^-1"``."""
        source = text.strip()
        if source in IDENTITY_ALIASES:
            return self.identity()
        letters: List[Symbol] = []
        i = 0
        while i < len(source):
            ch = source[i]
            if ch.isspace() or ch in "·*":
                i += 1
                continue
            if ch == "ε":
                letters.append(symbol(self.identity_state))
                i += 1
                continue
            for name, state in self._names:
                if source.startswith(name, i):
                    break
            else:
                raise WordSyntaxError(f"unknown state at position {i} in {text!r}")
            i += len(name)
            inverse = False
            for suffix in INVERSE_SUFFIXES:
                if source.startswith(suffix, i):
                    inverse = True
                    i += len(suffix)
                    break
            letters.append(symbol(state, inverse))
        return GeneratorWord(self.platform_id, self.reduce_letters(letters))

    def format(self, word: Union[GeneratorWord, Sequence[Symbol]]) -> str:
        letters = word.letters if isinstance(word, GeneratorWord) else tuple(word)
        if not letters:
            return "e"
        names = self.automaton.states
        parts = [names[s >> 1] + ("⁻¹" if s & 1 else "") for s in letters]
        sep = " " if any(len(names[s >> 1]) > 1 for s in letters) else ""
        return sep.join(parts)

    # --- action -----------------------------------------------------------

    def _letters(self, string: LetterString) -> Tuple[Tuple[int, ...], bool]:
        k = self.alphabet_size
        if isinstance(string, str):
            if k > 10:
                raise LetterOutOfRangeError("digit strings need an alphabet of at most 10 letters")
            try:
                letters = tuple(int(ch) for ch in string)
            except ValueError as exc:
                raise LetterOutOfRangeError(f"not a digit string: {string!r}") from exc
            as_text = True
        else:
            letters = tuple(int(x) for x in string)
            as_text = False
        for x in letters:
            if not 0 <= x < k:
                raise LetterOutOfRangeError(f"letter {x} outside 0..{k - 1}")
        return letters, as_text

    def _check_letter(self, x: int) -> None:
        if not 0 <= x < self.alphabet_size:
            raise LetterOutOfRangeError(f"letter {x} outside 0..{self.alphabet_size - 1}")

    def apply(self, word: GeneratorWord, string: LetterString) -> LetterString:
        """Image of a vertex (letter string) under the word's automorphism."""
        self.check(word)
        letters, as_text = self._letters(string)
        out, trans, ident = self._out, self._trans, self.identity_state
        states = list(word.letters)
        image: List[int] = []
        for x in letters:
            sections: List[Symbol] = []
            for sym in reversed(states):
                nxt = trans[sym][x]
                x = out[sym][x]
                if nxt >> 1 != ident:
                    sections.append(nxt)
            sections.reverse()
            states = sections
            image.append(x)
        if as_text:
            return "".join(str(y) for y in image)
        return tuple(image)

    def root_perm(self, word: GeneratorWord) -> Permutation:
        self.check(word)
        return self._root_perm(word.letters)

    def _root_perm(self, letters: Letters) -> Permutation:
        out = self._out
        perm = []
        for x in range(self.alphabet_size):
            for sym in reversed(letters):
                x = out[sym][x]
            perm.append(x)
        return tuple(perm)

    def _raw_section(self, letters: Letters, x: int) -> Tuple[int, List[Symbol]]:
        out, trans, ident = self._out, self._trans, self.identity_state
        sections: List[Symbol] = []
        for sym in reversed(letters):
            nxt = trans[sym][x]
            x = out[sym][x]
            if nxt >> 1 != ident:
                sections.append(nxt)
        sections.reverse()
        return x, sections

    def section(self, word: GeneratorWord, x: int) -> GeneratorWord:
        """Reduced word for the section of ``word`` at first-level vertex ``x``."""
        self.check(word)
        self._check_letter(x)
        _, sections = self._raw_section(word.letters, x)
        return GeneratorWord(self.platform_id, self.reduce_letters(sections))

    def first_level(self, letters: Letters) -> Tuple[Permutation, Tuple[Letters, ...]]:
        """Root permutation and the reduced sections at every letter."""
        perm = []
        children = []
        for x in range(self.alphabet_size):
            y, sections = self._raw_section(letters, x)
            perm.append(y)
            children.append(self.reduce_letters(sections))
        return tuple(perm), tuple(children)

    # --- group operations ---------------------------------------------------

    def multiply(self, w1: GeneratorWord, w2: GeneratorWord) -> GeneratorWord:
        self.check(w1)
        self.check(w2)
        return GeneratorWord(self.platform_id, self.reduce_letters(w1.letters + w2.letters))

    def invert(self, word: GeneratorWord) -> GeneratorWord:
        self.check(word)
        return GeneratorWord(self.platform_id, self.invert_letters(word.letters))

    def invert_letters(self, letters: Letters) -> Letters:
        return self.reduce_letters([s ^ 1 for s in reversed(letters)])

    def is_trivial(self, word: GeneratorWord, budget: Optional[ContractionBudget] = None) -> bool:
        """
        Word problem by section closure.

        The word is trivial iff every element of the closure of {word}
        under first-level sections has trivial root permutation.
        """
        self.check(word)
        budget = budget or ContractionBudget()
        start = word.letters
        if not start:
            return True
        seen = {start}
        frontier = [start]
        depth = 0
        while frontier:
            if depth > budget.max_depth:
                raise BudgetExhaustedError(
                    f"section closure deeper than {budget.max_depth} levels ({len(seen)} elements)"
                )
            following: List[Letters] = []
            for letters in frontier:
                perm, children = self.first_level(letters)
                if perm != self.identity_permutation:
                    logger.debug("is_trivial: nontrivial section at depth %d after %d elements", depth, len(seen))
                    return False
                for child in children:
                    if child and child not in seen:
                        seen.add(child)
                        if len(seen) > budget.max_closure:
                            raise BudgetExhaustedError(
                                f"section closure exceeded {budget.max_closure} elements"
                            )
                        following.append(child)
            frontier = following
            depth += 1
        logger.debug("is_trivial: closure of %d elements, depth %d", len(seen), depth)
        return True

    def equal(self, w1: GeneratorWord, w2: GeneratorWord, budget: Optional[ContractionBudget] = None) -> bool:
        return self.is_trivial(self.multiply(w1, self.invert(w2)), budget)

    def __repr__(self) -> str:
        return f"AutomatonGroup({self.name!r}, states={len(self.automaton.states)}, k={self.alphabet_size})"
