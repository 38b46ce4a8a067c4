"""
Brute-force adversary for the key agreement.

Given the public generators and one side's transmission, search the
public subgroup for a word solving every conjugacy equation at once, in
length-then-lexicographic order over signed generator indices.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .config import AttackSettings
from .errors import SearchBudgetExceeded, TransmissionError
from .platforms import Element, PlatformDescriptor
from .protocol import PublicParams, Side, Transmission, evaluate_index_word, key_digest
from .utils import Timer
from .words import IndexLetter, IndexWord, format_index_word


logger = logging.getLogger(__name__)


class Orientation(Enum):
    """Which way the unknown x conjugates: x^-1 u x (RIGHT) or x u x^-1 (LEFT)."""
    RIGHT = "right"
    LEFT = "left"


class AttackStatus(Enum):
    FOUND = "found"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class AttackInstance:
    """Equations for one side: Alice's A^-1 b_i A = v_i, or Bob's B a_j B^-1 = w_j."""
    params: PublicParams
    target: Tuple[Element, ...]
    side: Side

    @classmethod
    def from_transmission(cls, params: PublicParams, transmission: Transmission) -> "AttackInstance":
        expected = params.m if transmission.side is Side.ALICE else params.n
        if len(transmission.elements) != expected:
            raise TransmissionError(f"expected {expected} transmitted elements, got {len(transmission.elements)}")
        return cls(params, transmission.elements, transmission.side)

    @property
    def generators(self) -> Tuple[Element, ...]:
        return self.params.generators(self.side)

    @property
    def sources(self) -> Tuple[Element, ...]:
        return self.params.generators(self.side.peer)

    @property
    def orientation(self) -> Orientation:
        return Orientation.RIGHT if self.side is Side.ALICE else Orientation.LEFT


@dataclass(frozen=True)
class AttackResult:
    solution: Optional[IndexWord]
    nodes: int
    elapsed_ms: float
    status: AttackStatus

    @property
    def found(self) -> bool:
        return self.solution is not None


class _Search:
    """Shared state of one search: generator powers, equations and the node budget."""

    def __init__(
        self,
        platform: PlatformDescriptor,
        generators: Sequence[Element],
        pairs: Sequence[Tuple[Element, Element]],
        orientation: Orientation,
        max_nodes: int,
    ):
        self.platform = platform
        self.generators = tuple(generators)
        self.pairs = tuple(pairs)
        self.orientation = orientation
        self.max_nodes = max_nodes
        self.powers: Dict[IndexLetter, Element] = {}
        for i, g in enumerate(self.generators):
            self.powers[(i, 1)] = g
            self.powers[(i, -1)] = platform.invert(g)
        self.letters: Tuple[IndexLetter, ...] = tuple(
            (i, sign) for i in range(len(self.generators)) for sign in (1, -1)
        )
        self.nodes = 0
        self._lock = threading.Lock()

    def count(self, amount: int = 1) -> None:
        with self._lock:
            self.nodes += amount
            if self.nodes > self.max_nodes:
                raise SearchBudgetExceeded(f"search exceeded {self.max_nodes} nodes")

    def solves(self, x: Element) -> bool:
        platform = self.platform
        x_inv = platform.invert(x)
        for u, v in self.pairs:
            if self.orientation is Orientation.RIGHT:
                image = platform.multiply(x_inv, platform.multiply(u, x))
            else:
                image = platform.multiply(x, platform.multiply(u, x_inv))
            if not platform.equal(image, v):
                return False
        return True

    def words(
        self,
        prefix: IndexWord,
        element: Element,
        remaining: int,
        shortest: Optional[Dict[Element, int]] = None,
    ) -> Iterator[Tuple[IndexWord, Element]]:
        """Freely reduced extensions of ``prefix`` by exactly ``remaining`` letters, in lex order."""
        if shortest is not None and shortest.get(element, len(prefix)) < len(prefix):
            return
        if remaining == 0:
            yield prefix, element
            return
        for letter in self.letters:
            if prefix and prefix[-1] == (letter[0], -letter[1]):
                continue
            yield from self.words(
                prefix + (letter,),
                self.platform.multiply(element, self.powers[letter]),
                remaining - 1,
                shortest,
            )

    def first_in(
        self,
        letter: IndexLetter,
        length: int,
        shortest: Optional[Dict[Element, int]],
    ) -> Tuple[Optional[IndexWord], Dict[Element, int]]:
        """First solution of the given length starting with ``letter``."""
        seen: Dict[Element, int] = {}
        for word, element in self.words((letter,), self.powers[letter], length - 1, shortest):
            self.count()
            if shortest is not None:
                seen.setdefault(element, length)
            if self.solves(element):
                return word, seen
        return None, seen


def _search(
    platform: PlatformDescriptor,
    generators: Sequence[Element],
    pairs: Sequence[Tuple[Element, Element]],
    orientation: Orientation,
    max_length: int,
    settings: AttackSettings,
) -> AttackResult:
    if max_length < 0:
        raise ValueError("max_length must be non-negative")
    search = _Search(platform, generators, pairs, orientation, settings.max_nodes)
    shortest: Optional[Dict[Element, int]] = {} if settings.dedupe else None
    solution: Optional[IndexWord] = None

    with Timer("attack") as timer:
        identity = platform.identity()
        search.count()
        if shortest is not None:
            shortest[identity] = 0
        if search.solves(identity):
            solution = ()
        length = 1
        while solution is None and length <= max_length and search.letters:
            if settings.workers > 1:
                with ThreadPoolExecutor(max_workers=settings.workers) as pool:
                    futures = [pool.submit(search.first_in, letter, length, shortest) for letter in search.letters]
                    outcomes = [f.result() for f in futures]
            else:
                outcomes = []
                for letter in search.letters:
                    outcomes.append(search.first_in(letter, length, shortest))
                    if outcomes[-1][0] is not None:
                        break
            found = [word for word, _ in outcomes if word is not None]
            if found:
                rank = {letter: i for i, letter in enumerate(search.letters)}
                solution = min(found, key=lambda word: [rank[letter] for letter in word])
            elif shortest is not None:
                for _, seen in outcomes:
                    for element, size in seen.items():
                        shortest.setdefault(element, size)
            logger.debug("search length %d: %d nodes so far", length, search.nodes)
            length += 1

    if solution is not None:
        # reverify from scratch before surfacing
        if not search.solves(evaluate_index_word(platform, generators, solution)):
            raise RuntimeError(f"candidate {format_index_word(solution)} failed verification")
        return AttackResult(solution, search.nodes, timer.milliseconds, AttackStatus.FOUND)
    return AttackResult(None, search.nodes, timer.milliseconds, AttackStatus.EXHAUSTED)


def solve_simultaneous(
    platform: PlatformDescriptor,
    instance: AttackInstance,
    max_length: int,
    settings: Optional[AttackSettings] = None,
) -> AttackResult:
    """
    Length-lex first word over the side's generators solving every equation.

    Args:
        platform: Platform of the instance
        instance: Generators, sources and observed targets for one side
        max_length: Longest candidate word
        settings: Node budget, worker threads and dedupe (defaults if None)

    Returns:
        AttackResult with the solution, or status EXHAUSTED when none exists up to max_length

    Raises:
        SearchBudgetExceeded: More than max_nodes candidates were tried
        TransmissionError: Target count differs from the source count
    """
    settings = settings or AttackSettings()
    if len(instance.target) != len(instance.sources):
        raise TransmissionError(f"expected {len(instance.sources)} targets, got {len(instance.target)}")
    pairs = list(zip(instance.sources, instance.target))
    result = _search(platform, instance.generators, pairs, instance.orientation, max_length, settings)
    logger.info(
        "%s side: %s after %d nodes (%.1f ms)",
        instance.side.name.lower(), result.status.value, result.nodes, result.elapsed_ms,
    )
    return result


def single_conjugacy(
    platform: PlatformDescriptor,
    u: Element,
    v: Element,
    generators: Sequence[Element],
    max_length: int,
    settings: Optional[AttackSettings] = None,
) -> AttackResult:
    """Shortest word x over ``generators`` with x u x^-1 = v."""
    return _search(platform, generators, [(u, v)], Orientation.LEFT, max_length, settings or AttackSettings())


def recover_key(platform: PlatformDescriptor, params: PublicParams, sol_a: IndexWord, sol_b: IndexWord) -> bytes:
    """Digest of A^-1 B A B^-1 for the recovered words."""
    a = evaluate_index_word(platform, params.alice, sol_a)
    b = evaluate_index_word(platform, params.bob, sol_b)
    element = platform.multiply(
        platform.multiply(platform.invert(a), b),
        platform.multiply(a, platform.invert(b)),
    )
    return key_digest(platform, element)


@dataclass(frozen=True)
class AttackReport:
    """One-line summary and machine-readable record of an attack run."""
    platform: str
    n: int
    m: int
    s: int
    t: int
    L: int
    found: bool
    nodes: int
    milliseconds: float
    key_recovered: Optional[bool] = None

    def summary(self) -> str:
        text = (
            f"{self.platform}: n={self.n} m={self.m} s={self.s} t={self.t} L={self.L} "
            f"found={str(self.found).lower()} nodes={self.nodes} ms={self.milliseconds:.1f}"
        )
        if self.key_recovered is not None:
            text += f" key recovered: {str(self.key_recovered).lower()}"
        return text

    def to_dict(self) -> dict:
        return asdict(self)


def attack_transcript(
    platform: PlatformDescriptor,
    params: PublicParams,
    alice_transmission: Transmission,
    bob_transmission: Transmission,
    max_length: int,
    settings: Optional[AttackSettings] = None,
) -> Tuple[AttackResult, AttackResult, Optional[bytes]]:
    """Solve both sides; when both succeed, also return the recovered key digest."""
    result_a = solve_simultaneous(platform, AttackInstance.from_transmission(params, alice_transmission), max_length, settings)
    result_b = solve_simultaneous(platform, AttackInstance.from_transmission(params, bob_transmission), max_length, settings)
    digest = None
    if result_a.solution is not None and result_b.solution is not None:
        digest = recover_key(platform, params, result_a.solution, result_b.solution)
    return result_a, result_b, digest
