"""
Anshel-Anshel-Goldfeld key agreement over any registered platform.

Alice holds a = a_p1 ... a_ps over her public generators, Bob holds
b = b_q1 ... b_qt over his. Alice sends a^-1 b_i a, Bob sends b a_j b^-1,
and both arrive at K = a^-1 b a b^-1.
"""

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from .config import DEFAULT_MAX_PRIVATE_LENGTH, SessionSettings
from .errors import ParamsError, PrivateKeyError, TranscriptError, TransmissionError
from .platforms import Element, PlatformDescriptor, Word
from .utils import SplitMix64
from .words import IndexWord, format_index_word, has_adjacent_cancellation


logger = logging.getLogger(__name__)

PARAMS_HEADER = struct.Struct("!BHH")
TRANSCRIPT_MAGIC = b"AAGT"
TRANSCRIPT_VERSION = 0x01
MAX_PARAMS_DRAWS = 64


class Side(IntEnum):
    ALICE = 0
    BOB = 1

    @property
    def peer(self) -> "Side":
        return Side.BOB if self is Side.ALICE else Side.ALICE


@dataclass(frozen=True)
class PublicParams:
    """Public generator tuples; elements are canonical."""
    platform_id: int
    alice: Tuple[Element, ...]
    bob: Tuple[Element, ...]
    alice_words: Tuple[Word, ...] = field(default=(), compare=False, repr=False)
    bob_words: Tuple[Word, ...] = field(default=(), compare=False, repr=False)

    @classmethod
    def create(
        cls,
        platform: PlatformDescriptor,
        alice: Sequence[Element],
        bob: Sequence[Element],
        alice_words: Sequence[Word] = (),
        bob_words: Sequence[Word] = (),
    ) -> "PublicParams":
        if not alice or not bob:
            raise ParamsError("both generator tuples must be nonempty")
        if len(alice) > 0xFFFF or len(bob) > 0xFFFF:
            raise ParamsError("at most 65535 generators per side")
        for side, elements in (("alice", alice), ("bob", bob)):
            for i, g in enumerate(elements, 1):
                if platform.is_identity(g):
                    raise ParamsError(f"{side} generator {i} is the identity")
        return cls(platform.platform_id, tuple(alice), tuple(bob), tuple(alice_words), tuple(bob_words))

    @classmethod
    def from_words(cls, platform: PlatformDescriptor, alice: Sequence[str], bob: Sequence[str]) -> "PublicParams":
        alice_words = [platform.parse_word(w) for w in alice]
        bob_words = [platform.parse_word(w) for w in bob]
        return cls.create(
            platform,
            [platform.canonical(w) for w in alice_words],
            [platform.canonical(w) for w in bob_words],
            alice_words,
            bob_words,
        )

    @property
    def n(self) -> int:
        return len(self.alice)

    @property
    def m(self) -> int:
        return len(self.bob)

    def generators(self, side: Side) -> Tuple[Element, ...]:
        return self.alice if side is Side.ALICE else self.bob


def make_params(
    platform: PlatformDescriptor,
    n: int,
    m: int,
    generator_length: int,
    seed: int,
) -> PublicParams:
    """
    Random public generators: reduced words of the given length, never the identity.

    Args:
        platform: Platform whose generators the words use
        n: Number of Alice's generators
        m: Number of Bob's generators
        generator_length: Length of every generator word
        seed: SplitMix64 seed

    Returns:
        PublicParams with canonical elements and the words they came from
    """
    if n < 1 or m < 1 or generator_length < 1:
        raise ParamsError("n, m and the generator length must be positive")
    rng = SplitMix64(seed)
    elements: List[Element] = []
    words: List[Word] = []
    for _ in range(n + m):
        for _ in range(MAX_PARAMS_DRAWS):
            word = platform.random_word(rng, generator_length)
            element = platform.canonical(word)
            if not platform.is_identity(element):
                break
        else:
            raise ParamsError(f"could not draw a nontrivial generator on {platform.name}")
        elements.append(element)
        words.append(word)
    logger.debug("params on %s: n=%d m=%d length=%d seed=%d", platform.name, n, m, generator_length, seed)
    return PublicParams.create(platform, elements[:n], elements[n:], words[:n], words[n:])


def serialize_params(platform: PlatformDescriptor, params: PublicParams) -> bytes:
    """platform id u8, n u16, m u16, then the n + m element encodings."""
    if params.platform_id != platform.platform_id:
        raise ParamsError("params belong to another platform")
    out = bytearray(PARAMS_HEADER.pack(params.platform_id, params.n, params.m))
    for g in params.alice + params.bob:
        out += platform.serialize_element(g)
    return bytes(out)


def parse_params(platform: PlatformDescriptor, data: bytes) -> PublicParams:
    if len(data) < PARAMS_HEADER.size:
        raise ParamsError("params truncated")
    platform_id, n, m = PARAMS_HEADER.unpack_from(data, 0)
    if platform_id != platform.platform_id:
        raise ParamsError(f"params for platform {platform_id:#04x}, expected {platform.platform_id:#04x}")
    pos = PARAMS_HEADER.size
    elements: List[Element] = []
    for _ in range(n + m):
        element, pos = platform.read_element(data, pos)
        elements.append(element)
    if pos != len(data):
        raise ParamsError(f"{len(data) - pos} bytes after the params")
    return PublicParams.create(platform, elements[:n], elements[n:])


@dataclass(frozen=True)
class PrivateKey:
    side: Side
    word: IndexWord

    def __str__(self) -> str:
        return format_index_word(self.word, "a" if self.side is Side.ALICE else "b")


def check_private(
    params: PublicParams,
    priv: PrivateKey,
    max_length: Optional[int] = DEFAULT_MAX_PRIVATE_LENGTH,
) -> None:
    """Indices in range, 1 <= length <= max_length, no adjacent cancellation. None lifts the cap."""
    count = len(params.generators(priv.side))
    if not priv.word:
        raise PrivateKeyError("private word must be nonempty")
    if max_length is not None and len(priv.word) > max_length:
        raise PrivateKeyError(f"private word of length {len(priv.word)} exceeds the maximum {max_length}")
    for index, sign in priv.word:
        if not 0 <= index < count or sign not in (1, -1):
            raise PrivateKeyError(f"letter ({index + 1}, {sign:+d}) outside 1..{count}")
    if has_adjacent_cancellation(priv.word):
        raise PrivateKeyError("private word has an adjacent cancellation")


def gen_private(
    params: PublicParams,
    side: Side,
    length: int,
    seed: int,
    signed: bool = True,
    max_length: int = DEFAULT_MAX_PRIVATE_LENGTH,
) -> PrivateKey:
    """Seeded private word; adjacent cancellations are redrawn."""
    if length < 1:
        raise PrivateKeyError("private word length must be at least 1")
    if length > max_length:
        raise PrivateKeyError(f"private word length {length} exceeds the maximum {max_length}")
    count = len(params.generators(side))
    if count == 0:
        raise PrivateKeyError(f"{side.name.lower()} has no generators")
    rng = SplitMix64(seed)
    word: List[Tuple[int, int]] = []
    while len(word) < length:
        index = rng.below(count)
        sign = -1 if signed and rng.below(2) else 1
        if word and word[-1] == (index, -sign):
            continue
        word.append((index, sign))
    return PrivateKey(side, tuple(word))


def evaluate_index_word(platform: PlatformDescriptor, generators: Sequence[Element], word: IndexWord) -> Element:
    """Product of generators^sign in word order."""
    result = platform.identity()
    inverses = {}
    for index, sign in word:
        g = generators[index]
        if sign < 0:
            if index not in inverses:
                inverses[index] = platform.invert(g)
            g = inverses[index]
        result = platform.multiply(result, g)
    return result


def private_element(platform: PlatformDescriptor, params: PublicParams, priv: PrivateKey) -> Element:
    # the length cap is enforced where keys enter a session
    check_private(params, priv, max_length=None)
    return evaluate_index_word(platform, params.generators(priv.side), priv.word)


@dataclass(frozen=True)
class Transmission:
    side: Side
    elements: Tuple[Element, ...]

    def encode(self, platform: PlatformDescriptor) -> bytes:
        """count u16, then the element encodings."""
        out = bytearray(struct.pack("!H", len(self.elements)))
        for x in self.elements:
            out += platform.serialize_element(x)
        return bytes(out)

    @classmethod
    def decode(cls, platform: PlatformDescriptor, data: bytes, side: Side) -> "Transmission":
        if len(data) < 2:
            raise TransmissionError("transmission truncated")
        (count,) = struct.unpack_from("!H", data, 0)
        pos = 2
        elements = []
        for _ in range(count):
            element, pos = platform.read_element(data, pos)
            elements.append(element)
        if pos != len(data):
            raise TransmissionError(f"{len(data) - pos} bytes after the transmission")
        return cls(side, tuple(elements))


def make_transmission(platform: PlatformDescriptor, params: PublicParams, priv: PrivateKey) -> Transmission:
    """Alice: a^-1 b_i a for every b_i. Bob: b a_j b^-1 for every a_j."""
    secret = private_element(platform, params, priv)
    if priv.side is Side.ALICE:
        elements = tuple(platform.conjugate(b, secret) for b in params.bob)
    else:
        elements = tuple(platform.conjugate(a, platform.invert(secret)) for a in params.alice)
    return Transmission(priv.side, elements)


@dataclass(frozen=True)
class SharedKey:
    element: Element
    digest: bytes

    @property
    def hex(self) -> str:
        return self.digest.hex()


def key_digest(platform: PlatformDescriptor, element: Element) -> bytes:
    return hashlib.sha256(bytes((platform.platform_id,)) + platform.serialize_element(element)).digest()


def shared_key(platform: PlatformDescriptor, element: Element) -> SharedKey:
    return SharedKey(element, key_digest(platform, element))


def derive_shared(
    platform: PlatformDescriptor,
    params: PublicParams,
    priv: PrivateKey,
    received: Transmission,
) -> SharedKey:
    """
    Shared key from the peer's transmission.

    Both sides reach K = a^-1 b a b^-1.

    Args:
        platform: Platform the session runs on
        params: Public parameters of the session
        priv: This side's private key
        received: The peer's transmission

    Returns:
        SharedKey holding K and its SHA-256 digest

    Raises:
        TransmissionError: Transmission from the same side or with the wrong count
    """
    if received.side is priv.side:
        raise TransmissionError("received a transmission from the same side")
    own = params.generators(priv.side)
    if len(received.elements) != len(own):
        raise TransmissionError(f"expected {len(own)} transmitted elements, got {len(received.elements)}")
    # received[i] is the peer-conjugated own generator i, so the word evaluates to the conjugated secret
    conjugated = evaluate_index_word(platform, received.elements, priv.word)
    secret = private_element(platform, params, priv)
    if priv.side is Side.ALICE:
        element = platform.multiply(platform.invert(secret), conjugated)
    else:
        element = platform.multiply(conjugated, platform.invert(secret))
    return shared_key(platform, element)


def serialize_key(key: SharedKey) -> bytes:
    return key.digest


class AagSession:
    """One side of a key agreement, in the order transmit then receive."""

    def __init__(
        self,
        platform: PlatformDescriptor,
        params: PublicParams,
        priv: PrivateKey,
        max_length: int = DEFAULT_MAX_PRIVATE_LENGTH,
    ):
        check_private(params, priv, max_length)
        if params.platform_id != platform.platform_id:
            raise ParamsError("params belong to another platform")
        self.platform = platform
        self.params = params
        self.priv = priv
        self.sent: Optional[Transmission] = None
        self.received: Optional[Transmission] = None
        self.key: Optional[SharedKey] = None

    @property
    def side(self) -> Side:
        return self.priv.side

    def transmission(self) -> Transmission:
        if self.sent is None:
            self.sent = make_transmission(self.platform, self.params, self.priv)
        return self.sent

    def receive(self, received: Transmission) -> SharedKey:
        self.received = received
        self.key = derive_shared(self.platform, self.params, self.priv, received)
        logger.debug("%s derived key %s", self.side.name.lower(), self.key.hex[:16])
        return self.key


# --- transcripts ------------------------------------------------------------------

@dataclass(frozen=True)
class Transcript:
    """Byte-level record of one session: params, both transmissions, both digests."""
    params: bytes
    alice_transmission: bytes
    bob_transmission: bytes
    alice_digest: bytes
    bob_digest: bytes

    @property
    def keys_agree(self) -> bool:
        return self.alice_digest == self.bob_digest

    def to_bytes(self) -> bytes:
        out = bytearray(TRANSCRIPT_MAGIC)
        out.append(TRANSCRIPT_VERSION)
        for part in (self.params, self.alice_transmission, self.bob_transmission, self.alice_digest, self.bob_digest):
            out += struct.pack("!I", len(part)) + part
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transcript":
        if data[:4] != TRANSCRIPT_MAGIC:
            raise TranscriptError("not a transcript (bad magic)")
        if len(data) < 5 or data[4] != TRANSCRIPT_VERSION:
            raise TranscriptError("unsupported transcript version")
        pos = 5
        parts = []
        for _ in range(5):
            if pos + 4 > len(data):
                raise TranscriptError("transcript truncated")
            (size,) = struct.unpack_from("!I", data, pos)
            pos += 4
            if pos + size > len(data):
                raise TranscriptError("transcript section truncated")
            parts.append(bytes(data[pos:pos + size]))
            pos += size
        if pos != len(data):
            raise TranscriptError(f"{len(data) - pos} bytes after the transcript")
        return cls(*parts)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Transcript":
        path = Path(path)
        if not path.exists():
            raise TranscriptError(f"transcript not found: {path}")
        return cls.from_bytes(path.read_bytes())

    def decode(self, platform: PlatformDescriptor) -> Tuple[PublicParams, Transmission, Transmission]:
        params = parse_params(platform, self.params)
        return (
            params,
            Transmission.decode(platform, self.alice_transmission, Side.ALICE),
            Transmission.decode(platform, self.bob_transmission, Side.BOB),
        )


@dataclass(frozen=True)
class LocalExchange:
    params: PublicParams
    alice: PrivateKey
    bob: PrivateKey
    alice_key: SharedKey
    bob_key: SharedKey
    transcript: Transcript


def exchange_local(
    platform: PlatformDescriptor,
    params: PublicParams,
    seed_a: int,
    seed_b: int,
    settings: Optional[SessionSettings] = None,
) -> LocalExchange:
    """
    Run both sides in one process.

    Args:
        platform: Platform to run on
        params: Public parameters shared by both sides
        seed_a: Seed of Alice's private word
        seed_b: Seed of Bob's private word
        settings: Word lengths and the private length cap (defaults if None)

    Returns:
        LocalExchange with both keys and the session transcript
    """
    settings = settings or SessionSettings()
    cap = settings.max_private_length
    alice = AagSession(platform, params, gen_private(params, Side.ALICE, settings.s, seed_a, settings.signed, cap), cap)
    bob = AagSession(platform, params, gen_private(params, Side.BOB, settings.t, seed_b, settings.signed, cap), cap)
    to_bob = alice.transmission()
    to_alice = bob.transmission()
    alice_key = alice.receive(to_alice)
    bob_key = bob.receive(to_bob)
    transcript = Transcript(
        serialize_params(platform, params),
        to_bob.encode(platform),
        to_alice.encode(platform),
        alice_key.digest,
        bob_key.digest,
    )
    return LocalExchange(params, alice.priv, bob.priv, alice_key, bob_key, transcript)
