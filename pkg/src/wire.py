"""
Two-party exchange over a reliable byte stream.

Each direction starts with the magic ``AAGK``; after that every message is
a frame::

    [4 bytes - payload length (big-endian)]
    [1 byte  - message type]
    [N bytes - payload]

The initiator plays Alice and proposes the public parameters; the
responder plays Bob.
"""

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, List, Optional, Protocol, Tuple, Union

from .config import DEFAULT_MAX_PRIVATE_LENGTH
from .errors import ExchangeError, FailureCode, FrameError, ToolkitError
from .platforms import PlatformDescriptor
from .protocol import (
    AagSession,
    PrivateKey,
    PublicParams,
    SharedKey,
    Side,
    Transcript,
    Transmission,
    check_private,
    parse_params,
    serialize_params,
)


logger = logging.getLogger(__name__)

MAGIC = b"AAGK"
PROTOCOL_VERSION = 0x01
HEADER = struct.Struct("!IB")
HEADER_SIZE = HEADER.size
MAX_PAYLOAD_SIZE = 16 * 1024 * 1024
CONFIRM_SIZE = 8


class MessageType(IntEnum):
    HELLO = 0x01
    PARAMS = 0x02
    TRANSMIT = 0x03
    CONFIRM = 0x04
    ERROR = 0x7F


class Role(IntEnum):
    """The value doubles as the role byte bound into CONFIRM."""
    INITIATOR = 0x01
    RESPONDER = 0x02

    @property
    def side(self) -> Side:
        return Side.ALICE if self is Role.INITIATOR else Side.BOB

    @property
    def peer(self) -> "Role":
        return Role.RESPONDER if self is Role.INITIATOR else Role.INITIATOR


class Phase(Enum):
    HELLO = "hello"
    PARAMS = "params"
    TRANSMITTED = "transmitted"
    CONFIRMED = "confirmed"
    DONE = "done"
    FAILED = "failed"


class Transport(Protocol):
    def sendall(self, data: bytes) -> None:
        ...

    def recv(self, size: int) -> bytes:
        ...


@dataclass(frozen=True)
class WireMessage:
    type: MessageType
    payload: bytes = b""

    def encode(self) -> bytes:
        if len(self.payload) > MAX_PAYLOAD_SIZE:
            raise FrameError(FailureCode.FRAME_TOO_LARGE, f"payload of {len(self.payload)} bytes")
        return HEADER.pack(len(self.payload), self.type) + self.payload


def parse_header(header: bytes) -> Tuple[int, MessageType]:
    if len(header) < HEADER_SIZE:
        raise FrameError(FailureCode.TRUNCATED_FRAME, "header too short")
    length, raw_type = HEADER.unpack_from(header, 0)
    if length > MAX_PAYLOAD_SIZE:
        raise FrameError(FailureCode.FRAME_TOO_LARGE, f"payload of {length} bytes")
    try:
        return length, MessageType(raw_type)
    except ValueError as exc:
        raise FrameError(FailureCode.UNKNOWN_TYPE, f"type {raw_type:#04x}") from exc


def decode_frame(data: bytes, offset: int = 0) -> Tuple[WireMessage, int]:
    """One frame from a buffer; returns it and the offset after it."""
    length, msg_type = parse_header(data[offset:offset + HEADER_SIZE])
    start = offset + HEADER_SIZE
    if start + length > len(data):
        raise FrameError(FailureCode.TRUNCATED_FRAME, f"need {length} payload bytes, have {len(data) - start}")
    return WireMessage(msg_type, bytes(data[start:start + length])), start + length


def encode_hello(platform_id: int, version: int = PROTOCOL_VERSION) -> bytes:
    return struct.pack("!BB", version, platform_id)


def decode_hello(payload: bytes) -> Tuple[int, int]:
    if len(payload) != 2:
        raise FrameError(FailureCode.MALFORMED_PAYLOAD, "HELLO payload must be 2 bytes")
    version, platform_id = struct.unpack("!BB", payload)
    return version, platform_id


def encode_error(code: FailureCode, message: str = "") -> bytes:
    return struct.pack("!B", code) + message.encode("utf-8")


def decode_error(payload: bytes) -> Tuple[int, str]:
    if not payload:
        raise FrameError(FailureCode.MALFORMED_PAYLOAD, "empty ERROR payload")
    return payload[0], payload[1:].decode("utf-8", errors="replace")


def confirm_tag(key: SharedKey, role: Role) -> bytes:
    """First 8 bytes of SHA-256(key bytes || role byte)."""
    return hashlib.sha256(key.digest + bytes((role,))).digest()[:CONFIRM_SIZE]


# incoming frame expected in each phase, per role
_EXPECTED = {
    (Phase.HELLO, Role.INITIATOR): MessageType.HELLO,
    (Phase.HELLO, Role.RESPONDER): MessageType.HELLO,
    (Phase.PARAMS, Role.RESPONDER): MessageType.PARAMS,
    (Phase.TRANSMITTED, Role.INITIATOR): MessageType.TRANSMIT,
    (Phase.TRANSMITTED, Role.RESPONDER): MessageType.TRANSMIT,
    (Phase.CONFIRMED, Role.INITIATOR): MessageType.CONFIRM,
    (Phase.CONFIRMED, Role.RESPONDER): MessageType.CONFIRM,
}

_NEXT = {
    Phase.HELLO: Phase.PARAMS,
    Phase.PARAMS: Phase.TRANSMITTED,
    Phase.TRANSMITTED: Phase.CONFIRMED,
    Phase.CONFIRMED: Phase.DONE,
}


@dataclass
class SessionState:
    """Phase machine of one endpoint; a failure is permanent."""
    role: Role
    phase: Phase = Phase.HELLO
    platform_id: Optional[int] = None
    failure: Optional[FailureCode] = None
    log: List[Tuple[str, MessageType, bytes]] = field(default_factory=list)

    def fail(self, code: FailureCode, message: str = "") -> ExchangeError:
        self.phase = Phase.FAILED
        self.failure = FailureCode(code)
        logger.debug("%s failed: %s %s", self.role.name.lower(), self.failure.name, message)
        return ExchangeError(code, message)

    def advance(self) -> None:
        if self.phase not in _NEXT:
            raise self.fail(FailureCode.OUT_OF_PHASE, f"no phase after {self.phase.value}")
        self.phase = _NEXT[self.phase]

    def accept(self, message: WireMessage) -> None:
        """Check an incoming message against the current phase."""
        if self.phase in (Phase.DONE, Phase.FAILED):
            raise self.fail(FailureCode.OUT_OF_PHASE, f"message after the session ended ({self.phase.value})")
        self.log.append(("in", message.type, message.payload))
        if message.type is MessageType.ERROR:
            try:
                code, text = decode_error(message.payload)
            except FrameError:
                code, text = FailureCode.PEER_ERROR, ""
            raise self.fail(FailureCode.PEER_ERROR, f"peer reported {code:#04x}: {text}")
        expected = _EXPECTED.get((self.phase, self.role))
        if message.type is not expected:
            raise self.fail(
                FailureCode.OUT_OF_PHASE,
                f"{message.type.name} in phase {self.phase.value}",
            )

    def record_out(self, message: WireMessage) -> None:
        self.log.append(("out", message.type, message.payload))

    def payloads(self, direction: str, msg_type: MessageType) -> List[bytes]:
        return [p for d, t, p in self.log if d == direction and t is msg_type]


class Channel:
    """Frame I/O over a transport, recording into the session state."""

    def __init__(self, transport: Transport, state: SessionState):
        self.transport = transport
        self.state = state

    def _recv_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.transport.recv(n - len(buf))
            except OSError as exc:
                raise self.state.fail(FailureCode.TRUNCATED_FRAME, f"receive failed: {exc}") from exc
            if not chunk:
                raise self.state.fail(FailureCode.TRUNCATED_FRAME, f"stream closed after {len(buf)} of {n} bytes")
            buf.extend(chunk)
        return bytes(buf)

    def send_magic(self) -> None:
        self.transport.sendall(MAGIC)

    def recv_magic(self) -> None:
        magic = self._recv_exact(len(MAGIC))
        if magic != MAGIC:
            raise self.state.fail(FailureCode.BAD_MAGIC, f"got {magic!r}")

    def send(self, msg_type: MessageType, payload: bytes = b"") -> None:
        message = WireMessage(msg_type, payload)
        self.transport.sendall(message.encode())
        self.state.record_out(message)

    def recv(self) -> WireMessage:
        header = self._recv_exact(HEADER_SIZE)
        try:
            length, msg_type = parse_header(header)
        except FrameError as exc:
            raise self.state.fail(exc.code, str(exc)) from exc
        payload = self._recv_exact(length) if length else b""
        message = WireMessage(msg_type, payload)
        self.state.accept(message)
        return message

    def send_error(self, code: FailureCode, message: str = "") -> None:
        """Best effort; the peer may already be gone."""
        try:
            self.transport.sendall(WireMessage(MessageType.ERROR, encode_error(code, message)).encode())
        except OSError:
            pass


PrivateSource = Union[PrivateKey, Callable[[PublicParams], PrivateKey]]


@dataclass(frozen=True)
class ExchangeOutcome:
    key: SharedKey
    params: PublicParams
    state: SessionState

    def transcript(self) -> Transcript:
        """Same layout as a local run; both digest slots hold the confirmed key."""
        alice_tx, bob_tx = (
            (self.state.payloads("out", MessageType.TRANSMIT)[0], self.state.payloads("in", MessageType.TRANSMIT)[0])
            if self.state.role is Role.INITIATOR
            else (self.state.payloads("in", MessageType.TRANSMIT)[0], self.state.payloads("out", MessageType.TRANSMIT)[0])
        )
        params = (
            self.state.payloads("out", MessageType.PARAMS)
            if self.state.role is Role.INITIATOR
            else self.state.payloads("in", MessageType.PARAMS)
        )[0]
        return Transcript(params, alice_tx, bob_tx, self.key.digest, self.key.digest)


def _payload(state: SessionState, parse: Callable, *args):
    try:
        return parse(*args)
    except ToolkitError as exc:
        raise state.fail(FailureCode.MALFORMED_PAYLOAD, str(exc)) from exc


def run_exchange(
    transport: Transport,
    role: Role,
    platform: PlatformDescriptor,
    params: PublicParams,
    priv: PrivateSource,
    adopt_params: bool = False,
    state: Optional[SessionState] = None,
    max_private_length: int = DEFAULT_MAX_PRIVATE_LENGTH,
) -> ExchangeOutcome:
    """
    HELLO, PARAMS, TRANSMIT, CONFIRM, then done.

    On a local failure the peer gets an ERROR frame when the stream
    still allows it.

    Args:
        transport: Connected byte stream
        role: INITIATOR plays Alice, RESPONDER plays Bob
        platform: Platform both ends must announce
        params: Our public parameters
        priv: Private key, or a callable building one from the final params
        adopt_params: Responder takes the initiator's params instead of failing
        state: Phase machine to drive (a fresh one if None)
        max_private_length: Longest private word accepted

    Returns:
        ExchangeOutcome with the confirmed key

    Raises:
        ExchangeError: The session failed; ``code`` says why
    """
    state = state or SessionState(role)
    channel = Channel(transport, state)
    try:
        return _run(channel, state, role, platform, params, priv, adopt_params, max_private_length)
    except ExchangeError as exc:
        if state.phase is not Phase.FAILED:
            state.fail(exc.code, str(exc))
        if exc.code not in (FailureCode.PEER_ERROR, FailureCode.TRUNCATED_FRAME, FailureCode.PLATFORM_MISMATCH,
                            FailureCode.VERSION_MISMATCH, FailureCode.CONFIRM_MISMATCH):
            channel.send_error(exc.code, str(exc))
        raise


def _run(
    channel: Channel,
    state: SessionState,
    role: Role,
    platform: PlatformDescriptor,
    params: PublicParams,
    priv: PrivateSource,
    adopt_params: bool,
    max_private_length: int,
) -> ExchangeOutcome:
    # hello
    channel.send_magic()
    channel.send(MessageType.HELLO, encode_hello(platform.platform_id))
    channel.recv_magic()
    hello = channel.recv()
    version, peer_platform = _payload(state, decode_hello, hello.payload)
    if version != PROTOCOL_VERSION:
        raise state.fail(FailureCode.VERSION_MISMATCH, f"peer speaks version {version}")
    if peer_platform != platform.platform_id:
        raise state.fail(
            FailureCode.PLATFORM_MISMATCH,
            f"peer uses platform {peer_platform:#04x}, we use {platform.platform_id:#04x}",
        )
    state.platform_id = peer_platform
    state.advance()

    # params
    own_params = serialize_params(platform, params)
    if role is Role.INITIATOR:
        channel.send(MessageType.PARAMS, own_params)
    else:
        received = channel.recv()
        if received.payload != own_params:
            if not adopt_params:
                raise state.fail(FailureCode.PARAMS_MISMATCH, "public parameters differ from ours")
            params = _payload(state, parse_params, platform, received.payload)
            logger.info("adopted the initiator's public parameters")
    state.advance()

    key_source = priv(params) if callable(priv) else priv
    if key_source.side is not role.side:
        raise state.fail(FailureCode.PARAMS_MISMATCH, f"private key is for {key_source.side.name.lower()}")
    try:
        check_private(params, key_source, max_private_length)
    except ToolkitError as exc:
        raise state.fail(FailureCode.PARAMS_MISMATCH, str(exc)) from exc
    session = AagSession(platform, params, key_source, max_private_length)

    # transmit
    channel.send(MessageType.TRANSMIT, session.transmission().encode(platform))
    incoming = channel.recv()
    peer_tx = _payload(state, Transmission.decode, platform, incoming.payload, role.side.peer)
    try:
        key = session.receive(peer_tx)
    except ToolkitError as exc:
        raise state.fail(FailureCode.MALFORMED_PAYLOAD, str(exc)) from exc
    state.advance()

    # confirm
    own_tag = confirm_tag(key, role)
    if role is Role.INITIATOR:
        channel.send(MessageType.CONFIRM, own_tag)
        peer_confirm = channel.recv()
    else:
        peer_confirm = channel.recv()
        channel.send(MessageType.CONFIRM, own_tag)
    if len(peer_confirm.payload) != CONFIRM_SIZE:
        raise state.fail(FailureCode.MALFORMED_PAYLOAD, "CONFIRM payload must be 8 bytes")
    if peer_confirm.payload != confirm_tag(key, role.peer):
        raise state.fail(FailureCode.CONFIRM_MISMATCH, "peer derived a different key")
    state.advance()
    logger.info("%s: key confirmed %s", role.name.lower(), key.hex[:16])
    return ExchangeOutcome(key, params, state)
