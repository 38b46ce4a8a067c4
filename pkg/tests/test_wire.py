"""
Tests for the framed two-party exchange.
"""

import socket
import pytest
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.errors import ExchangeError, FailureCode, FrameError, ToolkitError
from src.platforms import basilica, grigorchuk
from src.protocol import (
    PrivateKey,
    Side,
    Transcript,
    Transmission,
    exchange_local,
    gen_private,
    make_params,
    parse_params,
    serialize_params,
)
from src.utils import SplitMix64
from src.config import SessionSettings
from src.wire import (
    MAGIC,
    MAX_PAYLOAD_SIZE,
    MessageType,
    Phase,
    Role,
    SessionState,
    WireMessage,
    confirm_tag,
    decode_error,
    decode_frame,
    decode_hello,
    encode_error,
    encode_hello,
    run_exchange,
)


class ScriptedTransport:
    """Replays fixed inbound bytes and records everything sent."""

    def __init__(self, inbound: bytes):
        self.inbound = bytearray(inbound)
        self.sent = bytearray()

    def sendall(self, data: bytes) -> None:
        self.sent += data

    def recv(self, size: int) -> bytes:
        chunk = bytes(self.inbound[:size])
        del self.inbound[:size]
        return chunk


class TamperingTransport:
    """Multiplies the first element of every outgoing TRANSMIT by a fixed element."""

    def __init__(self, sock, platform, side: Side, factor):
        self.sock = sock
        self.platform = platform
        self.side = side
        self.factor = factor

    def sendall(self, data: bytes) -> None:
        if len(data) > 4 and data[4] == MessageType.TRANSMIT:
            message, _ = decode_frame(data)
            tx = Transmission.decode(self.platform, message.payload, self.side)
            first = self.platform.multiply(tx.elements[0], self.factor)
            forged = Transmission(self.side, (first,) + tx.elements[1:])
            data = WireMessage(MessageType.TRANSMIT, forged.encode(self.platform)).encode()
        self.sock.sendall(data)

    def recv(self, size: int) -> bytes:
        return self.sock.recv(size)


class ByteFlippingTransport:
    """Flips the low bit of the last byte of every outgoing TRANSMIT frame."""

    def __init__(self, sock):
        self.sock = sock

    def sendall(self, data: bytes) -> None:
        if len(data) > 4 and data[4] == MessageType.TRANSMIT:
            data = data[:-1] + bytes((data[-1] ^ 1,))
        self.sock.sendall(data)

    def recv(self, size: int) -> bytes:
        return self.sock.recv(size)


@pytest.fixture
def grig():
    return grigorchuk()


@pytest.fixture
def settings():
    return SessionSettings(n=2, m=2, s=3, t=3, generator_length=3)


@pytest.fixture
def params(grig, settings):
    return make_params(grig, settings.n, settings.m, settings.generator_length, 7)


@pytest.fixture
def pair():
    left, right = socket.socketpair()
    left.settimeout(10)
    right.settimeout(10)
    yield left, right
    left.close()
    right.close()


def run_both(initiator, responder):
    """Run the two endpoints concurrently; return (result or exception) for each."""
    with ThreadPoolExecutor(max_workers=2) as pool:
        futures = [pool.submit(initiator), pool.submit(responder)]
        outcomes = []
        for future in futures:
            try:
                outcomes.append(future.result(timeout=60))
            except ExchangeError as exc:
                outcomes.append(exc)
    return outcomes


def frames(data: bytes):
    assert data[:4] == MAGIC
    pos = 4
    found = []
    while pos < len(data):
        message, pos = decode_frame(data, pos)
        found.append(message)
    return found


class TestFraming:
    """Tests for frame encoding and decoding."""

    def test_encode(self):
        assert WireMessage(MessageType.HELLO, b"\x01\x01").encode() == b"\x00\x00\x00\x02\x01\x01\x01"

    def test_decode(self):
        data = WireMessage(MessageType.CONFIRM, b"12345678").encode() + b"rest"
        message, end = decode_frame(data)
        assert message == WireMessage(MessageType.CONFIRM, b"12345678")
        assert data[end:] == b"rest"

    @pytest.mark.parametrize("data,code", [
        (b"\x00\x00\x00", FailureCode.TRUNCATED_FRAME),
        (b"\x00\x00\x00\x05\x01abc", FailureCode.TRUNCATED_FRAME),
        (b"\x00\x00\x00\x00\x42", FailureCode.UNKNOWN_TYPE),
        ((MAX_PAYLOAD_SIZE + 1).to_bytes(4, "big") + b"\x02", FailureCode.FRAME_TOO_LARGE),
    ])
    def test_decode_errors(self, data, code):
        with pytest.raises(FrameError) as info:
            decode_frame(data)
        assert info.value.code is code

    def test_oversized_payload(self):
        with pytest.raises(FrameError):
            WireMessage(MessageType.PARAMS, bytes(MAX_PAYLOAD_SIZE + 1)).encode()

    def test_hello_and_error_payloads(self):
        assert decode_hello(encode_hello(0x05)) == (1, 0x05)
        assert decode_error(encode_error(FailureCode.OUT_OF_PHASE, "late")) == (0x06, "late")
        with pytest.raises(FrameError):
            decode_hello(b"\x01")
        with pytest.raises(FrameError):
            decode_error(b"")

    def test_confirm_tags_differ_by_role(self, grig, params, settings):
        key = exchange_local(grig, params, 1, 2, settings).alice_key
        tags = {confirm_tag(key, role) for role in Role}
        assert len(tags) == 2
        assert all(len(tag) == 8 for tag in tags)


class TestSessionState:
    """Tests for the phase machine."""

    def test_advance(self):
        state = SessionState(Role.INITIATOR)
        for expected in (Phase.PARAMS, Phase.TRANSMITTED, Phase.CONFIRMED, Phase.DONE):
            state.advance()
            assert state.phase is expected
        with pytest.raises(ExchangeError):
            state.advance()
        assert state.phase is Phase.FAILED

    def test_unexpected_type(self):
        state = SessionState(Role.RESPONDER)
        with pytest.raises(ExchangeError) as info:
            state.accept(WireMessage(MessageType.TRANSMIT))
        assert info.value.code is FailureCode.OUT_OF_PHASE
        assert state.failure is FailureCode.OUT_OF_PHASE

    def test_peer_error(self):
        state = SessionState(Role.INITIATOR)
        with pytest.raises(ExchangeError) as info:
            state.accept(WireMessage(MessageType.ERROR, encode_error(FailureCode.PARAMS_MISMATCH)))
        assert info.value.code is FailureCode.PEER_ERROR

    def test_failure_is_permanent(self):
        state = SessionState(Role.INITIATOR)
        state.fail(FailureCode.BAD_MAGIC)
        with pytest.raises(ExchangeError):
            state.accept(WireMessage(MessageType.HELLO, encode_hello(1)))


class TestExchange:
    """End-to-end runs over a socket pair."""

    def test_loopback(self, grig, params, settings, pair):
        left, right = pair

        def keys(side, seed, length):
            return lambda p: gen_private(p, side, length, seed)

        initiator, responder = run_both(
            lambda: run_exchange(left, Role.INITIATOR, grig, params, keys(Side.ALICE, 1, settings.s)),
            lambda: run_exchange(right, Role.RESPONDER, grig, params, keys(Side.BOB, 2, settings.t)),
        )
        assert initiator.key.digest == responder.key.digest
        assert len(initiator.key.digest) == 32
        assert initiator.state.phase is Phase.DONE and responder.state.phase is Phase.DONE

        local = exchange_local(grig, params, 1, 2, settings)
        assert initiator.key == local.alice_key
        transcript = initiator.transcript()
        assert transcript == responder.transcript()
        assert transcript.params == local.transcript.params
        assert transcript.alice_transmission == local.transcript.alice_transmission
        assert transcript.bob_transmission == local.transcript.bob_transmission
        assert Transcript.from_bytes(transcript.to_bytes()).keys_agree

    def test_adopt_params(self, grig, params, settings, pair):
        left, right = pair
        other = make_params(grig, 3, 2, 2, 99)
        alice = gen_private(params, Side.ALICE, 2, 1)
        initiator, responder = run_both(
            lambda: run_exchange(left, Role.INITIATOR, grig, params, alice),
            lambda: run_exchange(
                right, Role.RESPONDER, grig, other, lambda p: gen_private(p, Side.BOB, 2, 2), adopt_params=True
            ),
        )
        assert responder.params == params
        assert initiator.key == responder.key

    def test_params_mismatch(self, grig, params, pair):
        left, right = pair
        other = make_params(grig, 2, 2, 3, 8)
        initiator, responder = run_both(
            lambda: run_exchange(left, Role.INITIATOR, grig, params, gen_private(params, Side.ALICE, 2, 1)),
            lambda: run_exchange(right, Role.RESPONDER, grig, other, gen_private(other, Side.BOB, 2, 2)),
        )
        assert responder.code is FailureCode.PARAMS_MISMATCH
        assert initiator.code is FailureCode.PEER_ERROR

    def test_tampered_transmit(self, grig, pair):
        left, right = pair
        params = make_params(grig, 1, 1, 3, 7)
        alice = PrivateKey(Side.ALICE, ((0, 1),))
        bob = PrivateKey(Side.BOB, ((0, 1),))
        tampering = TamperingTransport(left, grig, Side.ALICE, grig.element("a"))
        initiator, responder = run_both(
            lambda: run_exchange(tampering, Role.INITIATOR, grig, params, alice),
            lambda: run_exchange(right, Role.RESPONDER, grig, params, bob),
        )
        assert isinstance(initiator, ExchangeError) and isinstance(responder, ExchangeError)
        assert initiator.code is FailureCode.CONFIRM_MISMATCH
        assert responder.code is FailureCode.CONFIRM_MISMATCH

    def test_corrupted_transmit_bytes(self, grig, pair):
        left, right = pair
        params = make_params(grig, 1, 1, 3, 7)
        alice = PrivateKey(Side.ALICE, ((0, 1),))
        bob = PrivateKey(Side.BOB, ((0, 1),))
        initiator, responder = run_both(
            lambda: run_exchange(ByteFlippingTransport(left), Role.INITIATOR, grig, params, alice),
            lambda: run_exchange(right, Role.RESPONDER, grig, params, bob),
        )
        assert isinstance(initiator, ExchangeError) and isinstance(responder, ExchangeError)
        # either the bytes no longer parse, or they parse to another element and keys diverge
        assert responder.code in (FailureCode.MALFORMED_PAYLOAD, FailureCode.CONFIRM_MISMATCH)
        assert initiator.code in (FailureCode.PEER_ERROR, FailureCode.CONFIRM_MISMATCH)

    def test_platform_mismatch(self, grig, params, pair):
        left, right = pair
        other = basilica()
        other_params = make_params(other, 2, 2, 2, 7)
        initiator, responder = run_both(
            lambda: run_exchange(left, Role.INITIATOR, grig, params, gen_private(params, Side.ALICE, 2, 1)),
            lambda: run_exchange(right, Role.RESPONDER, other, other_params, gen_private(other_params, Side.BOB, 2, 2)),
        )
        assert initiator.code is FailureCode.PLATFORM_MISMATCH
        assert responder.code is FailureCode.PLATFORM_MISMATCH


class TestScriptedPeer:
    """Single endpoint against a scripted byte stream."""

    def hello(self, platform_id=0x01, version=0x01):
        return MAGIC + WireMessage(MessageType.HELLO, encode_hello(platform_id, version)).encode()

    def test_out_of_phase(self, grig, params):
        script = self.hello() + WireMessage(MessageType.CONFIRM, bytes(8)).encode()
        transport = ScriptedTransport(script)
        with pytest.raises(ExchangeError) as info:
            run_exchange(transport, Role.RESPONDER, grig, params, gen_private(params, Side.BOB, 2, 2))
        assert info.value.code is FailureCode.OUT_OF_PHASE
        sent = frames(bytes(transport.sent))
        assert [m.type for m in sent] == [MessageType.HELLO, MessageType.ERROR]
        assert sent[-1].payload[0] == FailureCode.OUT_OF_PHASE

    def test_bad_magic(self, grig, params):
        transport = ScriptedTransport(b"NOPE" + self.hello()[4:])
        with pytest.raises(ExchangeError) as info:
            run_exchange(transport, Role.INITIATOR, grig, params, gen_private(params, Side.ALICE, 2, 1))
        assert info.value.code is FailureCode.BAD_MAGIC

    def test_version_mismatch(self, grig, params):
        transport = ScriptedTransport(self.hello(version=0x02))
        with pytest.raises(ExchangeError) as info:
            run_exchange(transport, Role.INITIATOR, grig, params, gen_private(params, Side.ALICE, 2, 1))
        assert info.value.code is FailureCode.VERSION_MISMATCH
        assert [m.type for m in frames(bytes(transport.sent))] == [MessageType.HELLO]

    def test_stream_closed(self, grig, params):
        transport = ScriptedTransport(self.hello())
        with pytest.raises(ExchangeError) as info:
            run_exchange(transport, Role.RESPONDER, grig, params, gen_private(params, Side.BOB, 2, 2))
        assert info.value.code is FailureCode.TRUNCATED_FRAME

    def test_malformed_params(self, grig, params):
        script = self.hello() + WireMessage(MessageType.PARAMS, b"\x01\x00").encode()
        transport = ScriptedTransport(script)
        with pytest.raises(ExchangeError) as info:
            run_exchange(
                transport, Role.RESPONDER, grig, params, gen_private(params, Side.BOB, 2, 2), adopt_params=True
            )
        assert info.value.code is FailureCode.MALFORMED_PAYLOAD

    def test_wrong_private_side(self, grig, params):
        transport = ScriptedTransport(self.hello())
        with pytest.raises(ExchangeError) as info:
            run_exchange(transport, Role.INITIATOR, grig, params, gen_private(params, Side.BOB, 2, 2))
        assert info.value.code is FailureCode.PARAMS_MISMATCH


@pytest.mark.slow
class TestDecoderFuzz:
    """Seeded random and mutated payloads: decoders raise library errors and nothing else."""

    def mutate(self, rng, seed_bytes):
        data = bytearray(seed_bytes)
        for _ in range(1 + rng.below(4)):
            choice = rng.below(4)
            if choice == 0 and data:
                data[rng.below(len(data))] = rng.below(256)
            elif choice == 1 and data:
                del data[rng.below(len(data)):]
            elif choice == 2:
                data.insert(rng.below(len(data) + 1), rng.below(256))
            elif data:
                del data[rng.below(len(data))]
        return bytes(data)

    def test_decoders(self, grig, params):
        session = exchange_local(grig, params, 1, 2, SessionSettings(n=2, m=2, s=3, t=3, generator_length=3))
        corpus = [
            serialize_params(grig, params),
            session.transcript.alice_transmission,
            session.transcript.bob_transmission,
            WireMessage(MessageType.HELLO, encode_hello(grig.platform_id)).encode(),
            WireMessage(MessageType.TRANSMIT, session.transcript.alice_transmission).encode(),
            encode_error(FailureCode.OUT_OF_PHASE, "late"),
        ]
        decoders = [
            decode_frame,
            decode_hello,
            decode_error,
            lambda data: Transmission.decode(grig, data, Side.ALICE),
            lambda data: parse_params(grig, data),
        ]
        rng = SplitMix64(10_000)
        accepted = 0
        for i in range(10_000):
            if i % 4 == 0:
                data = bytes(rng.below(256) for _ in range(rng.below(48)))
            else:
                data = self.mutate(rng, corpus[rng.below(len(corpus))])
            for decode in decoders:
                try:
                    decode(data)
                    accepted += 1
                except ToolkitError:
                    pass
        assert accepted > 0

    def test_round_trip_of_accepted_transmissions(self, grig, params):
        session = exchange_local(grig, params, 3, 4, SessionSettings(n=2, m=2, s=3, t=3, generator_length=3))
        rng = SplitMix64(77)
        for _ in range(2_000):
            data = self.mutate(rng, session.transcript.bob_transmission)
            try:
                decoded = Transmission.decode(grig, data, Side.BOB)
            except ToolkitError:
                continue
            # only canonical encodings parse, so accepted bytes are reproduced exactly
            assert decoded.encode(grig) == data
