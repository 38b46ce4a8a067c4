"""
Tests for portraits: canonical form, arithmetic and the byte format.
"""

import pytest
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.errors import (
    PlatformMismatchError,
    PortraitFormatError,
    PortraitHeaderError,
    PortraitLeafError,
    PortraitNonCanonicalError,
    PortraitPermutationError,
    PortraitTagError,
    PortraitTrailingDataError,
    PortraitTruncatedError,
)
from src.platforms import basilica, grigorchuk
from src.portrait import (
    HEADER_SIZE,
    Leaf,
    Node,
    Portrait,
    SectionLeaf,
    canonical_portrait,
    deserialize_portrait,
    portrait,
    portrait_apply,
    portrait_invert,
    portrait_multiply,
    serialize_portrait,
)
from src.utils import SplitMix64


IDENTITY_BYTES = b"AG\x01\x01\x02\x05\x01\x00"
AB_BYTES = b"AG\x01\x01\x02\x05\x00\x01\x00\x01\x01\x01\x03"


@pytest.fixture
def grig():
    return grigorchuk()


@pytest.fixture
def bas():
    return basilica()


def canon(platform, text):
    return canonical_portrait(platform.group, platform.nucleus, platform.group.parse(text))


def parse_grig(data):
    return deserialize_portrait(data, grigorchuk().nucleus)


class TestCanonicalPortrait:
    """Tests for canonical_portrait."""

    def test_identity(self, grig):
        p = canon(grig, "")
        assert p.root == Leaf(grig.nucleus.identity)
        assert p.is_canonical

    def test_generator_expands_root(self, grig):
        p = canon(grig, "a")
        assert p.root == Node((1, 0), (Leaf(0), Leaf(0)))
        assert p.depth == 1

    def test_nucleus_elements_expand_once(self, bas):
        for nid in range(len(bas.nucleus)):
            if nid == bas.nucleus.identity:
                continue
            word = bas.group.word(bas.nucleus.elements[nid])
            root = canonical_portrait(bas.group, bas.nucleus, word).root
            assert isinstance(root, Node)
            assert root.perm == bas.nucleus.perms[nid]
            assert root.children == tuple(Leaf(s) for s in bas.nucleus.sections[nid])

    def test_fixed_depth_view(self, grig):
        p = portrait(grig.group, grig.group.parse("a"), 1)
        assert p.root == Node((1, 0), (SectionLeaf(()), SectionLeaf(())))
        assert not p.is_canonical

    def test_outside_nucleus(self, grig):
        p = canon(grig, "ab")
        assert p.root == Node((1, 0), (Leaf(1), Leaf(3)))
        assert p.depth == 1
        assert p.node_count == 3

    def test_spellings_agree(self, grig):
        reference = canon(grig, "ab")
        for text in ("abadadadad", "adadadadab", "dadadada ab", "ab bcd"):
            assert canon(grig, text) == reference, text

    def test_randomized_spellings(self, grig):
        group = grig.group
        relator = group.parse("adadadad").letters
        rng = SplitMix64(11)
        for _ in range(10):
            base = grig.random_word(rng, 6)
            cut = rng.below(len(base.letters) + 1)
            spelled = group.word(base.letters[:cut] + relator + base.letters[cut:])
            p1 = canonical_portrait(group, grig.nucleus, base)
            p2 = canonical_portrait(group, grig.nucleus, spelled)
            assert p1 == p2
            assert serialize_portrait(p1) == serialize_portrait(p2)

    def test_trivial_word(self, grig):
        assert canon(grig, "adadadad").root == Leaf(0)

    def test_mismatched_nucleus(self, grig, bas):
        with pytest.raises(PlatformMismatchError):
            canonical_portrait(grig.group, bas.nucleus, grig.group.parse("a"))


class TestPortraitArithmetic:
    """Tests for portrait_multiply, portrait_invert and portrait_apply."""

    def test_involution(self, grig):
        p = canon(grig, "a")
        assert portrait_multiply(p, p, grig.nucleus) == canon(grig, "")

    def test_identity_is_neutral(self, bas):
        p = canon(bas, "a b a b^-1 a")
        e = canon(bas, "")
        assert portrait_multiply(p, e, bas.nucleus) == p
        assert portrait_multiply(e, p, bas.nucleus) == p

    def test_klein_product(self, grig):
        assert portrait_multiply(canon(grig, "b"), canon(grig, "c"), grig.nucleus) == canon(grig, "d")

    @pytest.mark.parametrize("left,right", [
        ("ab", "ac"),
        ("abac", "adab"),
        ("b", "ab"),
        ("acab", "acab"),
    ])
    def test_multiply_matches_words(self, grig, left, right):
        product = portrait_multiply(canon(grig, left), canon(grig, right), grig.nucleus)
        assert product == canon(grig, left + right)

    @pytest.mark.parametrize("left,right", [
        ("ab", "ba"),
        ("a a b", "b^-1 a"),
        ("a b^-1 a b", "b b a^-1"),
    ])
    def test_multiply_basilica(self, bas, left, right):
        product = portrait_multiply(canon(bas, left), canon(bas, right), bas.nucleus)
        assert product == canon(bas, f"{left} {right}")

    @pytest.mark.parametrize("text", ["ab", "a b a^-1 b", "a a a b^-1"])
    def test_invert(self, bas, text):
        p = canon(bas, text)
        inverse = portrait_invert(p, bas.nucleus)
        assert inverse == canonical_portrait(bas.group, bas.nucleus, bas.group.invert(bas.group.parse(text)))
        assert portrait_multiply(p, inverse, bas.nucleus) == canon(bas, "")

    def test_apply_matches_words(self, bas):
        word = bas.group.parse("a b^-1 a a b")
        p = canonical_portrait(bas.group, bas.nucleus, word)
        for s in ("", "0", "1101", "010011", "111111"):
            assert portrait_apply(bas.group, bas.nucleus, p, s) == bas.group.apply(word, s)

    def test_cross_platform(self, grig, bas):
        with pytest.raises(PlatformMismatchError):
            portrait_multiply(canon(grig, "a"), canon(bas, "a"), grig.nucleus)


class TestPortraitBytes:
    """Tests for serialize_portrait and deserialize_portrait."""

    def test_identity_bytes(self, grig):
        assert serialize_portrait(canon(grig, "")) == IDENTITY_BYTES

    def test_golden_bytes(self, grig):
        assert serialize_portrait(canon(grig, "ab")) == AB_BYTES

    def test_round_trip(self, bas):
        p = canon(bas, "a b a b^-1 a^-1 b b")
        data = serialize_portrait(p)
        assert deserialize_portrait(data, bas.nucleus) == p

    def test_non_canonical_rejected(self, grig):
        with pytest.raises(PortraitFormatError):
            serialize_portrait(portrait(grig.group, grig.group.parse("ab"), 1))

    @pytest.mark.parametrize("data,error", [
        (b"XG\x01\x01\x02\x05\x01\x00", PortraitHeaderError),
        (b"AG\x02\x01\x02\x05\x01\x00", PortraitHeaderError),
        (b"AG\x01\x03\x02\x05\x01\x00", PortraitHeaderError),
        (b"AG\x01\x01\x03\x05\x01\x00", PortraitHeaderError),
        (b"AG\x01\x01\x02\x06\x01\x00", PortraitHeaderError),
        (b"AG\x01\x01", PortraitTruncatedError),
        (b"AG\x01\x01\x02\x05", PortraitTruncatedError),
        (b"AG\x01\x01\x02\x05\x01", PortraitTruncatedError),
        (AB_BYTES[:-1], PortraitTruncatedError),
        (b"AG\x01\x01\x02\x05\x07\x00", PortraitTagError),
        (b"AG\x01\x01\x02\x05\x00\x00\x00\x01\x00\x01\x00", PortraitPermutationError),
        (b"AG\x01\x01\x02\x05\x01\x05", PortraitLeafError),
        (IDENTITY_BYTES + b"\x00", PortraitTrailingDataError),
    ])
    def test_malformed(self, data, error):
        with pytest.raises(error):
            parse_grig(data)

    @pytest.mark.parametrize("data", [
        # identity spelled as a node over two identity leaves
        b"AG\x01\x01\x02\x05\x00\x00\x01\x01\x00\x01\x00",
        # a left as a leaf at the root
        b"AG\x01\x01\x02\x05\x01\x01",
        # ab with the child a expanded instead of kept as a leaf
        b"AG\x01\x01\x02\x05\x00\x01\x00" + b"\x00\x01\x00\x01\x00\x01\x00" + b"\x01\x03",
        # ab with the child c expanded
        b"AG\x01\x01\x02\x05\x00\x01\x00\x01\x01" + b"\x00\x00\x01\x01\x01\x01\x04",
    ])
    def test_non_canonical_tree_rejected(self, data):
        with pytest.raises(PortraitNonCanonicalError):
            parse_grig(data)

    def test_non_canonical_is_a_format_error(self):
        assert issubclass(PortraitNonCanonicalError, PortraitFormatError)

    def test_fuzz(self, grig):
        nucleus = grig.nucleus
        rng = SplitMix64(2024)
        for _ in range(300):
            size = rng.below(24)
            body = bytes(rng.below(8) for _ in range(size))
            try:
                p = parse_grig(IDENTITY_BYTES[:HEADER_SIZE] + body)
            except PortraitFormatError:
                continue
            assert isinstance(p, Portrait)
            assert serialize_portrait(p) == IDENTITY_BYTES[:HEADER_SIZE] + body
            assert_canonical_shape(p, nucleus)

    def test_accepted_trees_are_canonical(self, grig):
        group = grig.group
        rng = SplitMix64(77)
        for _ in range(50):
            p = canonical_portrait(group, grig.nucleus, grig.random_word(rng, 1 + rng.below(12)))
            assert_canonical_shape(p, grig.nucleus)
            assert parse_grig(serialize_portrait(p)) == p


def assert_canonical_shape(p, nucleus):
    """The root is a leaf only for e, and no node below it is a nucleus element."""
    if isinstance(p.root, Leaf):
        assert p.root.nucleus_id == nucleus.identity
        return
    stack = [(p.root, 0)]
    while stack:
        node, depth = stack.pop()
        if not isinstance(node, Node):
            continue
        if all(isinstance(c, Leaf) for c in node.children):
            hit = nucleus.by_signature(node.perm, tuple(c.nucleus_id for c in node.children))
            assert hit is None or (depth == 0 and hit != nucleus.identity)
        stack.extend((c, depth + 1) for c in node.children)
