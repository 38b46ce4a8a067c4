"""
Portraits: finite decorated trees describing tree automorphisms.

A canonical portrait of a nontrivial element always expands the root,
then expands each branch below it exactly until the section there is a
nucleus element. The identity is a single leaf. Equal group elements give
equal trees and equal bytes.

Byte layout::

    'A' 'G' | version 0x01 | platform id | k | nucleus size
    preorder node records:
        0x00 internal: k permutation bytes, then k children in letter order
        0x01 leaf:     one nucleus id byte
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple, Union

from .automaton import (
    AutomatonGroup,
    GeneratorWord,
    Letters,
    LetterString,
    Permutation,
    compose_permutations,
    invert_permutation,
)
from .config import ContractionBudget
from .contraction import Nucleus, identify
from .errors import (
    BudgetExhaustedError,
    NucleusError,
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


MAGIC = b"AG"
FORMAT_VERSION = 0x01
HEADER_SIZE = 6
TAG_INTERNAL = 0x00
TAG_LEAF = 0x01
MAX_PARSE_DEPTH = 512


@dataclass(frozen=True)
class Leaf:
    """A nucleus element, by id."""
    nucleus_id: int


@dataclass(frozen=True)
class SectionLeaf:
    """A section word at the frontier of a fixed-depth portrait."""
    letters: Letters


@dataclass(frozen=True)
class Node:
    perm: Permutation
    children: Tuple["PortraitNode", ...]


PortraitNode = Union[Leaf, SectionLeaf, Node]


@dataclass(frozen=True)
class Portrait:
    platform_id: int
    alphabet_size: int
    nucleus_size: int
    root: PortraitNode

    @property
    def is_canonical(self) -> bool:
        return all(not isinstance(n, SectionLeaf) for n in self.nodes())

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Node):
                stack.extend(reversed(node.children))

    @property
    def node_count(self) -> int:
        return sum(1 for _ in self.nodes())

    @property
    def depth(self) -> int:
        def walk(node: PortraitNode) -> int:
            if isinstance(node, Node):
                return 1 + max(walk(c) for c in node.children)
            return 0
        return walk(self.root)


def portrait(group: AutomatonGroup, word: GeneratorWord, depth: int, nucleus_size: int = 0) -> Portrait:
    """Node permutations down to ``depth`` and the section words below them."""
    group.check(word)
    if depth < 0:
        raise ValueError("depth must be non-negative")

    def build(letters: Letters, remaining: int) -> PortraitNode:
        if remaining == 0:
            return SectionLeaf(letters)
        perm, children = group.first_level(letters)
        return Node(perm, tuple(build(c, remaining - 1) for c in children))

    return Portrait(group.platform_id, group.alphabet_size, nucleus_size, build(word.letters, depth))


def canonical_portrait(
    group: AutomatonGroup,
    nucleus: Nucleus,
    word: GeneratorWord,
    budget: Optional[ContractionBudget] = None,
) -> Portrait:
    """
    Canonical portrait of the element ``word`` spells.

    The root is expanded for every nontrivial element; below it each
    branch stops at the first section that is a nucleus element.

    Args:
        group: Automaton group the word belongs to
        nucleus: Nucleus of the same platform
        word: Any spelling of the element
        budget: Depth and closure bounds (defaults if None)

    Returns:
        Portrait that depends only on the element, not on the spelling

    Raises:
        BudgetExhaustedError: The expansion exceeded the budget
        NucleusError: A section cycle left the nucleus
    """
    group.check(word)
    if nucleus.platform_id != group.platform_id:
        raise PlatformMismatchError("nucleus and group belong to different platforms")
    budget = budget or ContractionBudget()

    def wrap(root: PortraitNode) -> Portrait:
        return Portrait(group.platform_id, group.alphabet_size, len(nucleus), root)

    hit = nucleus.lookup(word.letters)
    if hit is not None:
        return wrap(_root_form(Leaf(hit), nucleus))

    graph, ids = identify(group, nucleus, [word.letters], budget)
    memo: Dict[Letters, PortraitNode] = {}
    path: Set[Letters] = set()

    def build(letters: Letters, depth: int) -> PortraitNode:
        nid = ids[letters]
        if nid is not None:
            return Leaf(nid)
        if letters in memo:
            return memo[letters]
        if letters in path:
            raise NucleusError("section cycle outside the nucleus; nucleus incomplete or platform not contracting")
        if depth >= budget.max_depth:
            raise BudgetExhaustedError(f"canonical portrait deeper than {budget.max_depth}")
        perm, children = graph[letters]
        path.add(letters)
        node = Node(perm, tuple(build(c, depth + 1) for c in children))
        path.discard(letters)
        memo[letters] = node
        return node

    return wrap(_root_form(build(word.letters, 0), nucleus))


def _check_operands(nucleus: Nucleus, *portraits: Portrait) -> None:
    for p in portraits:
        if p.platform_id != nucleus.platform_id or p.nucleus_size != len(nucleus):
            raise PlatformMismatchError(
                f"portrait of platform {p.platform_id:#04x} does not match nucleus of {nucleus.platform_id:#04x}"
            )


def _unfold(node: PortraitNode, nucleus: Nucleus) -> Tuple[Permutation, Tuple[PortraitNode, ...]]:
    if isinstance(node, Leaf):
        return nucleus.perms[node.nucleus_id], tuple(Leaf(s) for s in nucleus.sections[node.nucleus_id])
    if isinstance(node, Node):
        return node.perm, node.children
    raise NucleusError("portrait arithmetic needs canonical operands")


def _collapse(perm: Permutation, children: Tuple[PortraitNode, ...], nucleus: Nucleus) -> PortraitNode:
    if all(isinstance(c, Leaf) for c in children):
        hit = nucleus.by_signature(perm, tuple(c.nucleus_id for c in children))
        if hit is not None:
            return Leaf(hit)
    return Node(perm, children)


def _root_form(node: PortraitNode, nucleus: Nucleus) -> PortraitNode:
    """Expand a nontrivial nucleus leaf at the root by one level."""
    if isinstance(node, Leaf) and node.nucleus_id != nucleus.identity:
        perm, children = _unfold(node, nucleus)
        return Node(perm, children)
    if isinstance(node, Node):
        collapsed = _collapse(node.perm, node.children, nucleus)
        if isinstance(collapsed, Leaf) and collapsed.nucleus_id == nucleus.identity:
            return collapsed
    return node


def portrait_multiply(
    p1: Portrait,
    p2: Portrait,
    nucleus: Nucleus,
    budget: Optional[ContractionBudget] = None,
) -> Portrait:
    """Canonical portrait of p1 * p2 (p2 acts first)."""
    _check_operands(nucleus, p1, p2)
    budget = budget or ContractionBudget()
    identity = nucleus.identity
    memo: Dict[Tuple[int, int], PortraitNode] = {}

    def mul(u: PortraitNode, v: PortraitNode, depth: int) -> PortraitNode:
        if isinstance(u, Leaf) and u.nucleus_id == identity:
            return v
        if isinstance(v, Leaf) and v.nucleus_id == identity:
            return u
        key = None
        if isinstance(u, Leaf) and isinstance(v, Leaf):
            product = nucleus.products[u.nucleus_id][v.nucleus_id]
            if product is not None:
                return Leaf(product)
            key = (u.nucleus_id, v.nucleus_id)
            if key in memo:
                return memo[key]
        if depth > budget.max_depth:
            raise BudgetExhaustedError(f"portrait product deeper than {budget.max_depth}")
        u_perm, u_children = _unfold(u, nucleus)
        v_perm, v_children = _unfold(v, nucleus)
        perm = compose_permutations(u_perm, v_perm)
        children = tuple(
            mul(u_children[v_perm[x]], v_children[x], depth + 1) for x in range(len(v_perm))
        )
        result = _collapse(perm, children, nucleus)
        if key is not None:
            memo[key] = result
        return result

    root = _root_form(mul(p1.root, p2.root, 0), nucleus)
    return Portrait(p1.platform_id, p1.alphabet_size, p1.nucleus_size, root)


def portrait_invert(p: Portrait, nucleus: Nucleus) -> Portrait:
    _check_operands(nucleus, p)

    def inv(node: PortraitNode) -> PortraitNode:
        if isinstance(node, Leaf):
            return Leaf(nucleus.inverses[node.nucleus_id])
        if not isinstance(node, Node):
            raise NucleusError("portrait arithmetic needs canonical operands")
        back = invert_permutation(node.perm)
        return Node(back, tuple(inv(node.children[back[y]]) for y in range(len(back))))

    return Portrait(p.platform_id, p.alphabet_size, p.nucleus_size, _root_form(inv(p.root), nucleus))


def portrait_apply(group: AutomatonGroup, nucleus: Nucleus, p: Portrait, string: LetterString) -> LetterString:
    """Act on a letter string with the automorphism a portrait describes."""
    letters, as_text = group._letters(string)
    image: List[int] = []
    node = p.root
    for i, x in enumerate(letters):
        if isinstance(node, Node):
            image.append(node.perm[x])
            node = node.children[x]
            continue
        rest = letters[i:]
        word_letters = nucleus.elements[node.nucleus_id] if isinstance(node, Leaf) else node.letters
        image.extend(group.apply(GeneratorWord(group.platform_id, word_letters), rest))
        break
    if as_text:
        return "".join(str(y) for y in image)
    return tuple(image)


# --- bytes ------------------------------------------------------------------

def serialize_portrait(p: Portrait) -> bytes:
    if not (0 <= p.platform_id <= 255 and 0 < p.alphabet_size <= 255 and 0 <= p.nucleus_size <= 255):
        raise PortraitFormatError("header fields must fit in one byte each")
    out = bytearray(MAGIC)
    out += bytes((FORMAT_VERSION, p.platform_id, p.alphabet_size, p.nucleus_size))
    stack: List[PortraitNode] = [p.root]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            out += bytes((TAG_LEAF, node.nucleus_id))
        elif isinstance(node, Node):
            out.append(TAG_INTERNAL)
            out += bytes(node.perm)
            stack.extend(reversed(node.children))
        else:
            raise PortraitFormatError("only canonical portraits can be serialized")
    return bytes(out)


def read_portrait(data: bytes, offset: int, nucleus: Nucleus) -> Tuple[Portrait, int]:
    """
    Parse one canonical portrait starting at ``offset``.

    Args:
        data: Buffer holding the portrait
        offset: Position of the 'AG' header
        nucleus: Nucleus of the platform the bytes must belong to

    Returns:
        The portrait and the offset just past it
    """
    platform_id = nucleus.platform_id
    alphabet_size = nucleus.alphabet_size
    nucleus_size = len(nucleus)
    header = data[offset:offset + HEADER_SIZE]
    if len(header) < HEADER_SIZE:
        raise PortraitTruncatedError("portrait header truncated")
    if header[:2] != MAGIC:
        raise PortraitHeaderError(f"bad magic {bytes(header[:2])!r}")
    if header[2] != FORMAT_VERSION:
        raise PortraitHeaderError(f"unsupported format version {header[2]}")
    if header[3] != platform_id:
        raise PortraitHeaderError(f"platform id {header[3]:#04x}, expected {platform_id:#04x}")
    if header[4] != alphabet_size:
        raise PortraitHeaderError(f"alphabet size {header[4]}, expected {alphabet_size}")
    if header[5] != nucleus_size:
        raise PortraitHeaderError(f"nucleus size {header[5]}, expected {nucleus_size}")

    k = alphabet_size
    identity_perm = list(range(k))
    end = len(data)

    def node(pos: int, depth: int) -> Tuple[PortraitNode, int]:
        if depth > MAX_PARSE_DEPTH:
            raise PortraitFormatError(f"portrait nested deeper than {MAX_PARSE_DEPTH}")
        if pos >= end:
            raise PortraitTruncatedError("node record missing")
        tag = data[pos]
        if tag == TAG_LEAF:
            if pos + 1 >= end:
                raise PortraitTruncatedError("leaf record truncated")
            nid = data[pos + 1]
            if nid >= nucleus_size:
                raise PortraitLeafError(f"leaf id {nid} outside nucleus of size {nucleus_size}")
            if depth == 0 and nid != nucleus.identity:
                raise PortraitNonCanonicalError(f"root leaf {nid} must be expanded one level")
            return Leaf(nid), pos + 2
        if tag == TAG_INTERNAL:
            start = pos
            perm = tuple(data[pos + 1:pos + 1 + k])
            if len(perm) < k:
                raise PortraitTruncatedError("permutation truncated")
            if sorted(perm) != identity_perm:
                raise PortraitPermutationError(f"not a permutation of 0..{k - 1}: {list(perm)}")
            pos += 1 + k
            children = []
            for _ in range(k):
                child, pos = node(pos, depth + 1)
                children.append(child)
            if all(isinstance(c, Leaf) for c in children):
                hit = nucleus.by_signature(perm, tuple(c.nucleus_id for c in children))
                # below the root every nucleus element is a leaf; at the root only e is
                if hit is not None and (depth > 0 or hit == nucleus.identity):
                    raise PortraitNonCanonicalError(
                        f"node at offset {start} is nucleus element {hit} and must be a leaf"
                    )
            return Node(perm, tuple(children)), pos
        raise PortraitTagError(f"unknown node tag {tag:#04x} at offset {pos}")

    root, pos = node(offset + HEADER_SIZE, 0)
    return Portrait(platform_id, alphabet_size, nucleus_size, root), pos


def deserialize_portrait(data: bytes, nucleus: Nucleus) -> Portrait:
    """Parse a whole buffer; rejects trailing bytes and non-canonical trees."""
    p, pos = read_portrait(data, 0, nucleus)
    if pos != len(data):
        raise PortraitTrailingDataError(f"{len(data) - pos} bytes after the portrait")
    return p
