"""
Tests for section closures, element identification and the nucleus.
"""

import pytest
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.automaton import AutomatonGroup, GeneratorWord, MealyAutomaton
from src.config import ContractionBudget
from src.contraction import compute_nucleus, explore, identify, partition
from src.errors import BudgetExhaustedError
from src.platforms import GOmegaSpec, basilica, g_omega, grigorchuk, hanoi, universal


PLATFORMS = {
    "grigorchuk": lambda: grigorchuk(),
    "g_omega": lambda: g_omega(GOmegaSpec("", "012")),
    "basilica": lambda: basilica(),
    "universal": lambda: universal(),
    "hanoi": lambda: hanoi(3),
}

NUCLEUS_SIZES = {
    "grigorchuk": 5,
    "g_omega": 5,
    "basilica": 7,
    "universal": 5,
    "hanoi": 4,
}


def as_word(group, letters):
    return GeneratorWord(group.platform_id, letters)


class TestNucleus:
    """Tests for compute_nucleus on the built-in platforms."""

    @pytest.mark.parametrize("name", sorted(NUCLEUS_SIZES))
    def test_size(self, name):
        platform = PLATFORMS[name]()
        assert len(platform.nucleus) == NUCLEUS_SIZES[name]

    def test_grigorchuk_elements(self):
        platform = grigorchuk()
        group = platform.group
        names = {group.format(letters) for letters in platform.nucleus.elements}
        assert names == {"e", "a", "b", "c", "d"}

    def test_basilica_elements(self):
        platform = basilica()
        group = platform.group
        nucleus = platform.nucleus
        for text in ("e", "a", "b", "a^-1", "b^-1", "a b^-1", "b a^-1"):
            assert nucleus.lookup(group.parse(text).letters) is not None, text
        assert nucleus.lookup(group.parse("ab").letters) is None

    def test_identity_first(self):
        nucleus = basilica().nucleus
        assert nucleus.identity == 0
        assert nucleus.elements[0] == ()
        assert nucleus.perms[0] == (0, 1)
        assert nucleus.sections[0] == (0, 0)

    def test_identity_only_automaton(self):
        automaton = MealyAutomaton.from_tables(2, ["e"], {"e": ["e", "e"]}, {"e": [0, 1]})
        nucleus = compute_nucleus(AutomatonGroup(automaton, platform_id=0x7E))
        assert len(nucleus) == 1
        assert nucleus.elements == ((),)

    @pytest.mark.parametrize("name", sorted(NUCLEUS_SIZES))
    def test_tables_match_words(self, name):
        platform = PLATFORMS[name]()
        group, nucleus = platform.group, platform.nucleus
        for i, letters in enumerate(nucleus.elements):
            perm, children = group.first_level(letters)
            assert nucleus.perms[i] == perm
            for x, child in enumerate(children):
                target = nucleus.elements[nucleus.sections[i][x]]
                assert group.equal(as_word(group, child), as_word(group, target))
            inverse = nucleus.elements[nucleus.inverses[i]]
            assert group.is_trivial(as_word(group, group.reduce_letters(letters + inverse)))
            assert nucleus.inverses[nucleus.inverses[i]] == i

    def test_product_table(self):
        platform = basilica()
        group, nucleus = platform.group, platform.nucleus
        for i, x in enumerate(nucleus.elements):
            for j, y in enumerate(nucleus.elements):
                k = nucleus.products[i][j]
                if k is not None:
                    assert group.equal(as_word(group, group.reduce_letters(x + y)), as_word(group, nucleus.elements[k]))

    def test_contains_generators(self):
        platform = universal()
        group, nucleus = platform.group, platform.nucleus
        for g in group.generators():
            assert nucleus.lookup(g.letters) is not None

    def test_by_signature(self):
        nucleus = grigorchuk().nucleus
        for i in range(len(nucleus)):
            assert nucleus.by_signature(nucleus.perms[i], nucleus.sections[i]) == i


class TestClosure:
    """Tests for explore, partition and identify."""

    def test_explore_closure(self):
        group = grigorchuk().group
        graph = explore(group, [group.parse("b").letters])
        names = {group.format(w) for w in graph}
        assert names == {"e", "a", "b", "c", "d"}

    def test_explore_budget(self):
        group = basilica().group
        word = group.parse("a b a^-1 b^-1").letters
        with pytest.raises(BudgetExhaustedError):
            explore(group, [word], ContractionBudget(max_closure=1))

    def test_partition_merges_equal_elements(self):
        group = grigorchuk().group
        w = group.parse("adadadad").letters
        graph = explore(group, [w, ()])
        classes = partition(graph)
        assert classes[w] == classes[()]

    def test_identify(self):
        platform = grigorchuk()
        group, nucleus = platform.group, platform.nucleus
        trivial = group.parse("adadadad").letters
        outside = group.parse("ab").letters
        _, ids = identify(group, nucleus, [trivial, outside])
        assert ids[trivial] == nucleus.identity
        assert ids[outside] is None
