"""
Section closures, element identification and the nucleus of a contracting group.

Two reduced words denote the same automorphism iff they are bisimilar in
the graph word -> (root permutation, sections); the coarsest such
partition is computed by Moore-style refinement.
"""

import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx

from .automaton import AutomatonGroup, Letters, Permutation, symbol
from .config import ContractionBudget
from .errors import BudgetExhaustedError, NucleusError


logger = logging.getLogger(__name__)

SectionGraph = Dict[Letters, Tuple[Permutation, Tuple[Letters, ...]]]

MAX_NUCLEUS_SIZE = 255


def _word_order(letters: Letters) -> Tuple[int, Letters]:
    return (len(letters), letters)


def explore(
    group: AutomatonGroup,
    roots: Iterable[Letters],
    budget: Optional[ContractionBudget] = None,
) -> SectionGraph:
    """Closure of ``roots`` under first-level sections, breadth first."""
    budget = budget or ContractionBudget()
    frontier = sorted({group.reduce_letters(r) for r in roots}, key=_word_order)
    seen: Set[Letters] = set(frontier)
    graph: SectionGraph = {}
    depth = 0
    while frontier:
        if depth > budget.max_depth:
            raise BudgetExhaustedError(f"section closure deeper than {budget.max_depth} levels")
        following: List[Letters] = []
        for letters in frontier:
            perm, children = group.first_level(letters)
            graph[letters] = (perm, children)
            for child in children:
                if child not in seen:
                    seen.add(child)
                    if len(seen) > budget.max_closure:
                        raise BudgetExhaustedError(f"section closure exceeded {budget.max_closure} elements")
                    following.append(child)
        frontier = following
        depth += 1
    return graph


def partition(graph: SectionGraph) -> Dict[Letters, int]:
    """Class ids such that two words share a class iff they act identically."""
    perm_ids: Dict[Permutation, int] = {}
    classes = {w: perm_ids.setdefault(perm, len(perm_ids)) for w, (perm, _) in graph.items()}
    count = len(perm_ids)
    while True:
        signatures: Dict[Tuple[int, Tuple[int, ...]], int] = {}
        refined = {}
        for w, (_, children) in graph.items():
            sig = (classes[w], tuple(classes[c] for c in children))
            refined[w] = signatures.setdefault(sig, len(signatures))
        if len(signatures) == count:
            return refined
        classes, count = refined, len(signatures)


def _quotient(graph: SectionGraph, classes: Mapping[Letters, int]) -> nx.DiGraph:
    quotient = nx.DiGraph()
    for w, (_, children) in graph.items():
        quotient.add_node(classes[w])
        for child in children:
            quotient.add_edge(classes[w], classes[child])
    return quotient


def _recurrent_classes(quotient: nx.DiGraph) -> Set[int]:
    """Classes lying on a cycle of the section graph, plus everything below them."""
    cyclic: Set[int] = set()
    for component in nx.strongly_connected_components(quotient):
        if len(component) > 1 or any(quotient.has_edge(v, v) for v in component):
            cyclic |= component
    reachable = set(cyclic)
    for v in cyclic:
        reachable |= nx.descendants(quotient, v)
    return reachable


@dataclass(frozen=True)
class Nucleus:
    """
    Finite section-closed, inverse-closed set of elements, with its tables.

    Element 0 is always the identity. ``products[i][j]`` is the id of
    element_i * element_j, or None when the product leaves the nucleus.
    """
    platform_id: int
    alphabet_size: int
    elements: Tuple[Letters, ...]
    identity: int
    sections: Tuple[Tuple[int, ...], ...]
    perms: Tuple[Permutation, ...]
    inverses: Tuple[int, ...]
    products: Tuple[Tuple[Optional[int], ...], ...]
    spellings: Mapping[Letters, int] = field(default_factory=dict, compare=False, repr=False)
    signatures: Mapping[Tuple[Permutation, Tuple[int, ...]], int] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __len__(self) -> int:
        return len(self.elements)

    def lookup(self, letters: Letters) -> Optional[int]:
        """Id of a spelling seen while building the nucleus, if any."""
        return self.spellings.get(letters)

    def by_signature(self, perm: Permutation, children: Tuple[int, ...]) -> Optional[int]:
        return self.signatures.get((perm, children))


def compute_nucleus(group: AutomatonGroup, budget: Optional[ContractionBudget] = None) -> Nucleus:
    """
    Nucleus of a contracting automaton group.

    Starts from the closure of the identity, the generators and their
    inverses; then repeatedly adds every element that lies on (or below)
    a cycle of the section graph of N ∪ N·N, until the set stops growing.
    """
    budget = budget or ContractionBudget()
    automaton = group.automaton
    seeds = {()}
    for s in range(len(automaton.states)):
        if s != automaton.identity:
            seeds.add(group.reduce_letters((symbol(s),)))
            seeds.add(group.reduce_letters((symbol(s, True),)))

    members: Set[Letters] = set(explore(group, seeds, budget))
    previous = -1
    rounds = 0
    while True:
        rounds += 1
        base = explore(group, members, budget)
        reps = _representatives(base, partition(base))
        candidates = set(members)
        candidates.update(group.reduce_letters(x + y) for x in reps for y in reps)
        graph = explore(group, candidates, budget)
        classes = partition(graph)
        keep = _recurrent_classes(_quotient(graph, classes))
        keep |= {classes[w] for w in members}
        members = {w for w in graph if classes[w] in keep}
        logger.debug(
            "nucleus round %d: %d candidates, %d words, %d elements",
            rounds, len(candidates), len(graph), len(keep),
        )
        if len(keep) > MAX_NUCLEUS_SIZE:
            raise NucleusError(f"nucleus exceeds {MAX_NUCLEUS_SIZE} elements; platform may not be contracting")
        if len(keep) == previous:
            break
        previous = len(keep)

    return _build_tables(group, members, budget)


def _representatives(graph: SectionGraph, classes: Mapping[Letters, int]) -> List[Letters]:
    best: Dict[int, Letters] = {}
    for w in graph:
        c = classes[w]
        if c not in best or _word_order(w) < _word_order(best[c]):
            best[c] = w
    return sorted(best.values(), key=_word_order)


def _build_tables(group: AutomatonGroup, members: Set[Letters], budget: ContractionBudget) -> Nucleus:
    member_graph = explore(group, members, budget)
    member_classes = partition(member_graph)
    reps = _representatives({w: member_graph[w] for w in members}, member_classes)

    roots = set(members)
    roots.update(group.invert_letters(r) for r in reps)
    roots.update(group.reduce_letters(x + y) for x in reps for y in reps)
    graph = explore(group, roots, budget)
    classes = partition(graph)
    class_to_id = {classes[rep]: i for i, rep in enumerate(reps)}
    if reps[0] != ():
        raise NucleusError("identity missing from nucleus")

    try:
        sections = tuple(
            tuple(class_to_id[classes[child]] for child in graph[rep][1]) for rep in reps
        )
        inverses = tuple(class_to_id[classes[group.invert_letters(rep)]] for rep in reps)
    except KeyError as exc:
        raise NucleusError("nucleus is not closed under sections and inversion") from exc
    perms = tuple(graph[rep][0] for rep in reps)
    products = tuple(
        tuple(class_to_id.get(classes[group.reduce_letters(x + y)]) for y in reps) for x in reps
    )
    spellings = {w: class_to_id[classes[w]] for w in graph if classes[w] in class_to_id}
    signatures = {(perms[i], sections[i]): i for i in range(len(reps))}
    logger.debug("nucleus of %s: %d elements", group.name, len(reps))
    return Nucleus(
        platform_id=group.platform_id,
        alphabet_size=group.alphabet_size,
        elements=tuple(reps),
        identity=0,
        sections=sections,
        perms=perms,
        inverses=inverses,
        products=products,
        spellings=MappingProxyType(spellings),
        signatures=MappingProxyType(signatures),
    )


def identify(
    group: AutomatonGroup,
    nucleus: Nucleus,
    roots: Sequence[Letters],
    budget: Optional[ContractionBudget] = None,
) -> Tuple[SectionGraph, Dict[Letters, Optional[int]]]:
    """
    Section graph of ``roots`` together with, for every word in it, the
    nucleus id of the element it denotes (None when outside the nucleus).
    """
    graph = explore(group, list(roots) + list(nucleus.elements), budget)
    classes = partition(graph)
    class_ids = {classes[rep]: i for i, rep in enumerate(nucleus.elements)}
    return graph, {w: class_ids.get(c) for w, c in classes.items()}
