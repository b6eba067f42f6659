"""Identification up to renaming (and element-internal permutation in the
collection modes) must be insensitive to how the input names its variables."""

import random

from stpchc.pattern_core import Mode, TuplePattern, const_atom, var_atom

from helpers import random_solvable


def rename_atoms(elements, perm):
    out = []
    for el in elements:
        atoms = []
        for a in el:
            if a < 0:
                atoms.append(a)
            else:
                atoms.append(perm[a >> 1] << 1 | (a & 1))
        out.append(tuple(atoms))
    return tuple(out)


def test_sequence_patterns_identified_up_to_renaming():
    rng = random.Random(1234)
    for _ in range(300):
        t = random_solvable(rng, max_arity=4, max_measure=12)
        k = len(t.variables())
        if k < 2:
            continue
        perm = list(range(k))
        rng.shuffle(perm)
        renamed = rename_atoms(t.elements, perm)
        assert TuplePattern(renamed) == t


def test_collection_patterns_identified_up_to_renaming_and_permutation():
    rng = random.Random(99)
    for mode in (Mode.SET, Mode.MULTISET):
        for _ in range(300):
            arity = rng.randint(1, 3)
            nvars = rng.randint(1, 4)
            elements = []
            for _ in range(arity):
                size = rng.randint(0, 3)
                el = []
                for _ in range(size):
                    if rng.random() < 0.3:
                        el.append(const_atom(rng.randint(0, 2)))
                    else:
                        el.append(var_atom(rng.randrange(nvars)))
                if mode is Mode.SET:
                    el = list(dict.fromkeys(el))
                elements.append(tuple(el))
            t = TuplePattern(tuple(elements), mode)
            used = sorted({a >> 1 for el in t.elements for a in el if a >= 0})
            if len(used) < 2:
                continue
            perm_map = {v: v for v in range(max(used) + 1)}
            shuffled = used[:]
            rng.shuffle(shuffled)
            for v, w in zip(used, shuffled):
                perm_map[v] = w
            renamed = []
            for el in t.elements:
                atoms = [
                    a if a < 0 else var_atom(perm_map[a >> 1]) for a in el
                ]
                rng.shuffle(atoms)
                renamed.append(tuple(atoms))
            assert TuplePattern(tuple(renamed), mode) == t, (t.elements, renamed)
