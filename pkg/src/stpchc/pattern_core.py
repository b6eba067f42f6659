"""Tuple patterns and their decision procedures.

A tuple pattern is a tuple of pattern strings over constants, variables and
reversed variables; it denotes the set of tuples of sequences obtained by
substituting sequences for the variables (component-wise disjoint union or
multiset sum in the collection modes).

This module provides the data model, the pattern-side reduction relation with
its rule extensions (constants, postfix, reverse), and the polynomial
decision procedures built on it: solvability, membership, inclusion,
equivalence, and the construction of two-row identifying learning data.

Atom encoding
-------------
Atoms are packed into ints to keep the reduction loops allocation-light:
constants are negative (`-(letter+1)`), variables are even non-negatives
(`index << 1`), reversed variables odd (`index << 1 | 1`).  The experimental
sort wrapper, which only exists for a regression test, is the one non-int
atom: `('s', inner_atoms)`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .alphabet import LETTER_A, LETTER_B, char_to_letter, letter_to_char
from .data import Cell, LearningData

Atom = object  # int, or ('s', tuple) for the test-only sort wrapper
Element = tuple


class NotSolvableError(ValueError):
    """Raised when a decision procedure requires a solvable pattern."""


class PatternSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (offset {position})")
        self.position = position


# ---------------------------------------------------------------------------
# atoms

def const_atom(letter: int) -> int:
    if letter < 0:
        raise ValueError("letters are non-negative")
    return -(letter + 1)


def var_atom(index: int, reverse: bool = False) -> int:
    return index << 1 | (1 if reverse else 0)


def sort_atom(inner: Element) -> Atom:
    return ("s", tuple(inner))


def atom_is_const(a: Atom) -> bool:
    return isinstance(a, int) and a < 0


def atom_is_var(a: Atom) -> bool:
    return isinstance(a, int) and a >= 0


def atom_is_sort(a: Atom) -> bool:
    return isinstance(a, tuple)


def atom_letter(a: int) -> int:
    return -a - 1


def atom_index(a: int) -> int:
    return a >> 1


def atom_is_reversed(a: Atom) -> bool:
    return isinstance(a, int) and a >= 0 and (a & 1) == 1


def reverse_element(el: Element) -> Element:
    """Reverse of a pattern string: atoms reversed, each variable flipped."""
    out = []
    for a in reversed(el):
        if atom_is_const(a):
            out.append(a)
        elif atom_is_var(a):
            out.append(a ^ 1)
        else:
            raise ValueError("sorted groups have no reverse form")
    return tuple(out)


def _atom_vars(a: Atom):
    if atom_is_var(a):
        yield atom_index(a)
    elif atom_is_sort(a):
        for b in a[1]:
            yield from _atom_vars(b)


def _rename_atom(a: Atom, ren: Mapping[int, int]) -> Atom:
    if atom_is_const(a):
        return a
    if atom_is_var(a):
        return var_atom(ren[atom_index(a)], atom_is_reversed(a))
    return sort_atom(tuple(_rename_atom(b, ren) for b in a[1]))


def _atom_key(a: Atom):
    # canonical in-element order for collection modes: constants, then vars
    if atom_is_const(a):
        return (0, atom_letter(a), 0)
    if atom_is_var(a):
        return (1, atom_index(a), a & 1)
    return (2, a[1], 0)


# ---------------------------------------------------------------------------
# tuple patterns

class Mode(Enum):
    SEQUENCE = "sequence"
    SET = "set"
    MULTISET = "multiset"


def _variables(elements) -> list[int]:
    seen: list[int] = []
    for el in elements:
        for a in el:
            for v in _atom_vars(a):
                if v not in seen:
                    seen.append(v)
    return seen


def _canonical_sequence(elements):
    order = _variables(elements)
    ren = {v: i for i, v in enumerate(order)}
    return tuple(tuple(_rename_atom(a, ren) for a in el) for el in elements)


def _canonical_collection(elements):
    # Elements are atom multisets; variable numbering is whatever renaming
    # makes the sorted form lexicographically least.  Falls back to
    # first-occurrence order beyond 7 variables.
    vars_ = _variables(elements)
    k = len(vars_)

    def form(ren):
        return tuple(
            tuple(sorted((_rename_atom(a, ren) for a in el), key=_atom_key))
            for el in elements
        )

    base = form({v: i for i, v in enumerate(vars_)})
    if k <= 1:
        return base
    if k > 7:
        return base
    best = None
    for perm in itertools.permutations(range(k)):
        cand = form({v: perm[i] for i, v in enumerate(vars_)})
        key = tuple(tuple(_atom_key(a) for a in el) for el in cand)
        if best is None or key < best[0]:
            best = (key, cand)
    return best[1]


@dataclass(frozen=True)
class TuplePattern:
    """A tuple of pattern strings, identified up to variable renaming
    (and up to in-element permutation in the collection modes)."""

    elements: tuple
    mode: Mode = Mode.SEQUENCE

    def __post_init__(self):
        els = tuple(tuple(el) for el in self.elements)
        if self.mode is Mode.SEQUENCE:
            els = _canonical_sequence(els)
        else:
            els = _canonical_collection(els)
        object.__setattr__(self, "elements", els)

    @property
    def arity(self) -> int:
        return len(self.elements)

    def variables(self) -> list[int]:
        return _variables(self.elements)

    def has_reverse(self) -> bool:
        return any(atom_is_reversed(a) for el in self.elements for a in el)

    def has_constants(self) -> bool:
        return any(atom_is_const(a) for el in self.elements for a in el)

    def __str__(self) -> str:
        return render_pattern(self)


def measure(t: TuplePattern | Sequence[Element]) -> int:
    """Total atom count plus arity."""
    elements = t.elements if isinstance(t, TuplePattern) else t

    def atom_size(a: Atom) -> int:
        return 1 if isinstance(a, int) else 1 + sum(atom_size(b) for b in a[1])

    return sum(atom_size(a) for el in elements for a in el) + len(elements)


# ---------------------------------------------------------------------------
# text form

_CONST_SINGLES = set("abcdefgh")


def parse_pattern(
    text: str, mode: Mode = Mode.SEQUENCE, allow_reverse: bool = True
) -> TuplePattern:
    """Parse "(p1, ..., pn)".  Tokens: digits / a..h / uppercase / quoted
    letters are constants, i..z with an optional digit suffix are variables,
    `ident^R` reverses, `eps` is the empty element."""
    pos = 0
    n = len(text)

    def skip_ws():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def fail(msg: str):
        raise PatternSyntaxError(msg, pos)

    skip_ws()
    if pos >= n or text[pos] != "(":
        fail("expected '('")
    pos += 1

    var_ids: dict[str, int] = {}
    elements: list[Element] = []
    current: list[Atom] = []
    saw_eps = False

    def end_element():
        nonlocal current, saw_eps
        if not current and not saw_eps:
            fail("empty element (use eps)")
        elements.append(tuple(current))
        current = []
        saw_eps = False

    while True:
        skip_ws()
        if pos >= n:
            fail("unterminated pattern")
        ch = text[pos]
        if ch == ")":
            pos += 1
            if current or saw_eps or elements:
                end_element()
            break
        if ch == ",":
            pos += 1
            end_element()
            continue
        if text.startswith("eps", pos) and (
            pos + 3 >= n or not text[pos + 3].isalnum()
        ):
            if current:
                fail("eps must stand alone in an element")
            saw_eps = True
            pos += 3
            continue
        if ch == "'":
            pos += 1
            if pos >= n or not text[pos].isalnum():
                fail("expected a letter after quote")
            current.append(const_atom(char_to_letter(text[pos])))
            pos += 1
            continue
        if ch.isdigit() or ch.isupper() or ch in _CONST_SINGLES:
            current.append(const_atom(char_to_letter(ch)))
            pos += 1
            continue
        if ch.isalpha():
            start = pos
            pos += 1
            while pos < n and text[pos].isdigit():
                pos += 1
            name = text[start:pos]
            reverse = False
            if text.startswith("^R", pos):
                reverse = True
                pos += 2
                if not allow_reverse:
                    fail("reversed variables are disabled")
            idx = var_ids.setdefault(name, len(var_ids))
            current.append(var_atom(idx, reverse))
            continue
        fail(f"unexpected character {ch!r}")

    skip_ws()
    if pos != n:
        fail("trailing input after pattern")
    return TuplePattern(tuple(elements), mode)


def _render_atom(a: Atom) -> str:
    if atom_is_const(a):
        ch = letter_to_char(atom_letter(a))
        return ch if ch.isdigit() or ch.isupper() or ch in _CONST_SINGLES else "'" + ch
    if atom_is_var(a):
        return f"x{atom_index(a)}" + ("^R" if atom_is_reversed(a) else "")
    inner = " ".join(_render_atom(b) for b in a[1])
    return f"({inner})^s"


def render_pattern(t: TuplePattern) -> str:
    parts = []
    for el in t.elements:
        parts.append(" ".join(_render_atom(a) for a in el) if el else "eps")
    return "(" + ", ".join(parts) + ")"


# ---------------------------------------------------------------------------
# substitution

def apply_substitution(
    theta: Mapping[int, tuple], t: TuplePattern
) -> tuple[tuple, ...]:
    """Instantiate every variable of `t` from `theta` (keyed by variable
    index).  Sequence mode concatenates; set mode takes disjoint unions and
    rejects overlapping parts; multiset mode takes multiset sums."""
    out = []
    for el in t.elements:
        if t.mode is Mode.SEQUENCE:
            acc: list[int] = []
            for a in el:
                if atom_is_const(a):
                    acc.append(atom_letter(a))
                elif atom_is_var(a):
                    try:
                        val = theta[atom_index(a)]
                    except KeyError:
                        raise KeyError(f"unbound variable x{atom_index(a)}") from None
                    acc.extend(reversed(val) if atom_is_reversed(a) else val)
                else:
                    val = _sorted_letters(a[1], theta)
                    acc.extend(val)
            out.append(tuple(acc))
        else:
            parts: list[int] = []
            for a in el:
                if atom_is_const(a):
                    piece: Iterable[int] = (atom_letter(a),)
                elif atom_is_var(a):
                    try:
                        piece = theta[atom_index(a)]
                    except KeyError:
                        raise KeyError(f"unbound variable x{atom_index(a)}") from None
                else:
                    raise ValueError("sorted groups only occur in sequence mode")
                if t.mode is Mode.SET and set(piece) & set(parts):
                    raise ValueError("set-mode substitution parts must be disjoint")
                parts.extend(piece)
            if t.mode is Mode.SET:
                if len(parts) != len(set(parts)):
                    raise ValueError("set-mode substitution parts must be disjoint")
                out.append(frozenset(parts))
            else:
                out.append(tuple(sorted(parts)))
    return tuple(out)


def _sorted_letters(inner: Element, theta: Mapping[int, tuple]) -> tuple[int, ...]:
    flat: list[int] = []
    for a in inner:
        if atom_is_const(a):
            flat.append(atom_letter(a))
        elif atom_is_var(a):
            val = theta[atom_index(a)]
            flat.extend(reversed(val) if atom_is_reversed(a) else val)
        else:
            flat.extend(_sorted_letters(a[1], theta))
    return tuple(sorted(flat))


# ---------------------------------------------------------------------------
# the reduction relation on patterns

class Rule(Enum):
    EPSILON = "epsilon"
    PREFIX = "prefix"
    CPREFIX = "cprefix"
    POSTFIX = "postfix"
    CPOSTFIX = "cpostfix"
    RPREFIX = "rprefix"
    RPOSTFIX = "rpostfix"
    SPREFIX = "sprefix"  # data-side only, behind a private flag


@dataclass(frozen=True)
class RuleSet:
    constants: bool = True
    postfix: bool = True
    reverse: bool = True


DEFAULT_RULES = RuleSet()
BASE_RULES = RuleSet(constants=True, postfix=False, reverse=False)


@dataclass(frozen=True)
class PredStep:
    """One reduction step: `rule` rewrites the principal element `j`, using
    auxiliary element `i` (prefix/postfix families) or `letter` (constant
    rules).  Indices are 0-based element positions."""

    rule: Rule
    j: int
    i: Optional[int] = None
    letter: Optional[int] = None


def _steps_at(elements, j: int, rules: RuleSet):
    """Steps with principal element j, in rule order."""
    el = elements[j]
    n = len(elements)
    if not el:
        yield PredStep(Rule.EPSILON, j), elements[:j] + elements[j + 1 :]
        return
    for i in range(n):
        if i == j:
            continue
        aux = elements[i]
        if aux and el[: len(aux)] == aux:
            yield PredStep(Rule.PREFIX, j, i), _replace(elements, j, el[len(aux) :])
    if rules.constants and atom_is_const(el[0]):
        yield (
            PredStep(Rule.CPREFIX, j, letter=atom_letter(el[0])),
            _replace(elements, j, el[1:]),
        )
    if rules.postfix:
        for i in range(n):
            if i == j:
                continue
            aux = elements[i]
            if aux and el[len(el) - len(aux) :] == aux:
                yield (
                    PredStep(Rule.POSTFIX, j, i),
                    _replace(elements, j, el[: len(el) - len(aux)]),
                )
        if rules.constants and atom_is_const(el[-1]):
            yield (
                PredStep(Rule.CPOSTFIX, j, letter=atom_letter(el[-1])),
                _replace(elements, j, el[:-1]),
            )
    if rules.reverse:
        for i in range(n):
            if i == j:
                continue
            aux = elements[i]
            if not aux:
                continue
            try:
                rev = reverse_element(aux)
            except ValueError:
                continue
            if el[: len(rev)] == rev:
                yield (
                    PredStep(Rule.RPREFIX, j, i),
                    _replace(elements, j, el[len(rev) :]),
                )
            if rules.postfix and el[len(el) - len(rev) :] == rev:
                yield (
                    PredStep(Rule.RPOSTFIX, j, i),
                    _replace(elements, j, el[: len(el) - len(rev)]),
                )


def _replace(elements, j: int, el: Element):
    return elements[:j] + (el,) + elements[j + 1 :]


def pred_steps(
    t: TuplePattern | Sequence[Element], rules: RuleSet = DEFAULT_RULES
) -> list[tuple[PredStep, TuplePattern]]:
    """All applicable single reduction steps with their successor patterns,
    principal index ascending."""
    elements = t.elements if isinstance(t, TuplePattern) else tuple(t)
    out = []
    for j in range(len(elements)):
        for step, succ in _steps_at(elements, j, rules):
            out.append((step, TuplePattern(succ)))
    return out


def _is_trivial(elements) -> bool:
    seen = set()
    for el in elements:
        if len(el) != 1:
            return False
        a = el[0]
        if not atom_is_var(a) or atom_is_reversed(a):
            return False
        seen.add(a)
    return len(seen) == len(elements)


def _greedy_path(elements, rules: RuleSet):
    path = []
    while True:
        found = None
        for j in range(len(elements)):
            for step, succ in _steps_at(elements, j, rules):
                found = (step, succ)
                break
            if found:
                break
        if found is None:
            return path if _is_trivial(elements) else None
        path.append(found)
        elements = found[1]


def _search_path(elements, rules: RuleSet, memo) -> Optional[list]:
    """Exhaustive path search; needed because reverse atoms break weak
    confluence, so a stuck greedy reduction proves nothing."""
    if _is_trivial(elements):
        return []
    if elements in memo:
        return memo[elements]
    memo[elements] = None  # cycle guard (measure decreases, but be safe)
    for j in range(len(elements)):
        for step, succ in _steps_at(elements, j, rules):
            rest = _search_path(succ, rules, memo)
            if rest is not None:
                result = [(step, succ)] + rest
                memo[elements] = result
                return result
    memo[elements] = None
    return None


def solving_path(
    t: TuplePattern | Sequence[Element], rules: RuleSet = DEFAULT_RULES
) -> Optional[list[tuple[PredStep, tuple]]]:
    """A reduction sequence from `t` to a tuple of distinct variables, or
    None if there is none.  Greedy reduction suffices without reverse atoms;
    with them the search is exhaustive."""
    elements = t.elements if isinstance(t, TuplePattern) else tuple(t)
    has_rev = any(atom_is_reversed(a) for el in elements for a in el)
    if rules.reverse and has_rev:
        return _search_path(elements, rules, {})
    return _greedy_path(elements, rules)


def is_solvable(
    t: TuplePattern | Sequence[Element], rules: RuleSet = DEFAULT_RULES
) -> bool:
    return solving_path(t, rules) is not None


# ---------------------------------------------------------------------------
# residuals and the inclusion procedure

def _residual_elements(t0, step: PredStep):
    j = step.j
    el = t0[j]
    if step.rule is Rule.EPSILON:
        return t0[:j] + t0[j + 1 :] if el == () else None
    if step.rule is Rule.PREFIX:
        aux = t0[step.i]
        return _replace(t0, j, el[len(aux) :]) if el[: len(aux)] == aux else None
    if step.rule is Rule.CPREFIX:
        a = const_atom(step.letter)
        return _replace(t0, j, el[1:]) if el and el[0] == a else None
    if step.rule is Rule.POSTFIX:
        aux = t0[step.i]
        if len(aux) <= len(el) and el[len(el) - len(aux) :] == aux:
            return _replace(t0, j, el[: len(el) - len(aux)])
        return None
    if step.rule is Rule.CPOSTFIX:
        a = const_atom(step.letter)
        return _replace(t0, j, el[:-1]) if el and el[-1] == a else None
    if step.rule is Rule.RPREFIX:
        try:
            rev = reverse_element(t0[step.i])
        except ValueError:
            return None
        if len(rev) <= len(el) and el[: len(rev)] == rev:
            return _replace(t0, j, el[len(rev) :])
        return None
    if step.rule is Rule.RPOSTFIX:
        try:
            rev = reverse_element(t0[step.i])
        except ValueError:
            return None
        if len(rev) <= len(el) and el[len(el) - len(rev) :] == rev:
            return _replace(t0, j, el[: len(el) - len(rev)])
        return None
    raise ValueError(f"no residual case for {step.rule}")


def residual(
    t0: TuplePattern, t1: TuplePattern, step: PredStep
) -> Optional[TuplePattern]:
    """Track how `t0` must reduce to simulate the step `t1 -> _`; absent when
    t0's principal element lacks the required shape."""
    if t0.arity != t1.arity:
        raise ValueError("residual requires equal arities")
    res = _residual_elements(t0.elements, step)
    return None if res is None else TuplePattern(res)


def _includes_elements(t1, t2, rules: RuleSet) -> bool:
    if len(t1) != len(t2):
        return False
    path = solving_path(t2, rules)
    if path is None:
        raise NotSolvableError("inclusion requires a solvable right-hand pattern")
    for step, _succ in path:
        t1 = _residual_elements(t1, step)
        if t1 is None:
            return False
    return True


def includes(
    t1: TuplePattern, t2: TuplePattern, rules: RuleSet = DEFAULT_RULES
) -> bool:
    """Language inclusion of solvable patterns."""
    if not is_solvable(t1, rules):
        raise NotSolvableError("inclusion requires solvable patterns")
    return _includes_elements(t1.elements, t2.elements, rules)


def constant_pattern(values: Sequence[Cell]) -> TuplePattern:
    return TuplePattern(
        tuple(tuple(const_atom(v) for v in cell) for cell in values)
    )


def member(
    values: Sequence[Cell], t: TuplePattern, rules: RuleSet = DEFAULT_RULES
) -> bool:
    """Tuple membership, decided through the inclusion procedure on the
    constant pattern of `values`."""
    if t.mode is not Mode.SEQUENCE:
        raise ValueError("use collection_member for set/multiset patterns")
    if len(values) != t.arity:
        raise ValueError("arity mismatch")
    consts = tuple(tuple(const_atom(v) for v in cell) for cell in values)
    return _includes_elements(consts, t.elements, rules)


def equivalent(
    t1: TuplePattern, t2: TuplePattern, rules: RuleSet = DEFAULT_RULES
) -> bool:
    return includes(t1, t2, rules) and includes(t2, t1, rules)


# ---------------------------------------------------------------------------
# brute-force membership (test oracle)

def brute_force_member(values: Sequence[Cell], t: TuplePattern, max_len: int) -> bool:
    """Search for a witness substitution binding each variable to a string of
    length <= max_len.  Backtracking match, left to right."""
    if len(values) != t.arity:
        return False
    elements = t.elements
    binding: dict[int, tuple[int, ...]] = {}

    def match_atoms(k: int, ai: int, pos: int) -> bool:
        target = values[k]
        if ai == len(elements[k]):
            if pos != len(target):
                return False
            return k + 1 == len(elements) or match_atoms(k + 1, 0, 0)
        a = elements[k][ai]
        if atom_is_const(a):
            if pos < len(target) and target[pos] == atom_letter(a):
                return match_atoms(k, ai + 1, pos + 1)
            return False
        if atom_is_sort(a):
            raise ValueError("sorted groups are not supported by the oracle")
        v = atom_index(a)
        rev = atom_is_reversed(a)
        if v in binding:
            val = binding[v][::-1] if rev else binding[v]
            if target[pos : pos + len(val)] == val:
                return match_atoms(k, ai + 1, pos + len(val))
            return False
        limit = min(max_len, len(target) - pos)
        for ln in range(limit + 1):
            piece = target[pos : pos + ln]
            binding[v] = piece[::-1] if rev else piece
            if match_atoms(k, ai + 1, pos + ln):
                return True
            del binding[v]
        return False

    if not elements:
        return len(values) == 0
    return match_atoms(0, 0, 0)


# ---------------------------------------------------------------------------
# identifying learning data

def _bits(value: int, width: int) -> tuple[int, ...]:
    return tuple((value >> (width - 1 - b)) & 1 for b in range(width))


# Cross-reverse-bifix-free codeword set for three variables: no codeword (or
# reversed codeword) is a prefix or suffix of any other, and none is a
# palindrome.  No such set exists at width 3, and uniform width 4 would blow
# the advertised data-size bound, so the lengths are mixed.
_REV_SAFE_3 = [(0, 0, 1), (0, 1, 1, 1), (1, 1, 0, 1)]


def _codewords(k: int, reverse_safe: bool) -> list[tuple[int, ...]]:
    """k bit codewords, prefix-free by construction.  The reverse-safe family
    additionally guarantees that no (possibly reversed) codeword is a prefix
    or suffix of another and that none is a palindrome: a palindromic
    codeword makes a plain column indistinguishable from its reverse, letting
    inference diverge into inequivalent normal forms."""
    if k == 0:
        return []
    if not reverse_safe:
        width = k.bit_length()  # = ceil(log2(k+1))
        return [_bits(i, width) for i in range(k)]
    if k == 3:
        return list(_REV_SAFE_3)
    width = max(1, (k - 1).bit_length() + 1)
    while True:
        family = []
        for x in range(1 << width):
            b = _bits(x, width)
            if b < b[::-1]:
                family.append(b)
            if len(family) == k:
                return family
        width += 1


def canonical_data(
    t: TuplePattern, rules: RuleSet | None = None
) -> LearningData:
    """Two-row learning data that identifies `t` among inference results:
    row one substitutes per-variable prefix codewords over letters a/b, row
    two the same codewords with a and b swapped."""
    if rules is None:
        rules = RuleSet(constants=True, postfix=True, reverse=t.has_reverse())
    if not is_solvable(t, rules):
        raise NotSolvableError("identifying data exists only for solvable patterns")
    if t.mode is not Mode.SEQUENCE:
        raise ValueError("identifying data is defined for sequence patterns")
    variables = t.variables()
    reverse_safe = rules.reverse and t.has_reverse()
    codes = _codewords(len(variables), reverse_safe=reverse_safe)
    if reverse_safe and len({len(c) for c in codes}) > 1:
        # mixed lengths: give the shortest codewords to the most frequent
        # variables so the data stays within the advertised size
        counts = {v: 0 for v in variables}
        for el in t.elements:
            for a in el:
                for v in _atom_vars(a):
                    counts[v] += 1
        variables = sorted(variables, key=lambda v: (-counts[v], variables.index(v)))
        codes = sorted(codes, key=len)
    alpha = {
        v: tuple(LETTER_A if b == 0 else LETTER_B for b in code)
        for v, code in zip(variables, codes)
    }
    beta = {
        v: tuple(LETTER_B if b == 0 else LETTER_A for b in code)
        for v, code in zip(variables, codes)
    }
    return LearningData(
        [apply_substitution(alpha, t), apply_substitution(beta, t)]
    )
