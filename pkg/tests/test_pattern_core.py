import random

import pytest

from stpchc.pattern_core import (
    Mode,
    NotSolvableError,
    PatternSyntaxError,
    Rule,
    RuleSet,
    TuplePattern,
    apply_substitution,
    brute_force_member,
    const_atom,
    equivalent,
    includes,
    is_solvable,
    measure,
    member,
    parse_pattern,
    pred_steps,
    render_pattern,
    residual,
    solving_path,
    var_atom,
)

from helpers import (
    A,
    B,
    bounded_language,
    exhaustive_solvable,
    random_solvable,
    random_tuple,
    s,
)

BASE = RuleSet(constants=True, postfix=False, reverse=False)


def P(text, **kw):
    return parse_pattern(text, **kw)


class TestParseRender:
    def test_reverse_pattern(self):
        t = P("(x, y, x^R y)")
        assert t.elements == (
            (var_atom(0),),
            (var_atom(1),),
            (var_atom(0, reverse=True), var_atom(1)),
        )

    def test_constant_pattern(self):
        t = P("(a x, y, a x y)")
        a = const_atom(A)
        assert t.elements == (
            (a, var_atom(0)),
            (var_atom(1),),
            (a, var_atom(0), var_atom(1)),
        )

    def test_syntax_error_offset(self):
        with pytest.raises(PatternSyntaxError) as exc:
            P("(x,")
        assert exc.value.position == 3

    def test_juxtaposed_variables(self):
        t = P("(x1x2, x2x1, x1)")
        assert t.elements == (
            (var_atom(0), var_atom(1)),
            (var_atom(1), var_atom(0)),
            (var_atom(0),),
        )

    def test_eps_and_quoted(self):
        t = P("(eps, 'z b)")
        assert t.elements[0] == ()
        assert t.elements[1][0] == const_atom(s("z")[0])

    def test_reverse_disabled(self):
        with pytest.raises(PatternSyntaxError):
            P("(x^R)", allow_reverse=False)

    def test_round_trip(self):
        for text in ["(x, y, x^R y)", "(a x, y, a x y)", "(eps, x0)", "('z 1 B)"]:
            t = P(text)
            assert P(render_pattern(t)) == t

    def test_identified_up_to_renaming(self):
        assert P("(u, uv)") == P("(x, xy)")
        assert P("(xy, x)") != P("(xy, y)")


class TestSubstitution:
    def test_plain(self):
        t = P("(x, y, x y)")
        assert apply_substitution({0: s("a"), 1: s("b")}, t) == (
            s("a"),
            s("b"),
            s("ab"),
        )

    def test_reverse(self):
        t = P("(x, y, x^R y)")
        assert apply_substitution({0: s("ab"), 1: s("cd")}, t) == (
            s("ab"),
            s("cd"),
            s("bacd"),
        )

    def test_empty_string(self):
        t = P("(x x)")
        assert apply_substitution({0: ()}, t) == ((),)

    def test_unbound(self):
        with pytest.raises(KeyError):
            apply_substitution({}, P("(x)"))

    def test_set_mode_disjointness(self):
        t = TuplePattern(((var_atom(0), var_atom(1)),), Mode.SET)
        assert apply_substitution({0: (1,), 1: (2,)}, t) == (frozenset({1, 2}),)
        with pytest.raises(ValueError):
            apply_substitution({0: (1,), 1: (1,)}, t)

    def test_multiset_mode_sum(self):
        t = TuplePattern(((var_atom(0), var_atom(1)),), Mode.MULTISET)
        assert apply_substitution({0: (1,), 1: (1, 2)}, t) == ((1, 1, 2),)


class TestMeasure:
    def test_examples(self):
        assert measure(P("(x, xx)")) == 5
        assert measure(P("(x1x2, x2x1, x1)")) == 8
        assert measure(TuplePattern(())) == 0


class TestPredSteps:
    def test_prefix_step_on_worked_pattern(self):
        t = P("(x1x2, x2x1, x1)")
        succs = {succ for _st, succ in pred_steps(t, BASE)}
        assert P("(x2, x2x1, x1)") in succs

    def test_stuck_pair(self):
        assert pred_steps(P("(x1x2, x2x1)"), BASE) == []

    def test_epsilon(self):
        steps = pred_steps(P("(eps, y)"), BASE)
        assert any(
            st.rule is Rule.EPSILON and succ == P("(y)") for st, succ in steps
        )

    def test_measure_decreases(self):
        rng = random.Random(7)
        for _ in range(80):
            t = random_solvable(rng)
            for _st, succ in pred_steps(t):
                assert measure(succ) < measure(t)


class TestSolvability:
    def test_table(self):
        assert is_solvable(P("(x1x2, x2x1, x1)"))
        assert is_solvable(P("(x, xy)"))
        assert is_solvable(P("(y, xy)"))  # needs postfix
        assert is_solvable(P("(l1, l2, l1^R l2)"))  # needs reverse
        assert not is_solvable(P("(x1x2, x2x1)"))
        assert not is_solvable(P("(xx)"))

    def test_postfix_only_pattern_needs_postfix(self):
        assert not is_solvable(P("(y, xy)"), BASE)

    def test_reverse_pattern_beyond_greedy(self):
        # the greedy first step at (x, y, x^R) strips the wrong side; the
        # search must still find the successful order
        assert is_solvable(P("(x, y, x^R)"))
        assert is_solvable(P("(x^R, y, x y)"))

    def test_strategy_independence_without_reverse(self):
        rng = random.Random(3)
        rules = RuleSet(constants=True, postfix=True, reverse=False)
        for _ in range(150):
            t = random_solvable(rng, max_arity=3, max_measure=12, rules=rules)
            assert exhaustive_solvable(t.elements, rules)
        # and random not-necessarily-solvable shapes agree with the oracle
        from helpers import enumerate_patterns

        for elements in enumerate_patterns(2, 5):
            got = is_solvable(TuplePattern(elements), rules)
            want = exhaustive_solvable(elements, rules)
            assert got == want, elements


class TestResidual:
    def test_prefix_case(self):
        t1 = P("(x2x1, x2, x3)")
        steps = [st for st, succ in pred_steps(t1, BASE) if st.rule is Rule.PREFIX]
        step = next(st for st in steps if st.j == 0 and st.i == 1)
        t0 = P("(y2y1, y2, y3)")
        assert residual(t0, t1, step) == P("(y1, y2, y3)")

    def test_constant_tuple_strip(self):
        # the l1-prefix step on (l1l2, l2l3, l1l2l3) strips "ab" off "abcd"
        t1 = P("(l1l2, l2l3, l1l2l3)")
        steps = [st for st, _ in pred_steps(t1) if st.rule is Rule.PREFIX and st.j == 2 and st.i == 0]
        assert steps
        t0 = TuplePattern(
            tuple(tuple(const_atom(v) for v in cell) for cell in (s("ab"), s("d"), s("abcd")))
        )
        want = TuplePattern(
            tuple(tuple(const_atom(v) for v in cell) for cell in (s("ab"), s("d"), s("cd")))
        )
        assert residual(t0, t1, steps[0]) == want

    def test_epsilon_mismatch(self):
        t1 = P("(eps, x)")
        step = pred_steps(t1, BASE)[0][0]
        assert step.rule is Rule.EPSILON
        t0 = P("(a, b)")
        assert residual(t0, t1, step) is None

    def test_arity_mismatch(self):
        t1 = P("(eps, x)")
        step = pred_steps(t1, BASE)[0][0]
        with pytest.raises(ValueError):
            residual(P("(a)"), t1, step)


class TestInclusion:
    def test_frozen_examples(self):
        assert includes(P("(x, x)"), P("(x, y)"))
        # a tuple of distinct variables is the full language
        assert includes(P("(a x, x b, x)"), P("(u, v, w)"))
        assert not includes(P("(x, y)"), P("(x, x)"))
        assert not includes(P("(x, y, xz)"), P("(x, y, yz)"))
        assert not includes(P("(x, y, yz)"), P("(x, y, xz)"))
        assert includes(P("(a x, x b, x)"), P("(x, y, z)"))

    def test_rejects_unsolvable(self):
        with pytest.raises(NotSolvableError):
            includes(P("(xx)"), P("(x)"))
        with pytest.raises(NotSolvableError):
            includes(P("(x)"), P("(xx)"))

    def test_bounded_agreement(self):
        rng = random.Random(11)
        pats = [random_solvable(rng, max_arity=2, max_measure=8) for _ in range(40)]
        for t1 in pats[:20]:
            for t2 in pats[20:]:
                if t1.arity != t2.arity:
                    continue
                got = includes(t1, t2)
                lang1 = bounded_language(t1, (A, B), 3)
                if got:
                    assert all(member(v, t2) for v in lang1)
                else:
                    big = bounded_language(t1, (A, B), 4)
                    assert any(not member(v, t2) for v in big)

    def test_preorder(self):
        rng = random.Random(13)
        pats = [random_solvable(rng, max_arity=2, max_measure=8) for _ in range(12)]
        for t in pats:
            assert includes(t, t)
        for ta in pats:
            for tb in pats:
                for tc in pats:
                    if ta.arity == tb.arity == tc.arity:
                        if includes(ta, tb) and includes(tb, tc):
                            assert includes(ta, tc)


class TestMember:
    def test_overlap_examples(self):
        t = P("(l1l2, l2l3, l1l2l3)")
        assert member((s("ab"), s("bcd"), s("abcd")), t)
        assert not member((s("ab"), s("d"), s("abcd")), t)
        assert member(((), ()), P("(x, x)"))

    def test_brute_force_examples(self):
        assert brute_force_member((s("aa"),), P("(xx)"), 2)
        assert not brute_force_member((s("a"),), P("(xx)"), 1)
        assert brute_force_member(
            (s("ab"), s("bcd"), s("abcd")), P("(l1l2, l2l3, l1l2l3)"), 4
        )

    def test_member_matches_oracle(self):
        rng = random.Random(5)
        for _ in range(120):
            t = random_solvable(rng, max_arity=3, max_measure=10)
            for _ in range(8):
                v = random_tuple(rng, t.arity)
                assert member(v, t) == brute_force_member(v, t, 4), (v, t)


class TestEquivalent:
    def test_examples(self):
        assert equivalent(P("(x, xy)"), P("(u, uv)"))
        assert equivalent(P("(x, y)"), P("(y, x)"))
        assert not equivalent(P("(x, xy)"), P("(x, yx)"))
