import math
import random

import pytest

from stpchc.pattern_core import (
    NotSolvableError,
    canonical_data,
    equivalent,
    measure,
    parse_pattern,
)
from stpchc.stp_inference import InferConfig, infer_all

from helpers import random_solvable, rows, s


def P(text):
    return parse_pattern(text)


def identify_config(t):
    return InferConfig(constants=True, postfix=True, reverse=t.has_reverse())


class TestConstruction:
    def test_worked_matrix(self):
        t = P("(a x1 x2, x3 b x2, x1 x2 x3)")
        data = canonical_data(t)
        assert data.rows == tuple(
            tuple(r)
            for r in rows(
                ["aaaab", "babab", "aaabba"],
                ["abbba", "abbba", "bbbaab"],
            )
        )

    def test_single_variable(self):
        assert canonical_data(P("(x1)")).rows == (( s("a"),), (s("b"),))

    def test_two_rows_always(self):
        rng = random.Random(1)
        for _ in range(50):
            t = random_solvable(rng)
            assert canonical_data(t).m == 2

    def test_rejects_unsolvable(self):
        with pytest.raises(NotSolvableError):
            canonical_data(P("(xx)"))


class TestIdentification:
    def test_reverse_round_trip(self):
        t = P("(x, y, x^R y)")
        data = canonical_data(t)
        result = infer_all(data, identify_config(t))
        assert result.complete
        for got in result.patterns:
            assert equivalent(got, t), got

    def test_random_identification(self):
        rng = random.Random(42)
        for _ in range(120):
            t = random_solvable(rng, max_arity=3, max_measure=10)
            data = canonical_data(t)
            result = infer_all(data, identify_config(t))
            assert result.complete
            assert result.patterns, t
            for got in result.patterns:
                assert equivalent(got, t), (t, got, data)

    def test_size_bound(self):
        # identifying data stays within 2*(atoms+arity)*width where the
        # codeword width is log(n+1)+1 for plain patterns; reverse patterns
        # need one more bit because palindromic and mutually-reversed
        # codewords must be excluded
        rng = random.Random(43)
        for _ in range(120):
            t = random_solvable(rng, max_arity=4, max_measure=12)
            data = canonical_data(t)
            n = t.arity
            atoms = measure(t) - n
            width = math.ceil(math.log2(n + 1)) + (2 if t.has_reverse() else 1)
            assert data.size() <= 2 * (atoms + n) * max(width, 2), (t, data.size())

    def test_reverse_needs_nonpalindromic_codewords(self):
        # with a palindromic codeword, (x, y, x^R y) and (x, y, x y) would be
        # indistinguishable on the data; the generated codewords avoid it
        from stpchc.pattern_core import _codewords

        for k in range(1, 9):
            codes = _codewords(k, reverse_safe=True)
            assert len(codes) == len(set(codes)) == k
            for c in codes:
                assert c != c[::-1]
                assert c[::-1] not in codes


class TestDegenerateShapes:
    def test_constant_only_pattern(self):
        t = P("(a, a b)")
        data = canonical_data(t)
        assert data.m == 2
        assert data.rows[0] == data.rows[1]
        cfg = InferConfig(constants=True, postfix=True)
        result = infer_all(data, cfg)
        for got in result.patterns:
            assert equivalent(got, t)

    def test_empty_tuple(self):
        t = P("()")
        data = canonical_data(t)
        assert data.m == 2 and data.n == 0
