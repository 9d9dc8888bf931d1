import random
from fractions import Fraction

import pytest

from ckt_prolong.coeff import N, ONE, ZERO, RatFunc, normalize, poly_n, rf, solve_linear, substitute


def test_normalize_yamabe_display_coefficient():
    r = normalize([-2, 1], [0, 2])
    assert r == (N - 2) / (2 * N)
    assert str(r) == "(n-2)/(2*n)"


def test_normalize_zero():
    r = normalize([0], [1, 1])
    assert r.is_zero()
    assert str(r) == "0/1"


def test_normalize_cancels_common_factor():
    r = normalize([0, 2, 2], [0, 2])
    assert r == N + 1
    assert str(r) == "(n+1)/1"


def test_denominator_sign_and_content_are_canonical():
    assert normalize([2], [-4]) == rf(-1, 2)
    assert normalize([0, -3], [0, 0, -6]) == ONE / (2 * N)


def test_evaluation_is_exact():
    assert ((N - 2) / (2 * N))(4) == Fraction(1, 4)
    assert ((N + 2) / (2 * N))(6) == Fraction(2, 3)


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        ONE / ZERO


def test_field_laws_on_random_values():
    rng = random.Random(7)

    def rand():
        p = poly_n(*[rng.randint(-3, 3) for _ in range(rng.randint(1, 3))])
        q = poly_n(*[rng.randint(-3, 3) for _ in range(rng.randint(1, 3))])
        return p / q if not q.is_zero() else p

    for _ in range(200):
        a, b, c = rand(), rand(), rand()
        assert (a + b) * c == a * c + b * c
        assert a - a == ZERO
        if not b.is_zero():
            assert (a / b) * b == a


def test_parse_inverts_str():
    for x in [(N - 2) / (2 * N), rf(-3, 7), N * N - 1, ONE / ((N + 2) * (N - 1)), ZERO]:
        assert RatFunc.parse(str(x)) == x


def test_solve_gradient_constants_b21():
    eqs = [{None: rf(-2, 3), "K1": 2, "K2": N},
           {None: rf(1, 3), "K1": 1 + N, "K2": 1}]
    sol = solve_linear(eqs, ["K1", "K2"])
    assert sol.status == "unique"
    assert sol["K1"] == -ONE / (3 * (N - 1))
    assert sol["K2"] == rf(2) / (3 * (N - 1))
    for e in eqs:
        assert substitute(e, sol.values).is_zero()


def test_solve_gradient_constants_b3():
    eqs = [{None: rf(2, 3), "K1": N, "K2": 2},
           {None: rf(2, 3), "K1": 1, "K2": 1 + N}]
    sol = solve_linear(eqs, ["K1", "K2"])
    assert sol["K1"] == sol["K2"] == rf(-2) / (3 * (N + 2))


def test_solve_tautology_is_underdetermined():
    sol = solve_linear([{"K": ONE - ONE}], ["K"])
    assert sol.status == "underdetermined"
    assert sol.free == ["K"]


def test_solve_inconsistent():
    sol = solve_linear([{"x": 1, None: -1}, {"x": 1, None: -2}], ["x"])
    assert sol.status == "inconsistent"
