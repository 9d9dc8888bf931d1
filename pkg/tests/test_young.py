import pytest

from ckt_prolong.young import (B, BundleLabel, L, build_derivative_tree, decompose,
                               dimension_check, fiber_dimension)


def labels(bs):
    return [b.ascii() for b in bs]


def test_decompose_one_forms():
    assert sorted(labels(decompose(L(1)))) == sorted(["B[2]o", "L2", "L0"])


def test_decompose_symmetric_two_tensors():
    assert labels(decompose(B(2))) == ["B[3]o", "B[2,1]o", "B[1]"]


def test_decompose_hook():
    got = labels(decompose(B(2, 1)))
    assert len(got) == 5
    assert sorted(got) == sorted(["B[2,2]o", "B[2,1,1]o", "B[3,1]o", "B[2]o", "L2"])


def test_decompose_scalar():
    assert labels(decompose(L(0))) == ["B[1]"]


def test_fiber_dimensions():
    assert fiber_dimension(L(2), 4) == 6
    assert fiber_dimension(B(2), 4) == 9
    assert fiber_dimension(B(3), 3) == 7
    assert fiber_dimension(L(0), 5) == 1


@pytest.mark.parametrize("b", [L(1), L(2), B(2), B(3), B(2, 1), B(2, 2), B(3, 1)])
@pytest.mark.parametrize("n", [5, 6])
def test_dimension_additivity_in_stable_range(b, n):
    lhs, rhs = dimension_check(b, n)
    assert lhs == rhs


def test_hook_dimension_at_three_is_additive():
    # n = 3 is outside the stable range for B[2,1]; the projector rank is
    # still consistent with the decomposition of T*⊗B[2]
    d = fiber_dimension(B(2, 1), 3)
    assert 3 * fiber_dimension(B(2), 3) == fiber_dimension(B(3), 3) + d + fiber_dimension(L(1), 3)


def test_parse_round_trip():
    for text in ["B[2,1]o", "B[3]o", "L2", "L0", "B[1]", "B[2,2]o"]:
        assert BundleLabel.parse(text).ascii() == text
    assert BundleLabel.parse("B[1,1]") == L(2)
    assert BundleLabel.parse("B[2]₀") == B(2)


@pytest.mark.parametrize("bad", ["B[2,1", "X2", "B[]", "B[a]o", ""])
def test_parse_errors_mention_grammar(bad):
    with pytest.raises(ValueError) as exc:
        BundleLabel.parse(bad)
    assert BundleLabel.GRAMMAR in str(exc.value)


def test_tree_one_forms():
    root = build_derivative_tree(L(1), B(2), 2)
    assert sorted(labels([x.bundle for x in root.level(1)])) == ["L0", "L2"]
    psi = [x for x in root.level(1) if x.bundle == L(0)][0]
    assert labels([c.bundle for c in psi.children]) == ["B[1]"]


def test_tree_symmetric_two_tensors():
    root = build_derivative_tree(B(2), B(3), 1)
    assert sorted(labels([x.bundle for x in root.level(1)])) == ["B[1]", "B[2,1]o"]


@pytest.mark.parametrize("kill", [B(2), B(3), L(2)])
def test_tree_scalar(kill):
    root = build_derivative_tree(L(0), kill, 1)
    assert labels([x.bundle for x in root.level(1)]) == ["B[1]"]


def test_tree_records_killed_summand():
    root = build_derivative_tree(L(1), B(2), 1)
    assert labels([k.bundle for k in root.killed]) == ["B[2]o"]
