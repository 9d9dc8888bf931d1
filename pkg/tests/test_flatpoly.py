import random
from fractions import Fraction

import pytest

from ckt_prolong import flatpoly as fp
from ckt_prolong.coeff import N
from ckt_prolong.symmetry import PRINTED


def test_rank_one_kernel_dimensions():
    assert fp.kernel(1, 3).dimension == 10
    assert fp.kernel(1, 4).dimension == 15
    assert fp.kernel(1, 4).dimensions() == [4, 7, 4]


@pytest.mark.parametrize("rank,n", [(1, 3), (1, 4), (2, 3)])
def test_dimension_stable_beyond_jet_degree(rank, n):
    cap = fp.jet_degree(rank)
    base = fp.kernel(rank, n, cap).dimensions()
    more = fp.kernel(rank, n, cap + 2).dimensions()
    assert more[:cap + 1] == base and not any(more[cap + 1:])


def test_modular_nullity_matches_exact_kernel():
    assert fp.kernel_dimension(1, 4) == fp.kernel(1, 4).dimensions()
    assert fp.kernel_dimension(2, 3) == fp.kernel(2, 3).dimensions()


def test_small_dimension_rejected():
    with pytest.raises(ValueError):
        fp.ckt_polynomial_basis(1, 2)


def test_rank_one_basis_satisfies_killing_equation_componentwise():
    n = 4
    for s in fp.ckt_polynomial_basis(1, n):
        ds = s.diff()
        div = sum((ds[(a, a)] for a in range(n)), fp.ring(n).from_dict({}))
        for a in range(n):
            for b in range(n):
                e = (ds[(a, b)] + ds[(b, a)]) * n
                if a == b:
                    e = e - div * 2
                assert e == 0


def test_explicit_conformal_killing_vectors():
    n = 4
    V = fp.ckv_basis(n)
    assert len(V) == (n + 1) * (n + 2) // 2
    assert all(fp.is_ckt(v) for v in V)
    assert fp.is_ckt(fp.translation(n, 2))
    x = fp.coords(n)
    assert not fp.is_ckt(fp.PolyTensor(n, 1, {(0,): x[0] * x[0]}))


def test_products_of_conformal_killing_vectors_are_rank_two_tensors():
    n = 4
    s = fp.sym_product(fp.rotation(n, 0, 1), fp.special_conformal(n, 2))
    assert s.is_symmetric_tracefree() and fp.is_ckt(s)


def test_zero_tensor_gives_zero_residual():
    n = 4
    zero = fp.translation(n, 0).scale(0)
    f = fp.random_polynomial(n, 3, random.Random(1))
    assert fp.verify_symmetry_identity("laplacian", {"A": 5, "B": 7}, zero, f) == 0


def test_yamabe_order1_symmetry_on_dilation():
    n = 4
    f = fp.random_polynomial(n, 4, random.Random(fp.SEED))
    res = fp.verify_symmetry_identity("yamabe", {"A": Fraction(1, 4), "B": Fraction(3, 4)},
                                      fp.dilation(n), f)
    assert res == 0
    bad = fp.verify_symmetry_identity("yamabe", {"A": Fraction(1, 3), "B": Fraction(3, 4)},
                                      fp.dilation(n), f)
    assert bad != 0


@pytest.mark.parametrize("second,printed_zero", [((2, 3), True), ((1, 2), False)])
def test_printed_second_order_values_on_two_rotations(second, printed_zero):
    n = 6
    sigma = fp.sym_product(fp.rotation(n, 0, 1), fp.rotation(n, *second))
    f = fp.random_polynomial(n, 5, random.Random(fp.SEED))
    printed = {k: v(n) for k, v in PRINTED[("laplacian", 2)].items()}
    as_printed = fp.verify_symmetry_identity("laplacian", printed, sigma, f)
    fit = fp.fit_symmetry_coefficients("laplacian", 2, n)
    assert fit.status == "unique"
    assert fp.verify_symmetry_identity("laplacian", fit.values, sigma, f) == 0
    # as-is result: commuting rotations are blind to the lower-order
    # coefficients, overlapping ones separate the printed labels from the fit
    assert (as_printed == 0) is printed_zero


def test_non_ckt_is_rejected():
    n = 3
    x = fp.coords(n)
    with pytest.raises(fp.OracleError):
        fp.residual_pieces("laplacian", fp.PolyTensor(n, 1, {(0,): x[1] * x[1]}), x[0])


@pytest.mark.parametrize("n", [4, 6, 7, 8])
def test_first_order_fit(n):
    fit = fp.fit_symmetry_coefficients("laplacian", 1, n)
    assert fit.status == "unique"
    assert fit.values == {"A": ((N - 2) / (2 * N))(n), "B": ((N + 2) / (2 * N))(n)}
    assert fit.checks and all(c == "zero" for c in fit.checks)


def test_second_order_fit_at_six():
    fit = fp.fit_symmetry_coefficients("laplacian", 2, 6)
    assert fit.values == {"A1": Fraction(3, 4), "B1": Fraction(3, 28),
                          "A2": Fraction(5, 4), "B2": Fraction(5, 14)}
    assert fit.rank == 4


def test_fit_reports_underdetermined_with_too_few_samples():
    n = 4
    fit = fp.fit_symmetry_coefficients("laplacian", 1, n, samples=[(fp.translation(n, 0), fp.coords(n)[0])])
    assert fit.status == "underdetermined"


def test_f_samples_are_deterministic():
    a = fp.f_samples(3, 1)
    b = fp.f_samples(3, 1)
    assert a == b
    assert len(a) == 5 + len([m for d in range(5) for m in fp.monomials(3, d)])


def test_rules_hold_on_rank_one_kernel(rank1):
    for name, ok, bad in fp.verify_rules(rank1, 3):
        assert ok, (name, bad)
    r, total = fp.jet_map_rank(rank1, 3)
    assert r == total == 10


def test_poly_tensor_json():
    d = fp.dilation(3).to_json()
    assert d["rank"] == 1 and set(d["components"]) == {"0", "1", "2"}
