import pytest

from ckt_prolong import flatpoly
from ckt_prolong.coeff import N, rf
from ckt_prolong.prolong import (ClosureError, classified_tree, close_system, elimination_steps,
                                 prolongation_dimension, prolongation_dimension_symbolic,
                                 reduce_derivative)
from ckt_prolong.tensor import CURVED, TensorExpr, canonicalize, fresh, metric, nabla, product, tensor


def laplacian(e):
    x = fresh()
    return nabla(nabla(e, x), x).scale(-1)


def oracle_equal(js, expr, claim, nval):
    """expr = claim on every polynomial solution at dimension nval."""
    diff = js.expand(expr) - js.expand(claim)
    ok, _ = flatpoly.vanishes_on_kernel(diff, js.sigma, flatpoly.kernel(js.rank, nval),
                                        tuple(sorted(expr.free)))
    return ok


def jet(js, name, *slots):
    return tensor(js.jet(name).sym, *slots)


def test_rank_one_jets(rank1, rank1_curved):
    for js in (rank1, rank1_curved):
        assert [j.name for j in js.jets] == ["sigma", "phi", "psi", "theta"]
        assert js.closed


def test_rank_two_jets(rank2):
    assert [j.name for j in rank2.jets] == ["sigma", "mu", "nu", "rho", "theta", "omega", "phi",
                                            "beta", "lambda", "tau"]


def test_invalid_requests():
    with pytest.raises(ValueError):
        close_system(3)
    with pytest.raises(ValueError):
        close_system(2, CURVED)
    assert issubclass(ClosureError, RuntimeError)


def test_rank_one_curved_rules(rank1_curved):
    js = rank1_curved
    got = js.reduce(tensor(js.sigma, "b", derivs=("a",)))
    want = jet(js, "phi", "a", "b").scale(rf(1, 2)) + product(jet(js, "psi"), metric("a", "b")).scale(1 / N)
    assert canonicalize(got - want, CURVED).is_zero()
    assert canonicalize(js.reduce(tensor(js.jet("psi").sym, derivs=("a",))) - jet(js, "theta", "a"),
                        CURVED).is_zero()


def test_rank_one_flat_laplacians(rank1):
    js = rank1
    lap_sigma = laplacian(tensor(js.sigma, "a"))
    want = jet(js, "theta", "a").scale((N - 2) / N)
    assert canonicalize(js.reduce(lap_sigma) - want).is_zero()
    assert oracle_equal(js, lap_sigma, want, 4)
    # the opposite sign (Δ read as the Beltrami Laplacian) is refuted for Δ = -∇^a∇_a
    assert not oracle_equal(js, lap_sigma, want.scale(-1), 4)
    lap_psi = laplacian(js.jet("psi").definition)
    assert js.reduce(lap_psi).is_zero()
    assert oracle_equal(js, lap_psi, TensorExpr.zero(), 4)


def test_printed_rule_for_phi_fails_the_oracle(rank1):
    js = rank1
    e = nabla(js.jet("phi").definition.rename({"a": "b", "b": "c"}), "a")
    assert not oracle_equal(js, e, TensorExpr.zero(e.free), 4)
    assert oracle_equal(js, e, js.reduce(e), 4)


def test_rank_two_contracted_identities(rank2):
    js = rank2
    lap_sigma = laplacian(tensor(js.sigma, "a", "b"))
    want = jet(js, "theta", "a", "b").scale(-2 * N / (N + 2))
    assert canonicalize(js.reduce(lap_sigma) - want).is_zero()
    assert oracle_equal(js, lap_sigma, want, 4)

    lap_nu = laplacian(js.jet("nu").definition)
    want = jet(js, "lambda", "a").scale(-(N - 2) / (2 * (N + 1)))
    assert canonicalize(js.reduce(lap_nu) - want).is_zero()
    assert oracle_equal(js, lap_nu, want, 4)

    th = js.jet("theta")
    div_theta = nabla(th.definition, th.slots[0])
    want = jet(js, "lambda", th.slots[1]).scale(-(N - 2) * (N + 2) / (4 * N * (N + 1)))
    assert canonicalize(js.reduce(div_theta) - want).is_zero()
    assert oracle_equal(js, div_theta, want, 4)
    assert not oracle_equal(js, div_theta, want.scale(-1), 4)

    assert js.reduce(laplacian(js.jet("phi").definition)).is_zero()


def test_elimination_steps(rank2):
    steps = elimination_steps(rank2)
    assert len(steps) == 16
    assert all(f.status == "verified" for f in steps)
    names = [f.statement for f in steps]
    assert any(s.startswith("G_[3,1][2,1] μ ~ 0") for s in names)
    assert any(s.startswith("δω ~ λ") for s in names)


def test_fourth_derivative_reduces_to_top_jets(rank2):
    js = rank2
    e = tensor(js.sigma, "a", "b", derivs=("a", "b", "c", "d"))
    red = reduce_derivative(e, js)
    syms = {f.sym.name for fs in red.terms for f in fs if not f.sym.is_metric}
    assert syms and syms <= {"tau", "lambda", "phi"}
    ok, _ = flatpoly.verify_identity(e, js, 6)
    assert ok


def test_prolongation_dimensions(rank1, rank2):
    assert prolongation_dimension(rank1, 3) == 10
    assert prolongation_dimension_symbolic(rank1) == (N + 1) * (N + 2) / 2
    assert prolongation_dimension(rank2, 4) == flatpoly.kernel(2, 4).dimension == 84


def test_classified_tree(rank1, rank2):
    for js in (rank1, rank2):
        root = classified_tree(js)
        nodes = list(root.walk())
        assert all(x.classification != "unclassified" for x in nodes)
        new = [x for x in nodes if x.classification == "new-jet"]
        assert len(new) == len(js.jets)
    root = classified_tree(rank1)
    assert [k.bundle.ascii() for k in root.killed] == ["B[2]o"]
