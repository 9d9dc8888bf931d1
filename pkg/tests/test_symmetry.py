import json

import pytest

from ckt_prolong.coeff import N, rf
from ckt_prolong.report import dumps
from ckt_prolong.symmetry import PRINTED, build_ansatz, compare_printed, solve_symmetry, system_for

A = (N - 2) / (2 * N)
B = (N + 2) / (2 * N)
ORDER2 = {"A1": N / (N + 2), "A2": (N + 4) / (N + 2),
          "B1": N * (N - 2) / (4 * (N + 1) * (N + 2)), "B2": (N + 4) / (4 * (N + 1))}


@pytest.fixture(scope="module")
def laplacian2(rank2):
    return solve_symmetry("laplacian", 2, js=rank2)


def test_ansatz_shapes():
    assert build_ansatz(0, "D").text() == "c1 f"
    assert build_ansatz(1, "D").text() == "σ^a∇_a f + A ∇_aσ^a f"
    d2 = build_ansatz(2, "Dhat")
    assert d2.unknowns == ("A2", "B2")
    assert d2.text().count("+") == 2


def test_yamabe_first_order(rank1_curved):
    rep = solve_symmetry("yamabe", 1, js=rank1_curved)
    assert rep.solution.status == "unique"
    assert rep.values() == {"A": A, "B": B}
    assert rep.check.is_zero()
    assert rep.comparison["as_labeled"]


def test_printed_rule_table_pass_is_inconsistent(rank1_curved):
    rep = solve_symmetry("yamabe", 1, js=rank1_curved)
    assert rep.paper_pass["status"] == "inconsistent"
    f = [x for x in rep.findings if x.ref == "printed first-order rule table"][0]
    assert f.status == "paper-discrepancy"
    assert f.payload["conflicting_monomials"]


def test_laplacian_first_order_flat(rank1):
    rep = solve_symmetry("laplacian", 1, js=rank1)
    assert rep.values() == {"A": A, "B": B}
    assert all(f.status in ("verified", "derived") for f in rep.findings)


def test_laplacian_first_order_at_fixed_n(rank1):
    rep = solve_symmetry("laplacian", 1, nval=6, js=rank1)
    assert rep.values() == {"A": rf(1, 3), "B": rf(2, 3)}


def test_order_zero_is_a_multiple_of_identity(rank1):
    rep = solve_symmetry("laplacian", 0, js=rank1)
    assert rep.solution.status == "underdetermined"
    assert rep.check.is_zero()


def test_laplacian_second_order(laplacian2):
    rep = laplacian2
    assert rep.solution.status == "unique"
    assert rep.values() == ORDER2
    assert rep.check.is_zero()


def test_second_order_comparison_needs_the_swap(laplacian2):
    cmp = laplacian2.comparison
    assert cmp["set_equal"] and cmp["swapped"] and not cmp["as_labeled"]
    f = [x for x in laplacian2.findings if x.ref == "printed symmetry coefficients"][0]
    assert f.status == "paper-discrepancy"
    assert set(f.payload) >= {"paper", "engine"}


def test_comparison_verdict_is_stable_at_fixed_n():
    class Sol:
        status = "unique"
        values = {k: rf(v(7)) for k, v in ORDER2.items()}
    cmp = compare_printed("laplacian", 2, Sol(), 7)
    assert (cmp["set_equal"], cmp["as_labeled"], cmp["swapped"]) == (True, False, True)


def test_printed_values_as_a_set():
    assert sorted(str(v) for v in PRINTED[("laplacian", 2)].values()) == \
        sorted(str(v) for v in ORDER2.values())


def test_antisymmetric_jets_drop_out(laplacian2):
    f = [x for x in laplacian2.findings if x.ref == "antisymmetric jet terms"][0]
    assert f.status == "verified"


def test_second_order_yamabe_is_rejected():
    with pytest.raises(ValueError):
        system_for("yamabe", 2)
    with pytest.raises(ValueError):
        system_for("wave", 1)


def test_report_json(laplacian2):
    data = laplacian2.to_json()
    for key in ("operator", "order", "mode", "n", "ansatz", "residual", "system", "solution",
                "residual_after_substitution", "paper-comparison", "paper_pass", "findings"):
        assert key in data
    s = dumps(data)
    assert dumps(json.loads(s)) == s
    assert "A1" in laplacian2.to_text() and "\\widehat{D}" in laplacian2.to_latex()
