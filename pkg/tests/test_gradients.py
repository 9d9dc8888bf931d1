import pytest

from ckt_prolong.coeff import N, ONE, rf
from ckt_prolong.gradients import (Finding, bochner_report, build_gradient,
                                   laplacian_decomposition_constant, source_symbol,
                                   verify_gradient_system, weitzenbock_flat)
from ckt_prolong.tensor import (CURVED, SYM2, TensorExpr, canonicalize, declare, metric, nabla,
                                product, tensor)
from ckt_prolong.young import B, L, decompose

T = declare("gT", 2, display="t", latex="t", sym=SYM2, tracefree=[(0, 1)], order=58)


def zero(e):
    return canonicalize(e).is_zero()


@pytest.mark.parametrize("target,source,want", [
    (B(2, 1), B(2), {"K": rf(1, 3), "K1": -ONE / (3 * (N - 1)), "K2": rf(2) / (3 * (N - 1))}),
    (B(3), B(2), {"K": rf(1, 3), "K1": rf(-2) / (3 * (N + 2)), "K2": rf(-2) / (3 * (N + 2))}),
    (L(1), B(2), {"K1": N / ((N + 2) * (N - 1)), "K2": rf(-2) / ((N + 2) * (N - 1))}),
    (B(2), L(1), {"K": rf(1, 2), "K1": -ONE / N}),
])
def test_gradient_constants(target, source, want):
    op = build_gradient(source, target)
    for k, v in want.items():
        assert op.constants[k] == v


def test_hook_gradient_derivative_coefficients():
    op = build_gradient(B(2), B(2, 1))
    assert sorted(op.derivative_coefficients(), key=lambda c: c(5)) == [rf(-1, 3), rf(-1, 3), rf(2, 3)]


def test_symmetric_gradient_of_one_forms():
    op = build_gradient(L(1), B(2))
    s = source_symbol(op.real)
    got = op.apply(tensor(s, "q"), ("q",), ("a", "b"))
    want = (tensor(s, "b", derivs=("a",)) + tensor(s, "a", derivs=("b",))).scale(rf(1, 2)) \
        - product(tensor(s, "c", derivs=("c",)), metric("a", "b")).scale(ONE / N)
    assert zero(got - want)


def test_trace_part_is_the_remainder_of_nabla():
    ops = [build_gradient(L(1), t) for t in decompose(L(1))]
    s = source_symbol(ops[0].real)
    J = tensor(s, "q")
    rest = nabla(J.rename({"q": "b"}), "a")
    for op in ops:
        if op.target != L(0):
            rest = rest - op.apply(J, ("q",), ("a", "b"))
    want = product(tensor(s, "c", derivs=("c",)), metric("a", "b")).scale(ONE / N)
    assert zero(rest - want)


@pytest.mark.parametrize("source", [L(1), B(2), L(0)])
def test_gradient_system_verifies(source):
    findings = verify_gradient_system(source)
    assert findings and all(f.status == "verified" for f in findings)


@pytest.mark.parametrize("source", [L(1), B(2)])
def test_flat_weitzenbock(source):
    assert weitzenbock_flat(source).status == "verified"


def test_adjoint_of_symmetric_gradient_is_minus_divergence():
    op = build_gradient(L(1), B(2))
    y = tensor(T, *op.out)
    got = op.adjoint(y, op.out)
    free = got.free
    assert len(free) == 1
    (a,) = free
    want = tensor(T, "x", a, derivs=("x",)).scale(-1)
    assert zero(got - want)


def test_bochner_combination():
    findings, parts = bochner_report(CURVED)
    by_ref = {}
    for f in findings:
        by_ref.setdefault(f.ref, []).append(f)
    assert by_ref["Bochner combination"][0].status == "verified"
    assert by_ref["G2 adjoint relation"][0].status == "verified"
    assert parts["derivative_part"].is_zero()
    rhs = by_ref["Bochner right-hand side"][0]
    # the engine's curvature part is minus the printed right-hand side
    assert rhs.status == "paper-discrepancy"
    assert "paper" in rhs.payload and "engine" in rhs.payload
    assert canonicalize(parts["curvature_part"] + parts["printed"], CURVED).is_zero()


def test_laplacian_decomposition_constant():
    findings = laplacian_decomposition_constant()
    derived = [f for f in findings if f.status == "derived"]
    assert [f.payload["c"] for f in derived] == ["1"]
    assert {f.payload.get("status") for f in findings if f.status == "paper-discrepancy"} \
        == {"inconsistent", "ill-typed"}


def test_finding_rejects_unknown_status():
    with pytest.raises(ValueError):
        Finding("x", "maybe")
