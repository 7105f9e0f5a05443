"""
Dense tensor primitives

1. linearization and reshape
2. mode products and Kronecker products
3. contractions with repeated vectors
4. symmetrization
5. element budget
6. vec and Kronecker identities against loop oracles
"""
from itertools import permutations, product

import numpy as np
import pytest

from errors import ElementBudgetExceeded, InvalidArguments, ShapeMismatch
from tensor_core import (
    DenseTensor,
    contract,
    contract_mimo,
    kron_power,
    kronecker,
    mode_product,
    reshape,
    symmetrize,
    symmetry_defect,
    vectorize,
)


def _counting_tensor():
    return DenseTensor((4, 3, 2), np.arange(1, 25, dtype=float))


def test_reshape_keeps_first_index_fastest():
    r = reshape(_counting_tensor(), [4, 6])
    assert r.dims == (4, 6)
    first_row = r.as_array()[0]
    assert np.array_equal(first_row, [1, 5, 9, 13, 17, 21]), f"got {first_row}"


def test_reshape_never_reorders_data():
    t = _counting_tensor()
    assert np.array_equal(reshape(t, [2, 12]).data, t.data)
    assert np.array_equal(reshape(reshape(t, [24]), [4, 3, 2]).as_array(), t.as_array())


def test_reshape_rejects_wrong_element_count():
    with pytest.raises(ShapeMismatch):
        reshape(_counting_tensor(), [5, 5])


def test_vectorize_is_a_column():
    v = vectorize(_counting_tensor())
    assert v.dims == (24, 1)
    assert v.entry(5, 0) == 6.0


def test_entry_uses_zero_based_indices():
    t = _counting_tensor()
    # (i, j, k) sits at i + 4j + 12k
    assert t.entry(1, 2, 1) == 1 + (1 + 4 * 2 + 12 * 1)


def test_data_length_must_match_dims():
    with pytest.raises(ShapeMismatch):
        DenseTensor((2, 2), np.arange(5.0))
    with pytest.raises(InvalidArguments):
        DenseTensor((2, 0), np.zeros(0))


def test_mode_product_matches_einsum(rng):
    a = rng.standard_normal((2, 3, 4))
    m = rng.standard_normal((5, 3))
    out = mode_product(a, m, 2)
    assert out.dims == (2, 5, 4)
    expected = np.einsum('ja,iak->ijk', m, a)
    assert np.allclose(out.as_array(), expected, atol=1e-13)


def test_mode_product_rejects_bad_modes(rng):
    a = rng.standard_normal((2, 3, 4))
    with pytest.raises(InvalidArguments):
        mode_product(a, np.eye(3), 4)
    with pytest.raises(ShapeMismatch):
        mode_product(a, np.eye(2), 2)


def test_kronecker_blocks(rng):
    b = rng.standard_normal((2, 3))
    c = rng.standard_normal((4, 2))
    k = kronecker(b, c).as_array()
    assert k.shape == (8, 6)
    for i in range(2):
        for j in range(3):
            block = k[4 * i:4 * (i + 1), 2 * j:2 * (j + 1)]
            assert np.array_equal(block, b[i, j] * c), f"block ({i}, {j})"


def test_kron_power_small_cases():
    assert np.array_equal(kron_power([1.0, 2.0], 0), [1.0])
    assert np.array_equal(kron_power([1.0, 2.0], 1), [1.0, 2.0])
    assert np.array_equal(kron_power([1.0, 2.0], 2), [1.0, 2.0, 2.0, 4.0])
    with pytest.raises(InvalidArguments):
        kron_power([1.0], -1)


def test_contract_equals_vec_times_kron_power(rng):
    a = DenseTensor.from_array(rng.standard_normal((3, 3, 3)))
    x = rng.standard_normal(3)
    assert contract(a, x) == pytest.approx(float(a.data @ kron_power(x, 3)), rel=1e-12, abs=1e-12)


def test_contract_rejects_non_cubical(rng):
    with pytest.raises(ShapeMismatch):
        contract(rng.standard_normal((3, 2)), np.ones(3))


def test_contract_mimo_per_output(rng):
    a = rng.standard_normal((2, 4, 4))
    x = rng.standard_normal(4)
    out = contract_mimo(a, x)
    assert out.shape == (2,)
    for o in range(2):
        assert out[o] == pytest.approx(contract(a[o], x), rel=1e-12, abs=1e-12)


def test_symmetrize_leaves_symmetric_tensor_unchanged(rng):
    g = rng.standard_normal(3)
    a = np.einsum('i,j,k->ijk', g, g, g)
    assert np.allclose(symmetrize(a).as_array(), a, atol=1e-12)
    assert symmetry_defect(a) < 1e-12


def test_symmetrize_preserves_polynomial(rng):
    a = rng.standard_normal((3, 3, 3))
    s = symmetrize(a)
    assert symmetry_defect(s) < 1e-12
    for _ in range(5):
        x = rng.standard_normal(3)
        assert contract(s, x) == pytest.approx(contract(a, x), rel=1e-10, abs=1e-12)


def test_symmetrize_requires_cubical_tensor(rng):
    with pytest.raises(ShapeMismatch):
        symmetrize(rng.standard_normal((2, 3)))


def test_budget_guard_on_construction(monkeypatch):
    monkeypatch.setenv('VTTN_ELEMENT_BUDGET', '10')
    with pytest.raises(ElementBudgetExceeded) as info:
        DenseTensor.from_array(np.zeros(11))
    assert info.value.requested == 11
    assert info.value.budget == 10
    DenseTensor.from_array(np.zeros(10))


def _random_shapes(rng, count):
    return [tuple(int(v) for v in rng.integers(1, 5, size=count)) for _ in range(1000)]


def test_mixed_product_property(rng):
    for m, n, q, r, s, t in _random_shapes(rng, 6):
        A, B = rng.standard_normal((m, n)), rng.standard_normal((q, r))
        C, D = rng.standard_normal((n, s)), rng.standard_normal((r, t))
        lhs = kronecker(A, B).as_array() @ kronecker(C, D).as_array()
        np.testing.assert_allclose(lhs, kronecker(A @ C, B @ D).as_array(), rtol=1e-12, atol=1e-12)


def test_vec_of_triple_product(rng):
    for m, n, q, r in _random_shapes(rng, 4):
        A, B, C = rng.standard_normal((m, n)), rng.standard_normal((n, q)), rng.standard_normal((q, r))
        lhs = vectorize(DenseTensor.from_array(A @ B @ C)).data
        rhs = kronecker(C.T, A).as_array() @ vectorize(DenseTensor.from_array(B)).data
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_vec_of_two_sided_product(rng):
    for m, n, q, r in _random_shapes(rng, 4):
        A = rng.standard_normal((n, r))
        U1, U2 = rng.standard_normal((m, n)), rng.standard_normal((q, r))
        lhs = vectorize(DenseTensor.from_array(U1 @ A @ U2.T)).data
        rhs = kronecker(U2, U1).as_array() @ vectorize(DenseTensor.from_array(A)).data
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_two_mode_products_of_a_matrix():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    B = np.array([[0.0, 1.0], [1.0, 1.0], [2.0, -1.0]])
    C = np.array([[1.0, -1.0]])
    out = mode_product(mode_product(A, B, 1), C, 2).as_array()
    assert out.shape == (3, 1)
    assert np.array_equal(out, B @ A @ C.T)
    assert np.array_equal(out[:, 0], [-1.0, -2.0, -1.0])


def test_contract_matches_explicit_sum(rng):
    for d in (1, 2, 3):
        a = rng.standard_normal((3,) * d)
        x = rng.standard_normal(3)
        expected = sum(a[idx] * np.prod(x[list(idx)]) for idx in product(range(3), repeat=d))
        assert contract(a, x) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_symmetrize_matches_entrywise_average(rng):
    a = rng.standard_normal((3, 3, 3))
    s = symmetrize(a).as_array()
    for idx in product(range(3), repeat=3):
        entries = [a[perm] for perm in permutations(idx)]
        assert s[idx] == pytest.approx(sum(entries) / 6, rel=1e-12, abs=1e-14)
