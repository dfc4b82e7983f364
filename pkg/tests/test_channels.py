import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deanon.channels import (INFINITY, BinaryChannel, binary_entropy, build_joint, entropy,
                             kl_divergence_binary, mutual_information_uy, mutual_information_uz,
                             mutual_information_zy)
from deanon.errors import ParameterError

probs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def hb_reference(q):
    q = mpmath.mpf(q)
    return float(-q * mpmath.log(q, 2) - (1 - q) * mpmath.log(1 - q, 2))


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.1) == pytest.approx(hb_reference(0.1), abs=1e-15)
    assert binary_entropy(0.1) == pytest.approx(0.468995593589281, abs=1e-12)


@pytest.mark.parametrize("q", [-0.01, 1.5])
def test_binary_entropy_rejects(q):
    with pytest.raises(ParameterError):
        binary_entropy(q)


def test_kl_values():
    assert kl_divergence_binary(0.3, 0.3) == 0.0
    expected = 0.5 * math.log2(2) + 0.5 * math.log2(0.5 / 0.75)
    assert kl_divergence_binary(0.5, 0.25) == pytest.approx(expected, abs=1e-15)
    assert kl_divergence_binary(0.5, 0.25) == pytest.approx(0.2075187496, abs=1e-9)
    assert kl_divergence_binary(0.5, 0.0) is INFINITY
    assert kl_divergence_binary(0.0, 0.0) == 0.0
    assert kl_divergence_binary(1.0, 1.0) == 0.0


def test_kl_rejects_out_of_range():
    with pytest.raises(ParameterError):
        kl_divergence_binary(0.5, 1.1)


@given(probs, probs)
def test_kl_nonnegative(q, r):
    assert kl_divergence_binary(q, r) >= 0.0


def test_channel_matrix_rows():
    ch = BinaryChannel(0.1, 0.3)
    assert np.allclose(ch.matrix.sum(axis=1), 1.0)
    assert ch.matrix[1, 0] == 0.1 and ch.matrix[0, 1] == 0.3
    with pytest.raises(ParameterError):
        BinaryChannel(1.5, 0.0)


def test_channel_cascade():
    a, b = BinaryChannel(0.2, 0.1), BinaryChannel(0.3, 0.05)
    c = a.then(b)
    assert np.allclose(c.matrix, a.matrix @ b.matrix)


def test_joint_noiseless_half():
    j = build_joint(0.5, BinaryChannel(), BinaryChannel())
    assert j.table[0, 0, 0] == 0.5 and j.table[1, 1, 1] == 0.5
    assert j.table.sum() == pytest.approx(1.0)
    assert np.count_nonzero(j.table) == 2


def test_joint_pure_noise_output():
    j = build_joint(0.3, BinaryChannel(), BinaryChannel(0.5, 0.5))
    assert j.p_y1 == pytest.approx(0.5)
    # Y independent of (U, Z)
    uz = j.table.sum(axis=1)
    for y in (0, 1):
        assert np.allclose(j.table[:, y, :], 0.5 * uz)


def test_joint_product_entry():
    j = build_joint(0.3, BinaryChannel(0.2, 0.0), BinaryChannel(0.1, 0.0))
    assert j.table[1, 1, 1] == pytest.approx(0.3 * 0.8 * 0.9)
    assert j.table[1, 1, 1] == pytest.approx(0.216)


def test_mutual_information_examples():
    noiseless = build_joint(0.5, BinaryChannel(), BinaryChannel())
    assert mutual_information_uy(noiseless) == pytest.approx(1.0, abs=1e-12)
    assert mutual_information_uy(build_joint(0.5, BinaryChannel(), BinaryChannel(0.5, 0.5))) == \
        pytest.approx(0.0, abs=1e-12)
    low = build_joint(0.1, BinaryChannel(), BinaryChannel())
    assert mutual_information_uy(low) == pytest.approx(hb_reference(0.1), abs=1e-12)


def brute_mi(table2):
    total = 0.0
    pa = table2.sum(axis=1)
    pb = table2.sum(axis=0)
    for a in range(2):
        for b in range(2):
            if table2[a, b] > 0:
                total += table2[a, b] * (math.log2(table2[a, b]) - math.log2(pa[a]) - math.log2(pb[b]))
    return total


@settings(max_examples=200)
@given(probs, probs, probs, probs, probs)
def test_joint_invariants(p, e1, e2, f1, f2):
    j = build_joint(p, BinaryChannel(e1, e2), BinaryChannel(f1, f2))
    t = j.table
    assert (t >= 0).all()
    assert t.sum() == pytest.approx(1.0)
    assert j.p_z1 == pytest.approx(p)
    assert j.p_y1 == pytest.approx(p * (1 - f1) + (1 - p) * f2, abs=1e-12)
    # U and Y independent given Z
    for z in (0, 1):
        pz = t[:, :, z].sum()
        if pz > 0:
            cond = t[:, :, z] / pz
            assert np.allclose(cond, np.outer(cond.sum(axis=1), cond.sum(axis=0)), atol=1e-12)
    i_uy = mutual_information_uy(j)
    assert i_uy == pytest.approx(brute_mi(j.uy), abs=1e-9)
    assert -1e-12 <= i_uy <= min(entropy(j.uy.sum(axis=1)), entropy(j.uy.sum(axis=0))) + 1e-9
    # data processing along U - Z - Y
    assert i_uy <= mutual_information_zy(j) + 1e-9
    assert i_uy <= mutual_information_uz(j) + 1e-9


def test_y_given_u_is_composed_channel():
    j = build_joint(0.3, BinaryChannel(0.2, 0.1), BinaryChannel(0.15, 0.05))
    w = j.y_given_u()
    uz = j.uz
    pz_given_u = uz / uz.sum(axis=1, keepdims=True)
    composed = pz_given_u @ BinaryChannel(0.15, 0.05).matrix
    assert np.allclose(w, composed)


def test_y_given_u_impossible_row_is_nan():
    j = build_joint(0.0, BinaryChannel(), BinaryChannel())
    w = j.y_given_u()
    assert np.isnan(w[1]).all()
    assert np.allclose(w[0], [1.0, 0.0])
