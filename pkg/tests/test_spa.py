import numpy as np
import pytest

from coopdecode.codes import ParityCheckMatrix, code_from_h
from coopdecode.errors import DimensionError, ParameterError
from coopdecode.ldpc_coop import DecodeStatus
from coopdecode.oracle import bitwise_map_bruteforce, ml_decode_bruteforce
from coopdecode.spa import SumProductDecoder, decode_sum_product

from instances import random_tree_code


def test_noiseless_one_iteration(product82):
    res = decode_sum_product(product82, -20.0 * np.ones(64))
    assert res.iterations == 1
    assert res.status == DecodeStatus.SYNDROME_ONLY
    assert not res.codeword.any()


def test_corrects_single_flip(hamming):
    x = hamming.encode(np.array([1, 0, 1, 1]))
    llr = np.where(x == 1, 4.0, -4.0)
    llr[2] = -llr[2] * 0.5   # flipped, weaker
    res = decode_sum_product(hamming, llr)
    ml, _, _ = ml_decode_bruteforce(hamming, llr)
    assert res.codeword.tolist() == x.tolist() == ml.tolist()


def test_single_check_one_iteration_is_map():
    code = code_from_h(ParityCheckMatrix.from_rows(4, [[0, 1, 2, 3]]))
    rng = np.random.default_rng(0)
    for _ in range(50):
        llr = 2 * rng.standard_normal(4)
        res = decode_sum_product(code, llr, max_iterations=1, early_stop=False)
        post = bitwise_map_bruteforce(code, llr)
        assert np.allclose(res.posterior, post, atol=1e-9)
        assert res.codeword.tolist() == (post > 0).astype(int).tolist()


def test_tree_codes_exact():
    rng = np.random.default_rng(1)
    for _ in range(20):
        h = random_tree_code(rng)
        code = code_from_h(h)
        llr = 1.5 * rng.standard_normal(h.n)
        res = decode_sum_product(code, llr, max_iterations=h.rows + 1, early_stop=False)
        assert np.allclose(res.posterior, bitwise_map_bruteforce(code, llr), atol=1e-7)


def test_sign_symmetry(product82):
    # flipping every LLR and complementing the word is a symmetry only for even-weight checks
    assert all(len(r) % 2 == 0 for r in product82.h.row_support)
    rng = np.random.default_rng(2)
    dec = SumProductDecoder(product82)
    for _ in range(20):
        llr = 2 * rng.standard_normal(64) - 0.5
        a = dec.decode(llr)
        b = dec.decode(-llr)
        assert a.iterations == b.iterations
        assert (a.codeword ^ 1).tolist() == b.codeword.tolist()


def test_deterministic_and_batched(product82):
    rng = np.random.default_rng(3)
    llr = rng.standard_normal((5, 64))
    dec = SumProductDecoder(product82)
    batch = dec.decode_batch(llr)
    for row, res in zip(llr, batch):
        single = dec.decode(row)
        assert single.codeword.tolist() == res.codeword.tolist()
        assert np.array_equal(single.posterior, res.posterior)


def test_cap_and_errors(product82):
    res = decode_sum_product(product82, 0.05 * np.random.default_rng(4).standard_normal(64), max_iterations=3)
    assert res.iterations <= 3
    with pytest.raises(DimensionError):
        decode_sum_product(product82, np.zeros(10))
    with pytest.raises(ParameterError):
        SumProductDecoder(product82, max_iterations=0)


def test_extreme_llrs_stay_finite(hamming):
    res = decode_sum_product(hamming, np.array([1e6, -1e6, 0.0, 1e6, -1e6, 1e-300, 50.0]))
    assert np.isfinite(res.posterior).all()
