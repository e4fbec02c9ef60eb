import itertools

import numpy as np
import pytest

from services.bitcore import (
    BitVector, GF2Field, apply_columns, apply_columns_array, columns_to_rows, find_irreducible,
    gf2_kernel_basis, gf2_rank, gf2w_mul, inner_product, is_irreducible, select_bits, standard_modulus,
)
from services.errors import IndexOutOfRangeError, LengthMismatchError, ParameterError


class TestBitVector:
    """Test cases for BitVector."""

    def test_string_round_trip_keeps_index_order(self):
        """Test that text lists index 0 first and index 0 is the low bit."""
        x = BitVector.from_string("10110")
        assert x.length == 5
        assert x.bits == 0b01101
        assert x.to_string() == "10110"
        assert x[0] == 1 and x[1] == 0 and x[4] == 0

    def test_hex_serialization(self):
        """Test the len:hex format, including leading zero bits."""
        x = BitVector(12, 0x0f3)
        assert x.to_hex() == "12:f3"
        assert BitVector.from_hex("12:f3") == x
        assert BitVector.from_hex("0:") == BitVector(0, 0)

    def test_malformed_hex(self):
        """Test that malformed serializations raise ParameterError."""
        with pytest.raises(ParameterError, match="len:hex"):
            BitVector.from_hex("zz")

    def test_payload_must_fit(self):
        """Test that payload bits above the length are rejected."""
        with pytest.raises(ParameterError, match="does not fit"):
            BitVector(3, 0b1000)

    def test_out_of_range_index(self):
        """Test that indexing outside [0, length) raises IndexOutOfRangeError."""
        x = BitVector.zeros(4)
        with pytest.raises(IndexOutOfRangeError):
            x[4]
        with pytest.raises(IndexError):
            x.flip(-1)

    def test_xor_requires_equal_lengths(self):
        """Test that XOR of unequal lengths raises LengthMismatchError."""
        with pytest.raises(LengthMismatchError):
            BitVector.zeros(3) ^ BitVector.zeros(4)

    def test_join_and_split(self):
        """Test that the first joined vector occupies the lowest indices."""
        a = BitVector.from_string("110")
        b = BitVector.from_string("01")
        joined = BitVector.join([a, b])
        assert joined.to_string() == "11001"
        assert joined.split([3, 2]) == [a, b]
        with pytest.raises(LengthMismatchError):
            joined.split([3, 3])

    def test_random_is_reproducible(self):
        """Test that random vectors depend only on the generator seed."""
        a = BitVector.random(100, np.random.default_rng(5))
        b = BitVector.random(100, np.random.default_rng(5))
        assert a == b
        assert a.length == 100


class TestInnerProduct:
    """Test cases for inner_product."""

    @pytest.mark.parametrize("a,b,expected", [
        ("0000", "1011", 0),
        ("1011", "1001", 0),
        ("1", "1", 1),
        ("111", "101", 0),
        ("110", "100", 1),
    ])
    def test_examples(self, a, b, expected):
        """Test hand-computed inner products."""
        assert inner_product(BitVector.from_string(a), BitVector.from_string(b)) == expected

    def test_length_mismatch(self):
        """Test that unequal lengths are rejected."""
        with pytest.raises(LengthMismatchError):
            inner_product(BitVector.zeros(2), BitVector.zeros(3))

    def test_bilinearity_exhaustive(self):
        """Test <a ⊕ a', b> = <a, b> ⊕ <a', b> for every triple of length 5."""
        vectors = [BitVector(5, v) for v in range(32)]
        for a, a2, b in itertools.product(vectors, repeat=3):
            assert inner_product(a ^ a2, b) == inner_product(a, b) ^ inner_product(a2, b)


class TestSelectBits:
    """Test cases for select_bits."""

    def test_examples(self):
        """Test direct indexing, empty selection and duplication."""
        x = BitVector.from_string("10110")
        assert select_bits(x, [0, 2]).to_string() == "11"
        assert select_bits(x, []) == BitVector(0, 0)
        assert select_bits(x, [3, 3]).to_string() == "11"
        assert select_bits(x, [1, 1]).to_string() == "00"

    def test_out_of_range(self):
        """Test that an index outside the vector is rejected."""
        with pytest.raises(IndexOutOfRangeError):
            select_bits(BitVector.zeros(3), [3])

    def test_composition(self):
        """Test select(select(x, I), J) = select(x, I∘J)."""
        rng = np.random.default_rng(1)
        x = BitVector.random(20, rng)
        I = [int(i) for i in rng.integers(0, 20, size=12)]
        J = [int(j) for j in rng.integers(0, 12, size=7)]
        assert select_bits(select_bits(x, I), J) == select_bits(x, [I[j] for j in J])


class TestGF2Field:
    """Test cases for GF(2^w) arithmetic."""

    def test_hand_product(self):
        """Test x^2 · x = x + 1 modulo x^3 + x + 1."""
        field = GF2Field(3, 0b1011)
        assert gf2w_mul(0b100, 0b010, field) == 0b011

    def test_identity_and_zero(self):
        """Test that 1 is neutral and 0 annihilates in GF(2^4)."""
        field = GF2Field.standard(4)
        for a in range(16):
            assert gf2w_mul(a, 1, field) == a
            assert gf2w_mul(0, a, field) == 0

    def test_range_check(self):
        """Test that elements outside the field are rejected."""
        with pytest.raises(ParameterError, match="outside"):
            gf2w_mul(16, 1, GF2Field.standard(4))

    @pytest.mark.parametrize("w", [1, 2, 3, 5, 8])
    def test_nonzero_multiplication_is_bijection(self, w):
        """Test that multiplication by a fixed nonzero element permutes the field."""
        field = GF2Field.standard(w)
        for a in range(1, 1 << w):
            assert sorted(field.mul(a, b) for b in range(1 << w)) == list(range(1 << w))

    def test_field_axioms_gf16(self):
        """Test associativity, commutativity and distributivity exhaustively in GF(2^4)."""
        field = GF2Field.standard(4)
        for a, b, c in itertools.product(range(16), repeat=3):
            assert field.mul(a, field.mul(b, c)) == field.mul(field.mul(a, b), c)
            assert field.mul(a, b) == field.mul(b, a)
            assert field.mul(a, b ^ c) == field.mul(a, b) ^ field.mul(a, c)

    def test_inverse(self):
        """Test a · a^{-1} = 1 for every nonzero element of GF(2^5)."""
        field = GF2Field.standard(5)
        for a in range(1, 32):
            assert field.mul(a, field.inverse(a)) == 1
        with pytest.raises(ParameterError):
            field.inverse(0)

    def test_reducible_modulus_rejected(self):
        """Test that x^2 + 1 = (x + 1)^2 is refused."""
        with pytest.raises(ParameterError, match="reducible"):
            GF2Field(2, 0b101)

    @pytest.mark.parametrize("w", [1, 2, 3, 4, 7, 8, 16, 31, 64])
    def test_table_moduli_are_irreducible(self, w):
        """Test that the built-in moduli pass Rabin's test and have the right degree."""
        modulus = standard_modulus(w)
        assert modulus.bit_length() - 1 == w
        assert is_irreducible(modulus)

    def test_find_irreducible_beyond_table(self):
        """Test the search path for a degree without a table entry."""
        modulus = find_irreducible(65)
        assert modulus.bit_length() - 1 == 65
        assert is_irreducible(modulus)

    def test_mul_array_matches_scalar(self):
        """Test the vectorized product against the scalar one."""
        field = GF2Field.standard(8)
        a = np.arange(256, dtype=np.uint64)
        b = np.full(256, 0x57, dtype=np.uint64)
        expected = [field.mul(int(x), 0x57) for x in range(256)]
        assert field.mul_array(a, b).tolist() == expected


class TestLinearAlgebra:
    """Test cases for packed GF(2) linear algebra."""

    def test_rank(self):
        """Test rank with a dependent row."""
        assert gf2_rank([0b011, 0b101, 0b110]) == 2
        assert gf2_rank([]) == 0
        assert gf2_rank([0b1, 0b10, 0b100]) == 3

    def test_kernel_basis(self):
        """Test that kernel vectors annihilate every row and have the right dimension."""
        rng = np.random.default_rng(3)
        rows = [int(r) for r in rng.integers(0, 1 << 10, size=6)]
        basis = gf2_kernel_basis(rows, 10)
        assert len(basis) == 10 - gf2_rank(rows)
        assert gf2_rank(basis) == len(basis)
        for v in basis:
            for r in rows:
                assert (v & r).bit_count() % 2 == 0

    def test_apply_columns(self):
        """Test column application and its vectorized form."""
        columns = [0b01, 0b10, 0b11]
        assert apply_columns(columns, 0b101) == 0b10
        xs = np.arange(8, dtype=np.uint64)
        assert apply_columns_array(columns, xs).tolist() == [apply_columns(columns, x) for x in range(8)]

    def test_columns_to_rows(self):
        """Test the transpose of a column list."""
        assert columns_to_rows([0b01, 0b10, 0b11], 2) == [0b101, 0b110]
