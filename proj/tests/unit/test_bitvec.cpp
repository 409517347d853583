#include <doctest.h>

#include "canbnn/bitvec.hpp"
#include "canbnn/error.hpp"

using namespace canbnn;

TEST_SUITE_BEGIN("bitvec");

TEST_CASE("empty vector") {
    BitVector v;
    CHECK(v.size() == 0);
    CHECK(v.word_count() == 0);
}

TEST_CASE("set/get across word boundary") {
    BitVector v(73);
    CHECK(v.word_count() == 2);
    CHECK(v.padding_bits() == 55);
    for (std::size_t i = 0; i < 73; ++i) CHECK_FALSE(v.get(i));
    v.set(0, true);
    v.set(63, true);
    v.set(64, true);
    v.set(72, true);
    CHECK(v.get(0));
    CHECK(v.get(63));
    CHECK(v.get(64));
    CHECK(v.get(72));
    CHECK(v.words()[0] == (std::uint64_t{1} | (std::uint64_t{1} << 63)));
    CHECK(v.words()[1] == (std::uint64_t{1} | (std::uint64_t{1} << 8)));
    v.set(63, false);
    CHECK_FALSE(v.get(63));
}

TEST_CASE("padding bits stay zero through set/reset") {
    BitVector v(7);
    for (std::size_t i = 0; i < 7; ++i) v.set(i, true);
    CHECK(v.words()[0] == 0x7F);
    v.reset();
    CHECK(v.words()[0] == 0);
}

TEST_CASE("string round trip") {
    const std::string s = "0110010001";
    BitVector v = BitVector::from_string(s);
    CHECK(v.size() == 10);
    CHECK(v.to_string() == s);
    CHECK(v.get(1));
    CHECK(v.get(2));
    CHECK_FALSE(v.get(3));
}

TEST_CASE("from_string rejects non-binary characters") {
    CHECK_THROWS_AS(BitVector::from_string("0120"), ConfigError);
}

TEST_CASE("equality includes width") {
    BitVector a(5), b(5), c(6);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    b.set(2, true);
    CHECK_FALSE(a == b);
}

TEST_SUITE_END();
