#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace canbnn {

// Fixed-width bit vector packed into little-endian 64-bit words.
// Bit i lives in words()[i / 64] at position (i % 64). Padding bits in the
// final partial word are kept at zero so that word-level kernels can mask
// them uniformly.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t n_bits)
        : n_bits_(n_bits), words_((n_bits + 63) / 64, 0) {}

    static BitVector from_string(std::string_view bits01);

    std::size_t size() const noexcept { return n_bits_; }
    std::size_t word_count() const noexcept { return words_.size(); }
    std::span<const std::uint64_t> words() const noexcept { return words_; }
    // Mutable word access used by buffer-poking tests; padding discipline is
    // the caller's responsibility afterwards.
    std::span<std::uint64_t> mutable_words() noexcept { return words_; }

    bool get(std::size_t i) const {
        assert(i < n_bits_);
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }

    void set(std::size_t i, bool v) {
        assert(i < n_bits_);
        const std::uint64_t mask = std::uint64_t{1} << (i & 63);
        if (v)
            words_[i >> 6] |= mask;
        else
            words_[i >> 6] &= ~mask;
    }

    void reset() {
        for (auto& w : words_) w = 0;
    }

    // Number of padding bits in the last word (0 when size is word-aligned).
    std::size_t padding_bits() const noexcept {
        return words_.size() * 64 - n_bits_;
    }

    std::string to_string() const;

    bool operator==(const BitVector&) const = default;

private:
    std::size_t n_bits_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace canbnn
