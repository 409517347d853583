#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "canbnn/bitvec.hpp"
#include "canbnn/frame.hpp"

namespace canbnn {

// Interval feature layout: 3 bits, exactly one of three codes.
inline constexpr std::array<std::uint8_t, 3> kIntervalShort{0, 0, 0};  // dt < thres1
inline constexpr std::array<std::uint8_t, 3> kIntervalMid{0, 0, 1};    // thres1 <= dt < thres2
inline constexpr std::array<std::uint8_t, 3> kIntervalLong{0, 1, 0};   // dt >= thres2
inline constexpr std::size_t kIntervalBits = 3;
inline constexpr std::size_t kPayloadBits = 64;

// Maps raw CAN IDs to dense ordinal codes of bit_width bits. The all-ones
// code is reserved for IDs never seen while building, so fuzzed IDs still
// encode instead of failing.
class IdDictionary {
public:
    // Codes assigned in first-appearance order starting at 0.
    static IdDictionary build(std::span<const CanFrame> frames, int bit_width);
    static IdDictionary from_pairs(std::span<const std::pair<std::uint32_t, std::uint32_t>> id_code_pairs,
                                   int bit_width);

    int bit_width() const noexcept { return bit_width_; }
    std::uint32_t unknown_code() const noexcept {
        return (1u << bit_width_) - 1;
    }
    std::size_t size() const noexcept { return codes_.size(); }
    std::uint32_t code_for(std::uint32_t can_id) const;
    bool contains(std::uint32_t can_id) const { return codes_.contains(can_id); }

    // (raw id, code) pairs sorted by code; stable serialization order.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> sorted_pairs() const;

private:
    IdDictionary(int bit_width) : bit_width_(bit_width) {}
    std::unordered_map<std::uint32_t, std::uint32_t> codes_;
    int bit_width_;
};

// Big-endian expansion of the ID's ordinal code into bit_width bits.
BitVector encode_id(const IdDictionary& dict, std::uint32_t can_id);
void encode_id(const IdDictionary& dict, std::uint32_t can_id, BitVector& out,
               std::size_t offset);

// Thresholded 3-state encoding of per-ID inter-arrival times. Stateful:
// single writer per stream.
class IntervalEncoder {
public:
    IntervalEncoder(double thres1, double thres2);

    double thres1() const noexcept { return thres1_; }
    double thres2() const noexcept { return thres2_; }

    // Buckets dt = frame.timestamp - last_seen[frame.can_id] and updates the
    // per-ID state. First occurrence of an ID maps to the long-interval
    // code. Negative dt is an error (the stream was not ordered).
    std::array<std::uint8_t, 3> encode(const CanFrame& frame);

    void reset() { last_seen_.clear(); }

private:
    double thres1_;
    double thres2_;
    std::unordered_map<std::uint32_t, double> last_seen_;
};

// MSB-first expansion of the payload bytes, right zero-padded to 64 bits.
BitVector encode_payload(std::span<const std::uint8_t> payload);
void encode_payload(std::span<const std::uint8_t> payload, BitVector& out,
                    std::size_t offset);

// One binarized message: [id bits | interval bits | payload bits].
struct FeatureVector {
    BitVector bits;
    std::optional<std::uint16_t> label;
};

std::vector<FeatureVector> featurize_stream(std::span<const CanFrame> frames,
                                            const IdDictionary& dict,
                                            IntervalEncoder& encoder);

// Nearest-rank quantiles of the pooled per-ID inter-arrival distribution.
// Returns (thres1, thres2); requires at least one computable interval.
std::pair<double, double> fit_thresholds(std::span<const CanFrame> frames,
                                         double q_low = 0.01, double q_high = 0.99);

// Everything inference needs to reproduce training-time encoding bit-exactly.
struct FeaturizerConfig {
    int bit_width = 6;
    double thres1 = 0.0;
    double thres2 = 0.0;
    double q_low = 0.01;
    double q_high = 0.99;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> id_codes;  // sorted by code

    std::size_t feature_width() const {
        return static_cast<std::size_t>(bit_width) + kIntervalBits + kPayloadBits;
    }
    IdDictionary dictionary() const;
    IntervalEncoder interval_encoder() const { return {thres1, thres2}; }

    std::string to_json() const;  // canonical compact form, also the hash input
    static FeaturizerConfig from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static FeaturizerConfig load(const std::filesystem::path& path);

    // FNV-1a over the canonical JSON; stored in checkpoints and packed models
    // so mismatched featurization is caught at load time.
    std::uint64_t content_hash() const;
};

}  // namespace canbnn
