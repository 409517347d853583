#include "canbnn/featurizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "canbnn/error.hpp"

namespace canbnn {

namespace {

void check_bit_width(int bit_width) {
    if (bit_width < 6 || bit_width > 8)
        throw ConfigError("bit_width must be in [6, 8], got " + std::to_string(bit_width));
}

}  // namespace

IdDictionary IdDictionary::build(std::span<const CanFrame> frames, int bit_width) {
    check_bit_width(bit_width);
    IdDictionary dict(bit_width);
    const std::size_t capacity = (std::size_t{1} << bit_width) - 1;
    std::size_t distinct = 0;
    for (const CanFrame& f : frames) {
        if (dict.codes_.contains(f.can_id)) continue;
        ++distinct;
        if (distinct > capacity) {
            // Keep counting so the error can report the true demand.
            for (const CanFrame& g : frames) {
                if (!dict.codes_.contains(g.can_id))
                    dict.codes_.emplace(g.can_id, 0);
            }
            const std::size_t total = dict.codes_.size();
            int needed = bit_width;
            while (needed <= 32 && total > (std::size_t{1} << needed) - 1) ++needed;
            throw DataError("too many distinct CAN IDs (" + std::to_string(total) +
                            ") for bit_width " + std::to_string(bit_width) +
                            "; minimum bit_width is " + std::to_string(needed));
        }
        dict.codes_.emplace(f.can_id, static_cast<std::uint32_t>(distinct - 1));
    }
    return dict;
}

IdDictionary IdDictionary::from_pairs(
    std::span<const std::pair<std::uint32_t, std::uint32_t>> id_code_pairs,
    int bit_width) {
    check_bit_width(bit_width);
    IdDictionary dict(bit_width);
    for (const auto& [id, code] : id_code_pairs) {
        if (code >= dict.unknown_code())
            throw ConfigError("ID code " + std::to_string(code) +
                              " collides with the reserved unknown code");
        if (!dict.codes_.emplace(id, code).second)
            throw ConfigError("duplicate CAN ID in dictionary");
    }
    // Distinct codes required.
    std::vector<std::uint32_t> codes;
    codes.reserve(dict.codes_.size());
    for (const auto& [id, code] : dict.codes_) codes.push_back(code);
    std::sort(codes.begin(), codes.end());
    if (std::adjacent_find(codes.begin(), codes.end()) != codes.end())
        throw ConfigError("duplicate code in ID dictionary");
    return dict;
}

std::uint32_t IdDictionary::code_for(std::uint32_t can_id) const {
    const auto it = codes_.find(can_id);
    return it == codes_.end() ? unknown_code() : it->second;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> IdDictionary::sorted_pairs() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(codes_.begin(), codes_.end());
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    return pairs;
}

void encode_id(const IdDictionary& dict, std::uint32_t can_id, BitVector& out,
               std::size_t offset) {
    const std::uint32_t code = dict.code_for(can_id);
    const int w = dict.bit_width();
    for (int i = 0; i < w; ++i)
        out.set(offset + i, (code >> (w - 1 - i)) & 1u);
}

BitVector encode_id(const IdDictionary& dict, std::uint32_t can_id) {
    BitVector v(dict.bit_width());
    encode_id(dict, can_id, v, 0);
    return v;
}

IntervalEncoder::IntervalEncoder(double thres1, double thres2)
    : thres1_(thres1), thres2_(thres2) {
    if (!(thres1 > 0.0) || !(thres2 > thres1))
        throw ConfigError("interval thresholds must satisfy 0 < thres1 < thres2");
}

std::array<std::uint8_t, 3> IntervalEncoder::encode(const CanFrame& frame) {
    const auto it = last_seen_.find(frame.can_id);
    if (it == last_seen_.end()) {
        last_seen_.emplace(frame.can_id, frame.timestamp);
        return kIntervalLong;
    }
    const double dt = frame.timestamp - it->second;
    if (dt < 0.0)
        throw DataError("negative inter-arrival interval for CAN ID " +
                        std::to_string(frame.can_id) + " (stream out of order)");
    it->second = frame.timestamp;
    if (dt < thres1_) return kIntervalShort;
    if (dt < thres2_) return kIntervalMid;
    return kIntervalLong;
}

void encode_payload(std::span<const std::uint8_t> payload, BitVector& out,
                    std::size_t offset) {
    if (payload.size() > 8) throw DataError("payload exceeds 8 bytes");
    std::size_t pos = offset;
    for (const std::uint8_t byte : payload)
        for (int bit = 7; bit >= 0; --bit) out.set(pos++, (byte >> bit) & 1u);
    // Remaining slots stay zero (dlc < 8 right-padding).
}

BitVector encode_payload(std::span<const std::uint8_t> payload) {
    BitVector v(kPayloadBits);
    encode_payload(payload, v, 0);
    return v;
}

std::vector<FeatureVector> featurize_stream(std::span<const CanFrame> frames,
                                            const IdDictionary& dict,
                                            IntervalEncoder& encoder) {
    const std::size_t id_bits = static_cast<std::size_t>(dict.bit_width());
    const std::size_t width = id_bits + kIntervalBits + kPayloadBits;
    std::vector<FeatureVector> out;
    out.reserve(frames.size());
    for (const CanFrame& frame : frames) {
        FeatureVector fv;
        fv.bits = BitVector(width);
        encode_id(dict, frame.can_id, fv.bits, 0);
        const auto interval = encoder.encode(frame);
        for (std::size_t i = 0; i < kIntervalBits; ++i)
            fv.bits.set(id_bits + i, interval[i] != 0);
        encode_payload({frame.payload.data(), frame.dlc}, fv.bits, id_bits + kIntervalBits);
        fv.label = frame.label;
        out.push_back(std::move(fv));
    }
    return out;
}

std::pair<double, double> fit_thresholds(std::span<const CanFrame> frames,
                                         double q_low, double q_high) {
    if (!(q_low > 0.0) || !(q_high > q_low) || !(q_high < 1.0))
        throw ConfigError("quantiles must satisfy 0 < q_low < q_high < 1");
    std::unordered_map<std::uint32_t, double> last_seen;
    std::vector<double> intervals;
    for (const CanFrame& f : frames) {
        const auto it = last_seen.find(f.can_id);
        if (it != last_seen.end()) {
            const double dt = f.timestamp - it->second;
            if (dt < 0.0)
                throw DataError("negative inter-arrival interval while fitting thresholds");
            intervals.push_back(dt);
            it->second = f.timestamp;
        } else {
            last_seen.emplace(f.can_id, f.timestamp);
        }
    }
    if (intervals.empty())
        throw DataError("no computable inter-arrival intervals (every ID seen at most once)");
    std::sort(intervals.begin(), intervals.end());
    const auto nearest_rank = [&](double q) {
        const std::size_t n = intervals.size();
        std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
        if (rank < 1) rank = 1;
        if (rank > n) rank = n;
        return intervals[rank - 1];
    };
    double t1 = nearest_rank(q_low);
    double t2 = nearest_rank(q_high);
    if (!(t1 > 0.0))
        throw DataError("fitted thres1 is not positive; benign stream contains "
                        "zero-length intervals at the chosen quantile");
    if (!(t2 > t1)) {
        // Degenerate (near-constant) interval distribution; widen minimally.
        t2 = t1 * (1.0 + 1e-9);
    }
    return {t1, t2};
}

IdDictionary FeaturizerConfig::dictionary() const {
    return IdDictionary::from_pairs(id_codes, bit_width);
}

}  // namespace canbnn
