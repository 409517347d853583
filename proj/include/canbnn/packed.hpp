#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "canbnn/bitvec.hpp"
#include "canbnn/bnn.hpp"

namespace canbnn {

// +-1 dot product of two packed bit rows (bit 1 == +1) over the first
// n_bits bits: 2 * popcount(XNOR masked to n_bits) - n_bits.
int xnor_dot(std::span<const std::uint64_t> w, std::span<const std::uint64_t> x,
             std::size_t n_bits);

// Integer comparison equivalent of BatchNorm + Sign at inference time.
// orientation +1: neuron fires (outputs +1) iff a >= threshold;
// orientation -1: fires iff a <= threshold. a is the integer +-1 dot
// product in [-n, n]; bias is absorbed into the threshold.
struct FoldedNeuron {
    std::int32_t threshold = 0;
    std::int8_t orientation = +1;
};

// sigma is the normalization denominator sqrt(var + eps); must be > 0.
// gamma == 0 collapses to a constant neuron (sign(beta)).
FoldedNeuron fold_batchnorm(double bias, double gamma, double beta, double mean,
                            double sigma, std::size_t n_in);

struct PackedLayer {
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    std::size_t words_per_row = 0;
    std::vector<std::uint64_t> weight_bits;  // n_out rows of words_per_row words
    std::vector<std::int32_t> thresholds;
    std::vector<std::int8_t> orientations;

    const std::uint64_t* row(std::size_t j) const {
        return weight_bits.data() + j * words_per_row;
    }
};

struct PackedHead {
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    std::size_t words_per_row = 0;
    std::vector<std::uint64_t> weight_bits;
    std::vector<double> scale;
    std::vector<double> shift;

    const std::uint64_t* row(std::size_t j) const {
        return weight_bits.data() + j * words_per_row;
    }
};

struct PackedModel {
    std::vector<int> topology;
    TaskMode mode = TaskMode::binary;
    std::uint64_t featurizer_hash = 0;
    std::vector<PackedLayer> layers;
    PackedHead head;

    static PackedModel pack(const BnnModel& model);

    std::size_t input_width() const { return static_cast<std::size_t>(topology.front()); }
    std::size_t output_width() const { return static_cast<std::size_t>(topology.back()); }
    // Bytes of the weight/threshold/affine arrays (the inference footprint).
    std::size_t byte_size() const;

    void save(const std::filesystem::path& path) const;
    void save(std::ostream& out) const;
    static PackedModel load(const std::filesystem::path& path);
    static PackedModel load(std::istream& in);
    std::string serialize() const;
};

// Single-thread inference engine over a PackedModel. All scratch buffers
// are allocated at construction; infer() performs no dynamic allocation.
// Returned spans point into internal storage valid until the next call.
class PackedEvaluator {
public:
    // The model must outlive the evaluator (only a pointer is kept).
    explicit PackedEvaluator(const PackedModel& model);
    explicit PackedEvaluator(PackedModel&&) = delete;

    // x must carry exactly input_width() bits; padding bits are ignored.
    std::span<const double> infer(const BitVector& x);
    std::span<const double> infer_bits(std::span<const std::uint64_t> x_words,
                                       std::size_t n_bits);

    // Convenience wrapper applying sigmoid/softmax; allocates the result.
    std::vector<double> probabilities(const BitVector& x);

    // Test hook: when set, each call appends nothing but overwrites *sink
    // with the +-1 hidden activation bits of every layer (allocates).
    void set_capture(std::vector<BitVector>* sink) { capture_ = sink; }

private:
    const PackedModel* model_;
    std::vector<std::uint64_t> buf_a_;
    std::vector<std::uint64_t> buf_b_;
    std::vector<double> logits_;
    std::vector<BitVector>* capture_ = nullptr;
};

}  // namespace canbnn
