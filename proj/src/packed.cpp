#include "canbnn/packed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "binio.hpp"
#include "canbnn/error.hpp"

namespace canbnn {

int xnor_dot(std::span<const std::uint64_t> w, std::span<const std::uint64_t> x,
             std::size_t n_bits) {
    const std::size_t full = n_bits >> 6;
    int agree = 0;
    for (std::size_t i = 0; i < full; ++i)
        agree += std::popcount(~(w[i] ^ x[i]));
    const std::size_t rem = n_bits & 63;
    if (rem) {
        const std::uint64_t mask = (std::uint64_t{1} << rem) - 1;
        agree += std::popcount(~(w[full] ^ x[full]) & mask);
    }
    return 2 * agree - static_cast<int>(n_bits);
}

FoldedNeuron fold_batchnorm(double bias, double gamma, double beta, double mean,
                            double sigma, std::size_t n_in) {
    if (!(sigma > 0.0)) throw DataError("batch-norm sigma must be positive");
    const auto n = static_cast<double>(n_in);
    FoldedNeuron f;
    if (gamma == 0.0) {
        // Constant neuron: output sign(beta) regardless of the accumulator.
        f.orientation = +1;
        f.threshold = static_cast<std::int32_t>(beta >= 0.0 ? -(n + 1.0) : (n + 1.0));
        return f;
    }
    double t_real = mean - bias - beta * sigma / gamma;
    // Accumulators live in [-n, n]; clamping keeps the integer threshold
    // small without changing the decision on any reachable value.
    t_real = std::clamp(t_real, -(n + 1.0), n + 1.0);
    if (gamma > 0.0) {
        f.orientation = +1;  // fires iff a >= ceil(t_real)
        f.threshold = static_cast<std::int32_t>(std::ceil(t_real));
    } else {
        f.orientation = -1;  // fires iff a <= floor(t_real)
        f.threshold = static_cast<std::int32_t>(std::floor(t_real));
    }
    return f;
}

namespace {

std::size_t words_for(std::size_t bits) { return (bits + 63) / 64; }

// Packs sign(w[0..n)) into words, bit 1 for +1; padding bits zero.
void pack_sign_row(const double* w, std::size_t n, std::uint64_t* out,
                   std::size_t words) {
    std::fill_n(out, words, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (w[i] >= 0.0) out[i >> 6] |= std::uint64_t{1} << (i & 63);
}

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw DataError(std::string("non-finite ") + what);
}

}  // namespace

PackedModel PackedModel::pack(const BnnModel& model) {
    PackedModel p;
    p.topology = model.topology;
    p.mode = model.mode;
    p.featurizer_hash = model.featurizer_hash;

    p.layers.resize(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const BnnLayer& src = model.layers[l];
        PackedLayer& dst = p.layers[l];
        dst.n_in = src.weights.cols;
        dst.n_out = src.weights.rows;
        dst.words_per_row = words_for(dst.n_in);
        dst.weight_bits.assign(dst.n_out * dst.words_per_row, 0);
        dst.thresholds.resize(dst.n_out);
        dst.orientations.resize(dst.n_out);

        require_finite(src.weights.data, "layer weight");
        require_finite(src.bias, "layer bias");
        require_finite(src.gamma, "batch-norm gamma");
        require_finite(src.beta, "batch-norm beta");
        require_finite(src.run_mean, "batch-norm running mean");
        require_finite(src.run_var, "batch-norm running variance");

        for (std::size_t j = 0; j < dst.n_out; ++j) {
            pack_sign_row(src.weights.row(j), dst.n_in,
                          dst.weight_bits.data() + j * dst.words_per_row, dst.words_per_row);
            if (src.run_var[j] < 0.0) throw DataError("negative running variance");
            const double sigma = std::sqrt(src.run_var[j] + kBnEpsilon);
            const FoldedNeuron f =
                fold_batchnorm(src.bias[j], src.gamma[j], src.beta[j], src.run_mean[j], sigma,
                               dst.n_in);
            dst.thresholds[j] = f.threshold;
            dst.orientations[j] = f.orientation;
        }
    }

    const Matrix& hw = model.head.weights;
    require_finite(hw.data, "head weight");
    require_finite(model.head.scale, "head scale");
    require_finite(model.head.shift, "head shift");
    p.head.n_in = hw.cols;
    p.head.n_out = hw.rows;
    p.head.words_per_row = words_for(hw.cols);
    p.head.weight_bits.assign(p.head.n_out * p.head.words_per_row, 0);
    for (std::size_t j = 0; j < p.head.n_out; ++j)
        pack_sign_row(hw.row(j), p.head.n_in, p.head.weight_bits.data() + j * p.head.words_per_row,
                      p.head.words_per_row);
    p.head.scale = model.head.scale;
    p.head.shift = model.head.shift;
    return p;
}

std::size_t PackedModel::byte_size() const {
    std::size_t bytes = 0;
    for (const PackedLayer& l : layers)
        bytes += l.weight_bits.size() * 8 + l.thresholds.size() * 4 + l.orientations.size();
    bytes += head.weight_bits.size() * 8 + (head.scale.size() + head.shift.size()) * 8;
    return bytes;
}

namespace {
constexpr char kMagic[4] = {'C', 'B', 'N', 'P'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void PackedModel::save(std::ostream& out) const {
    using namespace binio;
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u8(out, static_cast<std::uint8_t>(mode));
    write_u8(out, 0);
    write_u8(out, 0);
    write_u8(out, 0);
    write_u64(out, featurizer_hash);
    write_u32(out, static_cast<std::uint32_t>(topology.size()));
    for (int w : topology) write_i32(out, w);
    for (const PackedLayer& l : layers) {
        write_u64_array(out, l.weight_bits.data(), l.weight_bits.size());
        for (std::int32_t t : l.thresholds) write_i32(out, t);
        for (std::int8_t s : l.orientations) write_u8(out, static_cast<std::uint8_t>(s));
    }
    write_u64_array(out, head.weight_bits.data(), head.weight_bits.size());
    write_f64_array(out, head.scale);
    write_f64_array(out, head.shift);
    if (!out) throw InternalError("packed model write failed");
}

void PackedModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    save(out);
    out.flush();
    if (!out) throw InternalError("packed model write failed: " + path.string());
}

PackedModel PackedModel::load(std::istream& in) {
    using namespace binio;
    expect_magic(in, kMagic, "packed model");
    const std::uint32_t version = read_u32(in, "version");
    if (version != kVersion)
        throw DataError("unsupported packed model version " + std::to_string(version));

    PackedModel p;
    const std::uint8_t mode = read_u8(in, "mode");
    if (mode > 1) throw DataError("invalid task mode in packed model");
    p.mode = static_cast<TaskMode>(mode);
    read_u8(in, "reserved");
    read_u8(in, "reserved");
    read_u8(in, "reserved");
    p.featurizer_hash = read_u64(in, "featurizer hash");

    const std::uint32_t n_widths = read_u32(in, "topology size");
    if (n_widths < 2 || n_widths > 64) throw DataError("invalid topology size in packed model");
    p.topology.resize(n_widths);
    for (auto& w : p.topology) {
        w = read_i32(in, "topology width");
        if (w < 1 || w > (1 << 20)) throw DataError("invalid layer width in packed model");
    }

    p.layers.resize(n_widths - 2);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        PackedLayer& dst = p.layers[l];
        dst.n_in = static_cast<std::size_t>(p.topology[l]);
        dst.n_out = static_cast<std::size_t>(p.topology[l + 1]);
        dst.words_per_row = words_for(dst.n_in);
        dst.weight_bits.resize(dst.n_out * dst.words_per_row);
        read_u64_array(in, dst.weight_bits.data(), dst.weight_bits.size(), "layer weight bits");
        dst.thresholds.resize(dst.n_out);
        for (auto& t : dst.thresholds) {
            t = read_i32(in, "threshold");
            const auto bound = static_cast<std::int32_t>(dst.n_in) + 1;
            if (t < -bound || t > bound) throw DataError("threshold outside accumulator range");
        }
        dst.orientations.resize(dst.n_out);
        for (auto& s : dst.orientations) {
            s = static_cast<std::int8_t>(read_u8(in, "orientation"));
            if (s != 1 && s != -1) throw DataError("invalid neuron orientation");
        }
        // Padding discipline: bits past n_in must be zero.
        const std::size_t rem = dst.n_in & 63;
        if (rem) {
            const std::uint64_t pad_mask = ~((std::uint64_t{1} << rem) - 1);
            for (std::size_t j = 0; j < dst.n_out; ++j)
                if (dst.row(j)[dst.words_per_row - 1] & pad_mask)
                    throw DataError("nonzero padding bits in packed row");
        }
    }

    p.head.n_in = static_cast<std::size_t>(p.topology[n_widths - 2]);
    p.head.n_out = static_cast<std::size_t>(p.topology[n_widths - 1]);
    p.head.words_per_row = words_for(p.head.n_in);
    p.head.weight_bits.resize(p.head.n_out * p.head.words_per_row);
    read_u64_array(in, p.head.weight_bits.data(), p.head.weight_bits.size(), "head weight bits");
    read_f64_array(in, p.head.scale, p.head.n_out, "head scale");
    read_f64_array(in, p.head.shift, p.head.n_out, "head shift");
    require_finite(p.head.scale, "head scale");
    require_finite(p.head.shift, "head shift");

    if (in.peek() != std::istream::traits_type::eof())
        throw DataError("trailing bytes after packed model payload");
    return p;
}

PackedModel PackedModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open packed model " + path.string());
    try {
        return load(in);
    } catch (DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string PackedModel::serialize() const {
    std::ostringstream out(std::ios::binary);
    save(out);
    return out.str();
}

PackedEvaluator::PackedEvaluator(const PackedModel& model) : model_(&model) {
    std::size_t max_words = words_for(model.input_width());
    for (const PackedLayer& l : model.layers)
        max_words = std::max(max_words, words_for(l.n_out));
    buf_a_.resize(max_words);
    buf_b_.resize(max_words);
    logits_.resize(model.output_width());
}

std::span<const double> PackedEvaluator::infer(const BitVector& x) {
    return infer_bits(x.words(), x.size());
}

std::span<const double> PackedEvaluator::infer_bits(std::span<const std::uint64_t> x_words,
                                                    std::size_t n_bits) {
    const PackedModel& m = *model_;
    if (n_bits != m.input_width())
        throw DataError("feature width " + std::to_string(n_bits) + " does not match packed input " +
                        std::to_string(m.input_width()));
    if (capture_) capture_->clear();

    const std::uint64_t* in = x_words.data();
    std::size_t in_words = words_for(n_bits);
    std::size_t in_bits = n_bits;
    std::uint64_t* out = buf_a_.data();

    for (const PackedLayer& layer : m.layers) {
        const std::size_t out_words = words_for(layer.n_out);
        std::fill_n(out, out_words, 0);
        for (std::size_t j = 0; j < layer.n_out; ++j) {
            const int a = xnor_dot({layer.row(j), layer.words_per_row}, {in, in_words}, in_bits);
            const bool fire = layer.orientations[j] > 0 ? (a >= layer.thresholds[j])
                                                        : (a <= layer.thresholds[j]);
            if (fire) out[j >> 6] |= std::uint64_t{1} << (j & 63);
        }
        if (capture_) {
            BitVector bits(layer.n_out);
            std::copy_n(out, out_words, bits.mutable_words().begin());
            capture_->push_back(std::move(bits));
        }
        in = out;
        in_words = out_words;
        in_bits = layer.n_out;
        out = (out == buf_a_.data()) ? buf_b_.data() : buf_a_.data();
    }

    const PackedHead& head = m.head;
    for (std::size_t j = 0; j < head.n_out; ++j) {
        const int a = xnor_dot({head.row(j), head.words_per_row}, {in, in_words}, in_bits);
        logits_[j] = head.scale[j] * static_cast<double>(a) + head.shift[j];
    }
    return logits_;
}

std::vector<double> PackedEvaluator::probabilities(const BitVector& x) {
    const std::span<const double> logits = infer(x);
    std::vector<double> p(logits.begin(), logits.end());
    logits_to_probabilities(p.data(), p.size());
    return p;
}

}  // namespace canbnn
