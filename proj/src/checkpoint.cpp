#include <fstream>
#include <sstream>

#include "binio.hpp"
#include "canbnn/bnn.hpp"
#include "canbnn/error.hpp"

namespace canbnn {

namespace {
constexpr char kMagic[4] = {'C', 'B', 'N', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kMaxWidth = 1 << 20;  // sanity bound when loading
}  // namespace

void BnnModel::save(std::ostream& out) const {
    using namespace binio;
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u8(out, static_cast<std::uint8_t>(mode));
    write_u8(out, 0);
    write_u8(out, 0);
    write_u8(out, 0);
    write_u64(out, seed);
    write_u64(out, featurizer_hash);
    write_f64(out, dropout_rate);
    write_u32(out, static_cast<std::uint32_t>(topology.size()));
    for (int w : topology) write_i32(out, w);
    for (const BnnLayer& layer : layers) {
        write_f64_array(out, layer.weights.data);
        write_f64_array(out, layer.bias);
        write_f64_array(out, layer.gamma);
        write_f64_array(out, layer.beta);
        write_f64_array(out, layer.run_mean);
        write_f64_array(out, layer.run_var);
    }
    write_f64_array(out, head.weights.data);
    write_f64_array(out, head.scale);
    write_f64_array(out, head.shift);
    if (!out) throw InternalError("checkpoint write failed");
}

void BnnModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    save(out);
    out.flush();
    if (!out) throw InternalError("checkpoint write failed: " + path.string());
}

BnnModel BnnModel::load(std::istream& in) {
    using namespace binio;
    expect_magic(in, kMagic, "checkpoint");
    const std::uint32_t version = read_u32(in, "version");
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));

    BnnModel m;
    const std::uint8_t mode = read_u8(in, "mode");
    if (mode > 1) throw DataError("invalid task mode in checkpoint");
    m.mode = static_cast<TaskMode>(mode);
    read_u8(in, "reserved");
    read_u8(in, "reserved");
    read_u8(in, "reserved");
    m.seed = read_u64(in, "seed");
    m.featurizer_hash = read_u64(in, "featurizer hash");
    m.dropout_rate = read_f64(in, "dropout rate");
    if (!(m.dropout_rate >= 0.0 && m.dropout_rate < 1.0))
        throw DataError("invalid dropout rate in checkpoint");

    const std::uint32_t n_widths = read_u32(in, "topology size");
    if (n_widths < 2 || n_widths > 64) throw DataError("invalid topology size in checkpoint");
    m.topology.resize(n_widths);
    for (auto& w : m.topology) {
        w = read_i32(in, "topology width");
        if (w < 1 || static_cast<std::size_t>(w) > kMaxWidth)
            throw DataError("invalid layer width in checkpoint");
    }

    m.layers.resize(n_widths - 2);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto n_in = static_cast<std::size_t>(m.topology[l]);
        const auto n_out = static_cast<std::size_t>(m.topology[l + 1]);
        BnnLayer& layer = m.layers[l];
        layer.weights.rows = n_out;
        layer.weights.cols = n_in;
        read_f64_array(in, layer.weights.data, n_out * n_in, "layer weights");
        read_f64_array(in, layer.bias, n_out, "layer bias");
        read_f64_array(in, layer.gamma, n_out, "layer gamma");
        read_f64_array(in, layer.beta, n_out, "layer beta");
        read_f64_array(in, layer.run_mean, n_out, "running mean");
        read_f64_array(in, layer.run_var, n_out, "running variance");
    }
    const auto head_in = static_cast<std::size_t>(m.topology[n_widths - 2]);
    const auto head_out = static_cast<std::size_t>(m.topology[n_widths - 1]);
    m.head.weights.rows = head_out;
    m.head.weights.cols = head_in;
    read_f64_array(in, m.head.weights.data, head_out * head_in, "head weights");
    read_f64_array(in, m.head.scale, head_out, "head scale");
    read_f64_array(in, m.head.shift, head_out, "head shift");

    // Trailing garbage means the file is not what it claims to be.
    if (in.peek() != std::istream::traits_type::eof())
        throw DataError("trailing bytes after checkpoint payload");
    return m;
}

BnnModel BnnModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    try {
        return load(in);
    } catch (DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string BnnModel::serialize() const {
    std::ostringstream out(std::ios::binary);
    save(out);
    return out.str();
}

}  // namespace canbnn
