#include "canbnn/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "canbnn/error.hpp"

namespace canbnn {

namespace {

constexpr std::string_view kCanonicalHeader = "timestamp,can_id,dlc,payload,label";

std::string strip_cr(std::string line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    return line;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

double parse_timestamp(const std::string& raw, std::size_t line_no) {
    const char* begin = raw.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && *end != '\0' && std::isspace(static_cast<unsigned char>(*end))) ++end;
    if (end == begin || *end != '\0')
        throw ParseError(line_no, "timestamp", "invalid number '" + raw + "'");
    if (v < 0.0) throw ParseError(line_no, "timestamp", "negative timestamp");
    return v;
}

std::uint32_t parse_hex_id(const std::string& raw, std::size_t line_no) {
    std::string s = raw;
    s.erase(std::remove_if(s.begin(), s.end(),
                           [](unsigned char c) { return std::isspace(c); }),
            s.end());
    if (s.starts_with("0x") || s.starts_with("0X")) s = s.substr(2);
    if (s.empty()) throw ParseError(line_no, "can_id", "empty CAN ID");
    std::uint32_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError(line_no, "can_id", "invalid hex CAN ID '" + raw + "'");
    if (v >= (1u << 29))
        throw ParseError(line_no, "can_id", "CAN ID exceeds 29 bits");
    return v;
}

int parse_dlc(const std::string& raw, std::size_t line_no) {
    int v = 0;
    const std::string s = strip_cr(raw);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 10);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError(line_no, "dlc", "invalid dlc '" + raw + "'");
    if (v < 0 || v > 8)
        throw ParseError(line_no, "dlc", "dlc out of range 0..8");
    return v;
}

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Parses a contiguous (whitespace-tolerant) hex string of exactly dlc bytes.
void parse_payload_hex(const std::string& raw, int dlc, CanFrame& frame,
                       std::size_t line_no) {
    std::string s;
    s.reserve(raw.size());
    for (char c : raw)
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    if (s.size() != static_cast<std::size_t>(2 * dlc))
        throw ParseError(line_no, "payload",
                         "expected " + std::to_string(2 * dlc) + " hex chars, got " +
                             std::to_string(s.size()));
    for (int i = 0; i < dlc; ++i) {
        const int hi = hex_nibble(s[2 * i]);
        const int lo = hex_nibble(s[2 * i + 1]);
        if (hi < 0 || lo < 0)
            throw ParseError(line_no, "payload", "non-hex character in payload");
        frame.payload[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
}

std::uint8_t parse_payload_byte(const std::string& raw, std::size_t line_no) {
    const std::string s = strip_cr(raw);
    if (s.size() != 2 || hex_nibble(s[0]) < 0 || hex_nibble(s[1]) < 0)
        throw ParseError(line_no, "payload", "invalid hex byte '" + raw + "'");
    return static_cast<std::uint8_t>((hex_nibble(s[0]) << 4) | hex_nibble(s[1]));
}

class MonotonicityGuard {
public:
    explicit MonotonicityGuard(const ParseOptions& opts) : opts_(opts) {}

    void check(double ts, std::size_t line_no) {
        if (have_prev_ && ts < prev_ - opts_.monotonic_slack && !opts_.allow_unordered)
            throw ParseError(line_no, "timestamp",
                             "timestamp moves backwards by more than the allowed slack "
                             "(use allow_unordered to keep file order)");
        prev_ = std::max(prev_, ts);
        have_prev_ = true;
    }

private:
    const ParseOptions& opts_;
    double prev_ = 0.0;
    bool have_prev_ = false;
};

void check_manifest_subset(const std::vector<CanFrame>& frames,
                           const LabelManifest& manifest) {
    for (const CanFrame& f : frames)
        if (f.label && !manifest.has_code(*f.label))
            throw DataError("label code " + std::to_string(*f.label) +
                            " not declared in the label manifest");
}

std::vector<CanFrame> parse_car_hacking(std::istream& in, const LabelManifest* manifest,
                                        const ParseOptions& opts) {
    if (!manifest)
        throw ConfigError("car_hacking format requires a label manifest (R/T tokens)");
    std::vector<CanFrame> frames;
    MonotonicityGuard guard(opts);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        // Layout: timestamp, id, dlc, DATA0..DATA[dlc-1], flag
        if (fields.size() < 4)
            throw ParseError(line_no, "row", "truncated row");
        CanFrame frame;
        frame.timestamp = parse_timestamp(fields[0], line_no);
        frame.can_id = parse_hex_id(fields[1], line_no);
        frame.extended_id = frame.can_id >= (1u << 11);
        const int dlc = parse_dlc(fields[2], line_no);
        frame.dlc = static_cast<std::uint8_t>(dlc);
        if (fields.size() != static_cast<std::size_t>(4 + dlc))
            throw ParseError(line_no, "row",
                             "expected " + std::to_string(4 + dlc) + " fields for dlc " +
                                 std::to_string(dlc) + ", got " +
                                 std::to_string(fields.size()));
        for (int i = 0; i < dlc; ++i)
            frame.payload[i] = parse_payload_byte(fields[3 + i], line_no);
        std::string token = fields[3 + dlc];
        token.erase(std::remove_if(token.begin(), token.end(),
                                   [](unsigned char c) { return std::isspace(c); }),
                    token.end());
        frame.label = manifest->resolve(token, line_no).code;
        guard.check(frame.timestamp, line_no);
        frames.push_back(frame);
    }
    return frames;
}

// OTIDS-style text rows:
//   Timestamp:     0.000100    ID: 0153    000    DLC: 8    6f 28 ff 00 00 ff ff 07
std::vector<CanFrame> parse_can_ids(std::istream& in, const LabelManifest* manifest,
                                    const ParseOptions& opts) {
    if (!manifest || !manifest->has_default())
        throw ConfigError(
            "can_ids rows carry no label token; the manifest must provide a default");
    std::vector<CanFrame> frames;
    MonotonicityGuard guard(opts);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        std::istringstream tokens(line);
        std::string tok;
        auto next = [&](const char* field) {
            if (!(tokens >> tok))
                throw ParseError(line_no, field, "truncated row");
            return tok;
        };
        if (next("row") != "Timestamp:")
            throw ParseError(line_no, "row", "expected 'Timestamp:' prefix");
        CanFrame frame;
        frame.timestamp = parse_timestamp(next("timestamp"), line_no);
        if (next("row") != "ID:")
            throw ParseError(line_no, "row", "expected 'ID:' marker");
        frame.can_id = parse_hex_id(next("can_id"), line_no);
        frame.extended_id = frame.can_id >= (1u << 11);
        next("flags");  // frame-type column, unused
        if (next("row") != "DLC:")
            throw ParseError(line_no, "row", "expected 'DLC:' marker");
        const int dlc = parse_dlc(next("dlc"), line_no);
        frame.dlc = static_cast<std::uint8_t>(dlc);
        for (int i = 0; i < dlc; ++i)
            frame.payload[i] = parse_payload_byte(next("payload"), line_no);
        frame.label = manifest->default_label().code;
        guard.check(frame.timestamp, line_no);
        frames.push_back(frame);
    }
    return frames;
}

}  // namespace

DatasetFormat format_from_name(std::string_view name) {
    std::string s(name);
    std::replace(s.begin(), s.end(), '-', '_');
    if (s == "canonical") return DatasetFormat::canonical;
    if (s == "car_hacking") return DatasetFormat::car_hacking;
    if (s == "can_ids") return DatasetFormat::can_ids;
    throw ConfigError("unknown dataset format '" + std::string(name) +
                      "' (expected canonical, car_hacking or can_ids)");
}

std::string_view format_name(DatasetFormat format) {
    switch (format) {
        case DatasetFormat::canonical: return "canonical";
        case DatasetFormat::car_hacking: return "car_hacking";
        case DatasetFormat::can_ids: return "can_ids";
    }
    throw InternalError("unreachable dataset format");
}

std::vector<CanFrame> parse_canonical(std::istream& in, const ParseOptions& opts) {
    std::vector<CanFrame> frames;
    MonotonicityGuard guard(opts);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line))
        throw ParseError(1, "header", "empty input");
    ++line_no;
    if (strip_cr(line) != kCanonicalHeader)
        throw ParseError(1, "header",
                         "expected '" + std::string(kCanonicalHeader) + "'");
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 5)
            throw ParseError(line_no, "row",
                             "expected 5 fields, got " + std::to_string(fields.size()));
        CanFrame frame;
        frame.timestamp = parse_timestamp(fields[0], line_no);
        frame.can_id = parse_hex_id(fields[1], line_no);
        frame.extended_id = frame.can_id >= (1u << 11);
        const int dlc = parse_dlc(fields[2], line_no);
        frame.dlc = static_cast<std::uint8_t>(dlc);
        parse_payload_hex(fields[3], dlc, frame, line_no);
        if (!fields[4].empty()) {
            int code = 0;
            const auto [ptr, ec] =
                std::from_chars(fields[4].data(), fields[4].data() + fields[4].size(),
                                code, 10);
            if (ec != std::errc{} || ptr != fields[4].data() + fields[4].size() ||
                code < 0 || code > 0xFFFF)
                throw ParseError(line_no, "label", "invalid label '" + fields[4] + "'");
            frame.label = static_cast<std::uint16_t>(code);
        }
        guard.check(frame.timestamp, line_no);
        frames.push_back(frame);
    }
    return frames;
}

std::vector<CanFrame> parse_dataset(std::istream& in, DatasetFormat format,
                                    const LabelManifest* manifest,
                                    const ParseOptions& opts) {
    switch (format) {
        case DatasetFormat::canonical: {
            auto frames = parse_canonical(in, opts);
            if (manifest) check_manifest_subset(frames, *manifest);
            return frames;
        }
        case DatasetFormat::car_hacking:
            return parse_car_hacking(in, manifest, opts);
        case DatasetFormat::can_ids:
            return parse_can_ids(in, manifest, opts);
    }
    throw InternalError("unreachable dataset format");
}

std::vector<CanFrame> load_frames(const std::filesystem::path& path, DatasetFormat format,
                                  const LabelManifest* manifest,
                                  const ParseOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open input file: " + path.string());
    return parse_dataset(in, format, manifest, opts);
}

void write_canonical(std::ostream& out, std::span<const CanFrame> frames) {
    out << kCanonicalHeader << '\n';
    char buf[128];
    for (const CanFrame& f : frames) {
        int n = std::snprintf(buf, sizeof(buf), "%.6f,%03X,%u,", f.timestamp, f.can_id,
                              static_cast<unsigned>(f.dlc));
        out.write(buf, n);
        for (int i = 0; i < f.dlc; ++i) {
            n = std::snprintf(buf, sizeof(buf), "%02x", f.payload[i]);
            out.write(buf, n);
        }
        out.put(',');
        if (f.label) out << *f.label;
        out.put('\n');
    }
}

void save_canonical(const std::filesystem::path& path, std::span<const CanFrame> frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path.string());
    write_canonical(out, frames);
    out.flush();
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace canbnn
