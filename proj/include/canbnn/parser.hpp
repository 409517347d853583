#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "canbnn/frame.hpp"

namespace canbnn {

enum class DatasetFormat { canonical, car_hacking, can_ids };

DatasetFormat format_from_name(std::string_view name);
std::string_view format_name(DatasetFormat format);

struct ParseOptions {
    // Out-of-order timestamps up to this slack (seconds) are accepted and
    // kept in file order; larger violations are errors unless
    // allow_unordered is set.
    double monotonic_slack = 1e-3;
    bool allow_unordered = false;
};

// Canonical CSV: header "timestamp,can_id,dlc,payload,label", hex can_id,
// payload as 2*dlc hex characters (embedded whitespace tolerated), label an
// integer class code or empty.
std::vector<CanFrame> parse_canonical(std::istream& in, const ParseOptions& opts = {});

// Parses one of the supported log layouts into canonical CanFrame order.
// car_hacking rows carry a trailing R/T flag resolved through the manifest;
// can_ids rows carry no token and use the manifest default. A manifest given
// for canonical input is used as a subset check on the label codes.
std::vector<CanFrame> parse_dataset(std::istream& in, DatasetFormat format,
                                    const LabelManifest* manifest = nullptr,
                                    const ParseOptions& opts = {});

std::vector<CanFrame> load_frames(const std::filesystem::path& path, DatasetFormat format,
                                  const LabelManifest* manifest = nullptr,
                                  const ParseOptions& opts = {});

// Streaming canonical CSV writer; the inverse of parse_canonical for any
// frame stream with microsecond-quantized timestamps.
void write_canonical(std::ostream& out, std::span<const CanFrame> frames);
void save_canonical(const std::filesystem::path& path, std::span<const CanFrame> frames);

}  // namespace canbnn
