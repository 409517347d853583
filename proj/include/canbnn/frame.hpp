#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace canbnn {

// A class label: code 0 is always "benign", attack classes are >= 1.
struct ClassLabel {
    std::uint16_t code = 0;
    std::string name;

    bool operator==(const ClassLabel&) const = default;
};

// One timestamped CAN message. Payload bytes beyond dlc are kept zero so
// whole-struct comparison is meaningful.
struct CanFrame {
    double timestamp = 0.0;  // seconds, microsecond precision
    std::uint32_t can_id = 0;
    std::uint8_t dlc = 0;  // 0..8
    std::array<std::uint8_t, 8> payload{};
    std::optional<std::uint16_t> label;  // class code; absent when unlabeled
    bool extended_id = false;            // 29-bit identifier

    // Throws DataError on invariant violations (dlc range, ID width,
    // negative timestamp, nonzero bytes past dlc).
    void validate() const;

    bool operator==(const CanFrame&) const = default;
};

// Maps dataset-specific label tokens to class codes. Text format, one entry
// per line:
//
//   class=0:benign      declare a class (optional when tokens declare inline)
//   R=0                 map token "R" to code 0
//   T=1:DoS             map token "T" and declare class 1 at the same time
//   default=0           label for rows that carry no token
//   # comment
//
// Declared codes must be dense 0..C and code 0 must be named "benign".
class LabelManifest {
public:
    static LabelManifest parse(std::istream& in);
    static LabelManifest parse_text(const std::string& text);
    static LabelManifest load(const std::filesystem::path& path);

    // Resolves a token to its label; throws ParseError listing the token.
    const ClassLabel& resolve(const std::string& token, std::size_t line_no) const;

    bool has_default() const noexcept { return default_.has_value(); }
    const ClassLabel& default_label() const;

    bool has_code(std::uint16_t code) const { return code < classes_.size(); }
    const std::string& name_of(std::uint16_t code) const;

    // Dense class table; classes()[i].code == i.
    const std::vector<ClassLabel>& classes() const noexcept { return classes_; }

private:
    std::vector<ClassLabel> classes_;
    std::unordered_map<std::string, std::uint16_t> tokens_;
    std::optional<std::uint16_t> default_;

    void add_class(std::uint16_t code, const std::string& name, std::size_t line_no);
    void finalize();
};

}  // namespace canbnn
