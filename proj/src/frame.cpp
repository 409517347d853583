#include "canbnn/frame.hpp"

#include <fstream>
#include <sstream>

#include "canbnn/error.hpp"

namespace canbnn {

void CanFrame::validate() const {
    if (timestamp < 0.0) throw DataError("negative timestamp");
    if (dlc > 8) throw DataError("dlc out of range 0..8");
    if (extended_id) {
        if (can_id >= (1u << 29)) throw DataError("extended CAN ID exceeds 29 bits");
    } else {
        if (can_id >= (1u << 11)) throw DataError("standard CAN ID exceeds 11 bits");
    }
    for (std::size_t i = dlc; i < payload.size(); ++i)
        if (payload[i] != 0) throw DataError("nonzero payload byte past dlc");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Parses "CODE" or "CODE:NAME"; name may be empty.
std::pair<std::uint16_t, std::string> parse_code_name(const std::string& value,
                                                      std::size_t line_no) {
    std::string code_str = value;
    std::string name;
    if (auto colon = value.find(':'); colon != std::string::npos) {
        code_str = value.substr(0, colon);
        name = trim(value.substr(colon + 1));
    }
    code_str = trim(code_str);
    try {
        std::size_t pos = 0;
        const unsigned long code = std::stoul(code_str, &pos, 10);
        if (pos != code_str.size() || code > 0xFFFF)
            throw std::invalid_argument("range");
        return {static_cast<std::uint16_t>(code), name};
    } catch (const std::exception&) {
        throw ParseError(line_no, "label", "invalid class code '" + code_str + "'");
    }
}

}  // namespace

void LabelManifest::add_class(std::uint16_t code, const std::string& name,
                              std::size_t line_no) {
    if (code >= classes_.size()) classes_.resize(code + 1);
    ClassLabel& slot = classes_[code];
    if (!slot.name.empty() && !name.empty() && slot.name != name)
        throw ParseError(line_no, "label",
                         "class " + std::to_string(code) + " renamed from '" +
                             slot.name + "' to '" + name + "'");
    slot.code = code;
    if (!name.empty()) slot.name = name;
}

void LabelManifest::finalize() {
    if (classes_.empty()) throw DataError("label manifest declares no classes");
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].name.empty())
            throw DataError("label manifest codes are not dense: class " +
                            std::to_string(i) + " missing");
        classes_[i].code = static_cast<std::uint16_t>(i);
    }
    if (classes_[0].name != "benign")
        throw DataError("class 0 must be named 'benign', got '" + classes_[0].name + "'");
}

LabelManifest LabelManifest::parse(std::istream& in) {
    LabelManifest m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(line_no, "entry", "expected KEY=VALUE");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto [code, name] = parse_code_name(value, line_no);
        if (key == "class") {
            if (name.empty())
                throw ParseError(line_no, "label", "class declaration needs CODE:NAME");
            m.add_class(code, name, line_no);
        } else if (key == "default") {
            if (!name.empty()) m.add_class(code, name, line_no);
            m.default_ = code;
        } else {
            if (key.empty()) throw ParseError(line_no, "entry", "empty token");
            if (!name.empty())
                m.add_class(code, name, line_no);
            else if (code >= m.classes_.size() || m.classes_[code].name.empty())
                m.add_class(code, code == 0 ? "benign" : "", line_no);
            m.tokens_[key] = code;
        }
    }
    // A bare default with no declared name still needs a class entry.
    if (m.default_ && (*m.default_ >= m.classes_.size() ||
                       m.classes_[*m.default_].name.empty()))
        m.add_class(*m.default_, *m.default_ == 0 ? "benign" : "", 0);
    m.finalize();
    return m;
}

LabelManifest LabelManifest::parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

LabelManifest LabelManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open label manifest: " + path.string());
    return parse(in);
}

const ClassLabel& LabelManifest::resolve(const std::string& token,
                                         std::size_t line_no) const {
    auto it = tokens_.find(token);
    if (it == tokens_.end())
        throw ParseError(line_no, "label", "unknown label token '" + token + "'");
    return classes_[it->second];
}

const ClassLabel& LabelManifest::default_label() const {
    if (!default_) throw DataError("label manifest has no default label");
    return classes_[*default_];
}

const std::string& LabelManifest::name_of(std::uint16_t code) const {
    if (!has_code(code))
        throw DataError("unknown class code " + std::to_string(code));
    return classes_[code].name;
}

}  // namespace canbnn
