#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "canbnn/error.hpp"
#include "canbnn/featurizer.hpp"

namespace canbnn {

namespace {

std::string hex_id(std::uint32_t id) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03X", id);
    return buf;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

std::string FeaturizerConfig::to_json() const {
    nlohmann::json j;
    j["bit_width"] = bit_width;
    j["thres1"] = thres1;
    j["thres2"] = thres2;
    j["q_low"] = q_low;
    j["q_high"] = q_high;
    nlohmann::json ids = nlohmann::json::object();
    for (const auto& [id, code] : id_codes) ids[hex_id(id)] = code;
    j["id_codes"] = ids;
    return j.dump();
}

FeaturizerConfig FeaturizerConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("featurizer config is not valid JSON: ") + e.what());
    }
    FeaturizerConfig cfg;
    try {
        cfg.bit_width = j.at("bit_width").get<int>();
        cfg.thres1 = j.at("thres1").get<double>();
        cfg.thres2 = j.at("thres2").get<double>();
        cfg.q_low = j.value("q_low", 0.01);
        cfg.q_high = j.value("q_high", 0.99);
        for (const auto& [key, value] : j.at("id_codes").items()) {
            const std::uint32_t id = std::stoul(key, nullptr, 16);
            cfg.id_codes.emplace_back(id, value.get<std::uint32_t>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("featurizer config field error: ") + e.what());
    }
    std::sort(cfg.id_codes.begin(), cfg.id_codes.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    cfg.dictionary();                      // validates codes and bit_width
    IntervalEncoder check(cfg.thres1, cfg.thres2);  // validates thresholds
    (void)check;
    return cfg;
}

void FeaturizerConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path.string());
    out << nlohmann::json::parse(to_json()).dump(2) << '\n';
    out.flush();
    if (!out) throw DataError("write failed: " + path.string());
}

FeaturizerConfig FeaturizerConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open featurizer config: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::uint64_t FeaturizerConfig::content_hash() const {
    return fnv1a(to_json());
}

}  // namespace canbnn
