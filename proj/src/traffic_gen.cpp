#include "canbnn/traffic_gen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "canbnn/error.hpp"
#include "canbnn/rng.hpp"

namespace canbnn {

const char* attack_name(AttackType t) {
    switch (t) {
        case AttackType::none: return "none";
        case AttackType::flooding: return "flooding";
        case AttackType::fuzzing: return "fuzzing";
        case AttackType::spoofing: return "spoofing";
    }
    throw InternalError("unknown attack type");
}

AttackType attack_from_name(const std::string& name) {
    if (name == "none") return AttackType::none;
    if (name == "flooding") return AttackType::flooding;
    if (name == "fuzzing") return AttackType::fuzzing;
    if (name == "spoofing") return AttackType::spoofing;
    throw ConfigError("unknown attack type '" + name + "'");
}

LabelManifest scenario_manifest() {
    return LabelManifest::parse_text(
        "class=0:benign\n"
        "class=1:flooding\n"
        "class=2:fuzzing\n"
        "class=3:spoofing\n"
        "default=0\n");
}

void ScenarioConfig::validate() const {
    if (duration <= 0.0) throw ConfigError("scenario duration must be positive");
    if (benign.empty()) throw ConfigError("scenario needs at least one benign source");
    for (const BenignSource& b : benign) {
        if (b.period <= 0.0) throw ConfigError("benign period must be positive");
        if (b.can_id > 0x7FF) throw ConfigError("benign IDs must be standard 11-bit");
        if (b.dlc > 8) throw ConfigError("benign dlc must be <= 8");
    }
    for (std::size_t i = 0; i < benign.size(); ++i)
        for (std::size_t j = i + 1; j < benign.size(); ++j)
            if (benign[i].can_id == benign[j].can_id)
                throw ConfigError("duplicate benign ID in scenario");

    auto is_benign_id = [&](std::uint32_t id) {
        return std::any_of(benign.begin(), benign.end(),
                           [&](const BenignSource& b) { return b.can_id == id; });
    };
    for (const AttackPhase& p : phases) {
        if (p.type == AttackType::none) continue;
        if (!(p.start >= 0.0 && p.end > p.start && p.end <= duration))
            throw ConfigError("attack window must satisfy 0 <= start < end <= duration");
        switch (p.type) {
            case AttackType::flooding:
                if (flood_rate <= 0.0) throw ConfigError("flood rate must be positive");
                if (is_benign_id(flood_id))
                    throw ConfigError("flood ID collides with a benign source");
                break;
            case AttackType::fuzzing:
                if (fuzz_rate <= 0.0) throw ConfigError("fuzz rate must be positive");
                break;
            case AttackType::spoofing:
                if (spoof_rate <= 0.0) throw ConfigError("spoof rate must be positive");
                if (!is_benign_id(spoof_target))
                    throw ConfigError("spoof target is not a benign source ID");
                if (spoof_byte >= 8) throw ConfigError("spoof byte index must be < 8");
                break;
            case AttackType::none: break;
        }
    }
}

namespace {

std::uint32_t parse_can_id(const std::string& tok, const char* what) {
    try {
        std::size_t pos = 0;
        unsigned long v;
        if (tok.rfind("0x", 0) == 0 || tok.rfind("0X", 0) == 0)
            v = std::stoul(tok.substr(2), &pos, 16), pos += 2;
        else
            v = std::stoul(tok, &pos, 10);
        if (pos != tok.size() || v > 0x1FFFFFFF)
            throw ConfigError(std::string("invalid ") + what + " '" + tok + "'");
        return static_cast<std::uint32_t>(v);
    } catch (const std::logic_error&) {
        throw ConfigError(std::string("invalid ") + what + " '" + tok + "'");
    }
}

double parse_double(const std::string& tok, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw ConfigError(std::string("invalid ") + what + " '" + tok + "'");
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError(std::string("invalid ") + what + " '" + tok + "'");
    }
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

PayloadGenKind parse_gen_kind(const std::string& tok) {
    if (tok == "const" || tok == "constant") return PayloadGenKind::constant;
    if (tok == "counter") return PayloadGenKind::counter;
    if (tok == "walk") return PayloadGenKind::walk;
    throw ConfigError("unknown payload generator '" + tok + "'");
}

}  // namespace

ScenarioConfig ScenarioConfig::parse(std::istream& in) {
    ScenarioConfig cfg;
    cfg.benign.clear();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        // Trim.
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("scenario line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);

        if (key == "duration") {
            cfg.duration = parse_double(value, "duration");
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
        } else if (key == "benign") {
            const auto parts = split_commas(value);
            if (parts.size() != 3)
                throw ConfigError("scenario line " + std::to_string(line_no) +
                                  ": benign needs id,period,generator");
            BenignSource src;
            src.can_id = parse_can_id(parts[0], "benign ID");
            src.period = parse_double(parts[1], "benign period");
            src.gen = parse_gen_kind(parts[2]);
            cfg.benign.push_back(src);
        } else if (key == "attack") {
            const auto parts = split_commas(value);
            AttackPhase phase;
            phase.type = attack_from_name(parts[0]);
            if (phase.type != AttackType::none) {
                if (parts.size() != 3)
                    throw ConfigError("scenario line " + std::to_string(line_no) +
                                      ": attack needs type,start,end");
                phase.start = parse_double(parts[1], "attack start");
                phase.end = parse_double(parts[2], "attack end");
                cfg.phases.push_back(phase);
            }
        } else if (key == "flood_id") {
            cfg.flood_id = parse_can_id(value, "flood ID");
        } else if (key == "flood_rate") {
            cfg.flood_rate = parse_double(value, "flood rate");
        } else if (key == "fuzz_rate") {
            cfg.fuzz_rate = parse_double(value, "fuzz rate");
        } else if (key == "spoof_target") {
            cfg.spoof_target = parse_can_id(value, "spoof target");
        } else if (key == "spoof_rate") {
            cfg.spoof_rate = parse_double(value, "spoof rate");
        } else if (key == "spoof_byte") {
            const double v = parse_double(value, "spoof byte");
            if (v < 0 || v > 7 || v != std::floor(v))
                throw ConfigError("spoof byte index must be an integer in 0..7");
            cfg.spoof_byte = static_cast<std::size_t>(v);
        } else {
            throw ConfigError("scenario line " + std::to_string(line_no) + ": unknown key '" + key +
                              "'");
        }
    }
    cfg.validate();
    return cfg;
}

ScenarioConfig ScenarioConfig::parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scenario config " + path.string());
    return parse(in);
}

ScenarioConfig ScenarioConfig::preset(const std::string& name, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.duration = 60.0;
    cfg.seed = seed;
    cfg.benign = {
        {0x101, 0.010, PayloadGenKind::counter, 8}, {0x1A5, 0.010, PayloadGenKind::walk, 8},
        {0x220, 0.020, PayloadGenKind::constant, 8}, {0x245, 0.020, PayloadGenKind::counter, 8},
        {0x2C0, 0.020, PayloadGenKind::walk, 8},     {0x316, 0.050, PayloadGenKind::constant, 8},
        {0x329, 0.050, PayloadGenKind::walk, 8},     {0x40F, 0.050, PayloadGenKind::counter, 8},
        {0x4B1, 0.100, PayloadGenKind::constant, 8}, {0x5E2, 0.100, PayloadGenKind::walk, 8},
    };
    cfg.flood_id = 0x000;
    cfg.flood_rate = 1500.0;
    cfg.fuzz_rate = 500.0;
    cfg.spoof_target = 0x220;
    cfg.spoof_rate = 200.0;
    cfg.spoof_byte = 0;

    if (name == "benign") {
        // no phases
    } else if (name == "flooding" || name == "fuzzing" || name == "spoofing") {
        cfg.phases.push_back({attack_from_name(name), 20.0, 40.0});
    } else if (name == "combined") {
        cfg.phases.push_back({AttackType::flooding, 8.0, 20.0});
        cfg.phases.push_back({AttackType::fuzzing, 24.0, 36.0});
        cfg.phases.push_back({AttackType::spoofing, 40.0, 52.0});
    } else {
        throw ConfigError("unknown scenario preset '" + name + "'");
    }
    cfg.validate();
    return cfg;
}

namespace {

// Dividing by 1e6 (exactly representable) rounds the rational k/10^6
// correctly, so the value survives a %.6f print + strtod round trip
// bit for bit; multiplying by 1e-6 would not.
double quantize_us(double t) { return static_cast<double>(std::llround(t * 1e6)) / 1e6; }

// Gaussian truncated at +-bound by resampling.
double truncated_gaussian(std::mt19937_64& rng, double sigma, double bound) {
    std::normal_distribution<double> dist(0.0, sigma);
    double j;
    do {
        j = dist(rng);
    } while (std::abs(j) > bound);
    return j;
}

struct Emitted {
    CanFrame frame;
    std::uint32_t source;  // merge tiebreak: stable source rank
    std::uint64_t seq;     // merge tiebreak: per-source sequence
};

// Benign payload evolution for one source.
struct PayloadState {
    PayloadGenKind kind;
    std::array<std::uint8_t, 8> bytes{};
    std::uint16_t counter = 0;
    std::size_t walk_byte = 0;

    void init(std::mt19937_64& rng, PayloadGenKind k) {
        kind = k;
        std::uniform_int_distribution<int> byte_dist(0, 255);
        for (auto& b : bytes) b = static_cast<std::uint8_t>(byte_dist(rng));
        if (kind == PayloadGenKind::counter) {
            counter = static_cast<std::uint16_t>(byte_dist(rng) << 8 | byte_dist(rng));
            apply_counter();
        } else if (kind == PayloadGenKind::walk) {
            walk_byte = static_cast<std::size_t>(byte_dist(rng)) % 8;
        }
    }

    void apply_counter() {
        bytes[0] = static_cast<std::uint8_t>(counter >> 8);
        bytes[1] = static_cast<std::uint8_t>(counter & 0xFF);
    }

    void step(std::mt19937_64& rng) {
        switch (kind) {
            case PayloadGenKind::constant: break;
            case PayloadGenKind::counter:
                ++counter;
                apply_counter();
                break;
            case PayloadGenKind::walk: {
                std::uniform_int_distribution<int> step_dist(-1, 1);
                const int v = bytes[walk_byte] + step_dist(rng);
                bytes[walk_byte] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
                break;
            }
        }
    }
};

}  // namespace

std::vector<CanFrame> generate(const ScenarioConfig& config) {
    config.validate();
    std::vector<Emitted> all;
    std::uint32_t source_rank = 0;

    // Benign sources; spoofing later needs the target's frames sorted by
    // time, so keep per-source streams before merging.
    std::vector<std::vector<CanFrame>> benign_streams(config.benign.size());
    for (std::size_t i = 0; i < config.benign.size(); ++i) {
        const BenignSource& src = config.benign[i];
        std::mt19937_64 rng(mix_seed(config.seed, 0x100 + i));
        PayloadState payload;
        payload.init(rng, src.gen);

        std::uniform_real_distribution<double> phase_dist(0.0, src.period);
        double t = phase_dist(rng);
        const double sigma = 0.02 * src.period;
        const double bound = 0.10 * src.period;
        while (t < config.duration) {
            CanFrame f;
            f.timestamp = quantize_us(t);
            f.can_id = src.can_id;
            f.dlc = src.dlc;
            for (std::size_t b = 0; b < src.dlc; ++b) f.payload[b] = payload.bytes[b];
            f.label = 0;
            benign_streams[i].push_back(f);
            payload.step(rng);
            t += src.period + truncated_gaussian(rng, sigma, bound);
        }
    }

    // Spoofing looks up the target's payload "at that instant": the payload
    // of the latest benign target frame at or before the spoof time.
    const std::vector<CanFrame>* spoof_src = nullptr;
    for (std::size_t i = 0; i < config.benign.size(); ++i)
        if (config.benign[i].can_id == config.spoof_target) spoof_src = &benign_streams[i];

    for (std::size_t i = 0; i < config.benign.size(); ++i) {
        for (std::uint64_t seq = 0; seq < benign_streams[i].size(); ++seq)
            all.push_back({benign_streams[i][seq], source_rank, seq});
        ++source_rank;
    }

    for (const AttackPhase& phase : config.phases) {
        std::mt19937_64 rng(
            mix_seed(config.seed, 0x200 + static_cast<std::uint64_t>(&phase - config.phases.data())));
        std::uint64_t seq = 0;
        switch (phase.type) {
            case AttackType::flooding: {
                const double dt = 1.0 / config.flood_rate;
                for (double t = phase.start; t < phase.end; t += dt) {
                    CanFrame f;
                    f.timestamp = quantize_us(t);
                    f.can_id = config.flood_id;
                    f.dlc = 8;  // payload stays all-zero: highest-priority style burst
                    f.label = static_cast<std::uint16_t>(AttackType::flooding);
                    all.push_back({f, source_rank, seq++});
                }
                break;
            }
            case AttackType::fuzzing: {
                std::uniform_int_distribution<std::uint32_t> id_dist(0, 0x7FF);
                std::uniform_int_distribution<int> byte_dist(0, 255);
                const double dt = 1.0 / config.fuzz_rate;
                for (double t = phase.start; t < phase.end; t += dt) {
                    std::uint32_t id;
                    do {
                        id = id_dist(rng);
                    } while (std::any_of(config.benign.begin(), config.benign.end(),
                                         [&](const BenignSource& b) { return b.can_id == id; }));
                    CanFrame f;
                    f.timestamp = quantize_us(t);
                    f.can_id = id;
                    f.dlc = 8;
                    for (auto& b : f.payload) b = static_cast<std::uint8_t>(byte_dist(rng));
                    f.label = static_cast<std::uint16_t>(AttackType::fuzzing);
                    all.push_back({f, source_rank, seq++});
                }
                break;
            }
            case AttackType::spoofing: {
                if (!spoof_src || spoof_src->empty())
                    throw DataError("spoof target produced no benign frames");
                const double dt = 1.0 / config.spoof_rate;
                for (double t = phase.start; t < phase.end; t += dt) {
                    const double tq = quantize_us(t);
                    CanFrame f;
                    f.timestamp = tq;
                    f.can_id = config.spoof_target;
                    f.dlc = 8;
                    // Latest target payload at or before tq.
                    const auto& stream = *spoof_src;
                    auto it = std::upper_bound(
                        stream.begin(), stream.end(), tq,
                        [](double v, const CanFrame& fr) { return v < fr.timestamp; });
                    const CanFrame& ref = it == stream.begin() ? stream.front() : *(it - 1);
                    f.payload = ref.payload;
                    f.payload[config.spoof_byte] ^= 0xFF;  // guaranteed >= 1 byte difference
                    f.label = static_cast<std::uint16_t>(AttackType::spoofing);
                    all.push_back({f, source_rank, seq++});
                }
                break;
            }
            case AttackType::none: break;
        }
        ++source_rank;
    }

    std::sort(all.begin(), all.end(), [](const Emitted& a, const Emitted& b) {
        if (a.frame.timestamp != b.frame.timestamp) return a.frame.timestamp < b.frame.timestamp;
        if (a.source != b.source) return a.source < b.source;
        return a.seq < b.seq;
    });

    std::vector<CanFrame> frames;
    frames.reserve(all.size());
    for (Emitted& e : all) frames.push_back(e.frame);
    return frames;
}

}  // namespace canbnn
