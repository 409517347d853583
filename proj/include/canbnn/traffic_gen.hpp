#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "canbnn/frame.hpp"

namespace canbnn {

enum class AttackType : std::uint8_t { none = 0, flooding = 1, fuzzing = 2, spoofing = 3 };

// Class codes of generated labels; code == enum value, 0 is benign.
const char* attack_name(AttackType t);
AttackType attack_from_name(const std::string& name);

// Label manifest matching the generator's class codes
// (0 benign, 1 flooding, 2 fuzzing, 3 spoofing).
LabelManifest scenario_manifest();

enum class PayloadGenKind : std::uint8_t { constant = 0, counter = 1, walk = 2 };

struct BenignSource {
    std::uint32_t can_id = 0;
    double period = 0.01;  // seconds
    PayloadGenKind gen = PayloadGenKind::constant;
    std::uint8_t dlc = 8;
};

struct AttackPhase {
    AttackType type = AttackType::none;
    double start = 0.0;
    double end = 0.0;
};

// Scenario description; parsed from a key=value text file:
//
//   duration=60
//   seed=7
//   benign=0x101,0.01,counter      # id, nominal period s, generator
//   attack=flooding,20,40          # type, window start s, window end s
//   flood_id=0x000
//   flood_rate=1500                # frames/s
//   fuzz_rate=500
//   spoof_target=0x101
//   spoof_rate=200
//   spoof_byte=0                   # payload byte index XOR-flipped
struct ScenarioConfig {
    double duration = 60.0;
    std::uint64_t seed = 0;
    std::vector<BenignSource> benign;
    std::vector<AttackPhase> phases;
    std::uint32_t flood_id = 0x000;
    double flood_rate = 1500.0;
    double fuzz_rate = 500.0;
    std::uint32_t spoof_target = 0;
    double spoof_rate = 200.0;
    std::size_t spoof_byte = 0;

    void validate() const;  // throws ConfigError

    static ScenarioConfig parse(std::istream& in);
    static ScenarioConfig parse_text(const std::string& text);
    static ScenarioConfig load(const std::filesystem::path& path);

    // Built-in scenarios: "benign", "flooding", "fuzzing", "spoofing",
    // "combined" (all three attacks in disjoint windows).
    static ScenarioConfig preset(const std::string& name, std::uint64_t seed);
};

// Deterministic labeled frame stream, globally sorted by timestamp,
// timestamps quantized to microseconds.
std::vector<CanFrame> generate(const ScenarioConfig& config);

}  // namespace canbnn
