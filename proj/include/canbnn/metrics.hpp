#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "canbnn/bnn.hpp"
#include "canbnn/packed.hpp"

namespace canbnn {

struct PerClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct Metrics {
    std::size_t n_classes = 0;
    std::vector<std::size_t> confusion;  // row-major, [true][predicted]
    double accuracy = 0.0;
    // Binary: positive-class (code 1) values. Multiclass: macro averages.
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<PerClassMetrics> per_class;
    std::vector<std::string> warnings;  // 0/0 conventions hit

    std::size_t at(std::size_t truth, std::size_t pred) const {
        return confusion[truth * n_classes + pred];
    }
    std::size_t total() const;
};

// Counting metrics; empty input or out-of-range labels throw DataError.
// 0/0 ratios are defined as 0 and recorded in warnings.
Metrics evaluate(std::span<const int> predictions, std::span<const int> truths,
                 std::size_t n_classes);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Per-class largest-remainder apportionment over a seeded shuffle; every
// class lands within one sample of its exact proportion in each split.
// Throws DataError naming any class too small to give each split >= 1.
SplitIndices stratified_split(std::span<const int> labels, double train_frac,
                              double val_frac, double test_frac, std::uint64_t seed);

struct BenchReport {
    double packed_median_us = 0.0;
    double packed_p99_us = 0.0;
    double reference_median_us = 0.0;
    double reference_p99_us = 0.0;
    double speedup = 0.0;  // reference median / packed median
    std::size_t packed_file_bytes = 0;
    std::size_t repetitions = 0;
};

// Single-thread per-message latency of the packed path vs. the real
// arithmetic reference, median and p99 (nearest rank). repetitions == 0 or
// empty inputs throw ConfigError/DataError.
BenchReport bench(const PackedModel& packed, const BnnModel& reference,
                  std::span<const FeatureVector> inputs, std::size_t repetitions);

void write_metrics_report(std::ostream& out, const Metrics& m,
                          const LabelManifest* names = nullptr);
void write_metrics_json(std::ostream& out, const Metrics& m,
                        const LabelManifest* names = nullptr);
void write_bench_report(std::ostream& out, const BenchReport& r);
void write_bench_json(std::ostream& out, const BenchReport& r);

}  // namespace canbnn
