#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fednilm {

struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
  bool operator==(const ConfusionCounts&) const = default;
};

/// Bits of ScoreSet::degenerate, one per metric whose denominator was zero.
enum DegenerateMetric : std::uint32_t {
  kDegenerateAccuracy = 1u << 0,
  kDegeneratePrecision = 1u << 1,
  kDegenerateRecall = 1u << 2,
  kDegenerateF1 = 1u << 3,
};

struct ScoreSet {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  std::uint32_t degenerate = 0;  // DegenerateMetric bits; a 0/0 metric reads 0

  bool operator==(const ScoreSet&) const = default;
};

/// Positive class is ON (1). Throws DimensionError on a length mismatch.
ConfusionCounts confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

ScoreSet scores(const ConfusionCounts& c);

/// Metric-level mean over runs, per appliance. Each run holds one ScoreSet per
/// appliance; the degenerate bits of the result are the union over runs.
std::vector<ScoreSet> aggregate_experiment(std::span<const std::vector<ScoreSet>> runs);

struct ScoreRow {
  std::string appliance;
  std::string run;    // run label, e.g. "rep1"
  std::string split;  // "seen" or "case2"
  ConfusionCounts counts;
  ScoreSet scores;
};

/// Comma-separated table with a header line, then `rows`, then one summary
/// row per appliance holding the metric-level mean and summed counts.
std::string format_score_report(std::span<const ScoreRow> rows);
void write_score_report(const std::string& path, std::span<const ScoreRow> rows);

}  // namespace fednilm
