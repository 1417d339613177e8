#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace fednilm {

inline constexpr double kSamplePeriodS = 6.0;
inline constexpr double kNormalizationScaleW = 2000.0;

/// One metered channel of one household.
struct RawSeries {
  std::vector<double> timestamps;  // seconds, strictly increasing
  std::vector<double> watts;       // non-negative
  std::string source_id;
  std::string channel;  // "aggregate" or an appliance name

  std::size_t size() const noexcept { return watts.size(); }
  /// Throws DataError when lengths differ, timestamps are not strictly
  /// increasing, or a reading is negative.
  void validate() const;
};

struct ApplianceSpec {
  std::string name;
  double max_power_w = 0;
  double power_threshold_w = 0;
  double min_on_s = 0;
  double min_off_s = 0;

  void validate() const;
  bool operator==(const ApplianceSpec&) const = default;
};

// Thresholds for the three studied appliances.
ApplianceSpec fridge_spec();
ApplianceSpec dishwasher_spec();
ApplianceSpec washing_machine_spec();
std::vector<ApplianceSpec> default_appliances();

/// One model input window with per-step labels, labels stored appliance-major.
struct WindowSample {
  std::vector<float> aggregate;
  std::vector<std::uint8_t> labels;
  std::uint32_t household_id = 0;
  double start_time = 0;

  bool operator==(const WindowSample&) const = default;
};

// --- ingestion -------------------------------------------------------------

struct LoadReport {
  std::size_t rows = 0;
  std::size_t negatives_clamped = 0;
};

/// Reads "<unix-seconds><sep><watts>" rows (sep: comma, tab or spaces).
/// Blank lines and lines starting with '#' are skipped.
RawSeries load_series(const std::string& path, const std::string& source_id,
                      const std::string& channel, LoadReport* report = nullptr);
RawSeries parse_series(const std::string& text, const std::string& source_id,
                       const std::string& channel, LoadReport* report = nullptr);
void write_series(const std::string& path, const RawSeries& series);

// --- preprocessing ---------------------------------------------------------

/// Readings above spec.max_power_w are replaced by it; returns the count.
std::size_t clip_max_power(RawSeries& series, const ApplianceSpec& spec);

struct ResampleReport {
  std::size_t bins = 0;
  std::size_t empty_bins_filled = 0;
  std::size_t leading_bins_dropped = 0;
};

/// Non-overlapping 6 s bins starting at `origin` (default: first timestamp).
/// Each bin holds the mean of its samples; empty bins take the previous
/// bin's value; empty bins before the first sample are dropped. Output
/// timestamps are the bin starts.
RawSeries downsample_6s(const RawSeries& series, ResampleReport* report = nullptr);
RawSeries downsample_6s(const RawSeries& series, double origin, ResampleReport* report = nullptr);

/// (x - mean) / 2000. Windows narrow the result to float.
std::vector<double> normalize(std::span<const double> watts, double mean_w);
std::vector<double> denormalize(std::span<const double> normalized, double mean_w);

/// Activation-time thresholding of a 6 s series: binarize at the power
/// threshold, fill OFF gaps shorter than min_off_s, then drop ON runs shorter
/// than min_on_s.
std::vector<std::uint8_t> threshold_states(std::span<const double> watts, const ApplianceSpec& spec,
                                           double sample_period_s = kSamplePeriodS);

/// `labels` holds one state series per appliance, each as long as `aggregate`.
/// A trailing remainder shorter than a window is dropped.
std::vector<WindowSample> make_windows(std::span<const float> aggregate,
                                       std::span<const std::vector<std::uint8_t>> labels,
                                       std::size_t window_len, std::size_t stride,
                                       std::uint32_t household_id = 0,
                                       std::span<const double> timestamps = {});

// --- splits ----------------------------------------------------------------

enum class SplitMode { kSeen, kUnseen };

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

struct HouseholdExtent {
  std::uint32_t household_id = 0;
  std::size_t length = 0;
};

struct HouseholdSplit {
  std::uint32_t household_id = 0;
  IndexRange train, validation, test;
};

struct SplitPlan {
  SplitMode mode = SplitMode::kSeen;
  std::size_t unseen_case = 0;  // 1-based; 0 in seen mode
  std::vector<HouseholdSplit> households;

  std::vector<std::uint32_t> training_households() const;
  std::vector<std::uint32_t> test_households() const;
};

/// Seen: every household split 80/10/10 in time order. Unseen case k:
/// household k (1-based, input order) is entirely test; the others 90/10.
SplitPlan plan_split(std::span<const HouseholdExtent> households, SplitMode mode,
                     std::size_t unseen_case = 0);

SplitMode parse_split_mode(const std::string& s);
std::string to_string(SplitMode mode);

// --- end-to-end pipeline ----------------------------------------------------

/// One household's raw channels: the aggregate plus one series per appliance,
/// in the same order as the appliance specs.
struct HouseholdRaw {
  std::uint32_t household_id = 0;
  RawSeries aggregate;
  std::vector<RawSeries> appliances;
};

struct PreprocessOptions {
  std::size_t window_len = 126;
  std::size_t train_stride = 63;
  std::size_t eval_stride = 126;
  SplitMode mode = SplitMode::kSeen;
  std::size_t unseen_case = 0;
};

struct HouseholdWindows {
  std::uint32_t household_id = 0;
  std::vector<WindowSample> train, validation, test;
};

struct PreprocessReport {
  double mean_w = 0;  // training-portion aggregate mean
  std::map<std::uint32_t, std::size_t> samples;  // 6 s samples per household
  std::map<std::uint32_t, std::size_t> clipped;
  std::map<std::uint32_t, std::size_t> empty_bins_filled;
};

struct PreparedDataset {
  std::vector<std::string> appliance_names;
  std::size_t window_len = 126;
  SplitPlan plan;
  std::vector<HouseholdWindows> households;
  PreprocessReport report;
};

/// Clip, resample to a common 6 s grid, threshold, split in time, normalize
/// with the mean of the training portions, and window each portion.
PreparedDataset preprocess(std::span<const HouseholdRaw> households,
                           std::span<const ApplianceSpec> specs, const PreprocessOptions& options);

// --- windowed dataset file ---------------------------------------------------

struct WindowDataset {
  std::vector<std::string> appliance_names;
  std::size_t window_len = 126;
  std::vector<WindowSample> samples;
};

std::vector<std::uint8_t> encode_dataset(const WindowDataset& ds);
WindowDataset decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(const std::string& path, const WindowDataset& ds);
WindowDataset read_dataset(const std::string& path);

// --- synthetic households ----------------------------------------------------

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t households = 3;
  double days = 14;
  std::vector<std::string> appliances{"fridge", "dishwasher", "washing_machine"};
  double noise_sigma_w = 15.0;
  double start_time = 1'400'000'000;  // unix seconds
};

struct SynthHousehold {
  HouseholdRaw raw;  // aggregate at 1 s, appliances at 6 s
  std::vector<std::vector<std::uint8_t>> intended_states;  // per appliance, 6 s grid
};

/// Parametric generator: periodic fridge cycles, sparse multi-phase
/// dishwasher runs, sparse multi-state washer programs; aggregate is the
/// appliance sum plus base load plus Gaussian noise, clamped at zero.
std::vector<SynthHousehold> synth_households(const SynthOptions& options);

ApplianceSpec spec_for(const std::string& appliance_name);

}  // namespace fednilm
