#include "fednilm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fednilm/bytes.hpp"
#include "fednilm/error.hpp"
#include "fednilm/log.hpp"

namespace fednilm {

void RawSeries::validate() const {
  if (timestamps.size() != watts.size()) {
    throw DataError(source_id + "/" + channel + ": " + std::to_string(timestamps.size()) +
                    " timestamps but " + std::to_string(watts.size()) + " readings");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) {
      throw DataError(source_id + "/" + channel + ": timestamps not strictly increasing at index " +
                      std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < watts.size(); ++i) {
    if (!(watts[i] >= 0.0) || !std::isfinite(watts[i])) {
      throw DataError(source_id + "/" + channel + ": invalid reading at index " +
                      std::to_string(i));
    }
  }
}

void ApplianceSpec::validate() const {
  if (max_power_w < 0 || power_threshold_w < 0 || min_on_s < 0 || min_off_s < 0) {
    throw ConfigError("appliance '" + name + "': thresholds must be non-negative");
  }
  if (!(power_threshold_w < max_power_w)) {
    throw ConfigError("appliance '" + name + "': power threshold must be below max power");
  }
}

ApplianceSpec fridge_spec() { return {"fridge", 300, 50, 1, 0}; }
ApplianceSpec dishwasher_spec() { return {"dishwasher", 2500, 20, 60, 60}; }
ApplianceSpec washing_machine_spec() { return {"washing_machine", 2500, 20, 60, 5}; }

std::vector<ApplianceSpec> default_appliances() {
  return {fridge_spec(), dishwasher_spec(), washing_machine_spec()};
}

ApplianceSpec spec_for(const std::string& name) {
  for (const ApplianceSpec& s : default_appliances()) {
    if (s.name == name) return s;
  }
  if (name == "washer" || name == "washing machine") return washing_machine_spec();
  throw ConfigError("no built-in thresholds for appliance '" + name + "'");
}

// --- ingestion -------------------------------------------------------------

namespace {

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

RawSeries parse_series(const std::string& text, const std::string& source_id,
                       const std::string& channel, LoadReport* report) {
  RawSeries series;
  series.source_id = source_id;
  series.channel = channel;
  LoadReport local;
  std::size_t row = 0;
  std::size_t begin = 0;
  const std::string where = source_id + "/" + channel;
  while (begin < text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + begin, end - begin);
    begin = end + 1;
    ++row;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;
    line.remove_prefix(first);
    const auto sep = line.find_first_of(", \t");
    const auto value_at = sep == std::string_view::npos ? line.size()
                                                         : std::min(line.size(), sep + 1);
    double t = 0, w = 0;
    if (sep == std::string_view::npos || !parse_double(line.substr(0, sep), t) ||
        !parse_double(line.substr(value_at), w)) {
      throw DataError(where + ": malformed row " + std::to_string(row) + ": '" +
                      std::string(line) + "'");
    }
    if (!std::isfinite(t) || !std::isfinite(w)) {
      throw DataError(where + ": non-finite value in row " + std::to_string(row));
    }
    if (!series.timestamps.empty() && !(t > series.timestamps.back())) {
      throw DataError(where + ": timestamp out of order in row " + std::to_string(row));
    }
    if (w < 0) {
      w = 0;
      ++local.negatives_clamped;
    }
    series.timestamps.push_back(t);
    series.watts.push_back(w);
    ++local.rows;
  }
  if (series.timestamps.empty()) throw DataError(where + ": empty series");
  if (local.negatives_clamped > 0) {
    logger().warn("{}: clamped {} negative readings to 0", where, local.negatives_clamped);
  }
  if (report) *report = local;
  return series;
}

RawSeries load_series(const std::string& path, const std::string& source_id,
                      const std::string& channel, LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_series(buf.str(), source_id, channel, report);
}

void write_series(const std::string& path, const RawSeries& series) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  char buf[1024];
  char* const end = buf + sizeof(buf) - 1;
  for (std::size_t i = 0; i < series.size(); ++i) {
    // Fixed notation keeps unix seconds readable; both fields round-trip.
    auto r1 = std::to_chars(buf, end, series.timestamps[i], std::chars_format::fixed);
    if (r1.ec != std::errc{}) throw DataError("timestamp out of range at row " + std::to_string(i + 1));
    *r1.ptr++ = ' ';
    auto r2 = std::to_chars(r1.ptr, end, series.watts[i]);
    if (r2.ec != std::errc{}) throw DataError("reading out of range at row " + std::to_string(i + 1));
    *r2.ptr++ = '\n';
    out.write(buf, r2.ptr - buf);
  }
  if (!out) throw DataError("write failed for " + path);
}

// --- preprocessing ---------------------------------------------------------

std::size_t clip_max_power(RawSeries& series, const ApplianceSpec& spec) {
  std::size_t clipped = 0;
  for (double& w : series.watts) {
    if (w > spec.max_power_w) {
      w = spec.max_power_w;
      ++clipped;
    }
  }
  return clipped;
}

RawSeries downsample_6s(const RawSeries& series, ResampleReport* report) {
  if (series.timestamps.empty()) throw DataError("cannot resample an empty series");
  return downsample_6s(series, series.timestamps.front(), report);
}

RawSeries downsample_6s(const RawSeries& series, double origin, ResampleReport* report) {
  RawSeries out;
  out.source_id = series.source_id;
  out.channel = series.channel;
  ResampleReport local;
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double t = series.timestamps[i];
    if (t < origin) continue;
    const auto bin = static_cast<std::size_t>(std::floor((t - origin) / kSamplePeriodS));
    if (bin >= sums.size()) {
      sums.resize(bin + 1, 0.0);
      counts.resize(bin + 1, 0);
    }
    sums[bin] += series.watts[i];
    ++counts[bin];
  }
  bool seen_any = false;
  double previous = 0.0;
  for (std::size_t bin = 0; bin < sums.size(); ++bin) {
    double value;
    if (counts[bin] > 0) {
      value = sums[bin] / static_cast<double>(counts[bin]);
      seen_any = true;
    } else if (seen_any) {
      value = previous;
      ++local.empty_bins_filled;
    } else {
      ++local.leading_bins_dropped;
      continue;
    }
    out.timestamps.push_back(origin + kSamplePeriodS * static_cast<double>(bin));
    out.watts.push_back(value);
    previous = value;
  }
  local.bins = out.size();
  if (local.empty_bins_filled > 0 || local.leading_bins_dropped > 0) {
    logger().info("{}/{}: {} bins, {} empty bins forward-filled, {} leading bins dropped",
                  series.source_id, series.channel, local.bins, local.empty_bins_filled,
                  local.leading_bins_dropped);
  }
  if (report) *report = local;
  return out;
}

std::vector<double> normalize(std::span<const double> watts, double mean_w) {
  std::vector<double> out(watts.size());
  for (std::size_t i = 0; i < watts.size(); ++i) out[i] = (watts[i] - mean_w) / kNormalizationScaleW;
  return out;
}

std::vector<double> denormalize(std::span<const double> normalized, double mean_w) {
  std::vector<double> out(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    out[i] = normalized[i] * kNormalizationScaleW + mean_w;
  }
  return out;
}

namespace {

// Rewrites every maximal run of `value` whose duration is strictly below
// `min_duration_s` to the opposite value.
void flip_short_runs(std::vector<std::uint8_t>& states, std::uint8_t value, double min_duration_s,
                     double period_s) {
  std::size_t i = 0;
  while (i < states.size()) {
    if (states[i] != value) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < states.size() && states[j] == value) ++j;
    if (static_cast<double>(j - i) * period_s < min_duration_s) {
      std::fill(states.begin() + static_cast<std::ptrdiff_t>(i),
                states.begin() + static_cast<std::ptrdiff_t>(j), static_cast<std::uint8_t>(1 - value));
    }
    i = j;
  }
}

}  // namespace

std::vector<std::uint8_t> threshold_states(std::span<const double> watts, const ApplianceSpec& spec,
                                           double sample_period_s) {
  std::vector<std::uint8_t> states(watts.size());
  for (std::size_t i = 0; i < watts.size(); ++i) {
    states[i] = watts[i] >= spec.power_threshold_w ? 1 : 0;
  }
  flip_short_runs(states, 0, spec.min_off_s, sample_period_s);
  flip_short_runs(states, 1, spec.min_on_s, sample_period_s);
  return states;
}

std::vector<WindowSample> make_windows(std::span<const float> aggregate,
                                       std::span<const std::vector<std::uint8_t>> labels,
                                       std::size_t window_len, std::size_t stride,
                                       std::uint32_t household_id,
                                       std::span<const double> timestamps) {
  if (window_len == 0 || stride == 0) throw ParameterError("window length and stride must be positive");
  for (const auto& l : labels) {
    if (l.size() != aggregate.size()) {
      throw DimensionError("length", "label series length " + std::to_string(l.size()) +
                                         " differs from aggregate length " +
                                         std::to_string(aggregate.size()));
    }
  }
  if (!timestamps.empty() && timestamps.size() != aggregate.size()) {
    throw DimensionError("length", "timestamps and aggregate differ in length");
  }
  std::vector<WindowSample> windows;
  for (std::size_t start = 0; start + window_len <= aggregate.size(); start += stride) {
    WindowSample w;
    w.aggregate.assign(aggregate.begin() + static_cast<std::ptrdiff_t>(start),
                       aggregate.begin() + static_cast<std::ptrdiff_t>(start + window_len));
    w.labels.reserve(labels.size() * window_len);
    for (const auto& l : labels) {
      w.labels.insert(w.labels.end(), l.begin() + static_cast<std::ptrdiff_t>(start),
                      l.begin() + static_cast<std::ptrdiff_t>(start + window_len));
    }
    w.household_id = household_id;
    w.start_time = timestamps.empty() ? static_cast<double>(start) : timestamps[start];
    windows.push_back(std::move(w));
  }
  return windows;
}

// --- splits ----------------------------------------------------------------

std::vector<std::uint32_t> SplitPlan::training_households() const {
  std::vector<std::uint32_t> ids;
  for (const auto& h : households) {
    if (h.train.size() > 0) ids.push_back(h.household_id);
  }
  return ids;
}

std::vector<std::uint32_t> SplitPlan::test_households() const {
  std::vector<std::uint32_t> ids;
  for (const auto& h : households) {
    if (h.test.size() > 0) ids.push_back(h.household_id);
  }
  return ids;
}

SplitPlan plan_split(std::span<const HouseholdExtent> households, SplitMode mode,
                     std::size_t unseen_case) {
  if (households.empty()) throw ConfigError("split needs at least one household");
  SplitPlan plan;
  plan.mode = mode;
  if (mode == SplitMode::kSeen) {
    for (const auto& h : households) {
      const std::size_t a = h.length * 8 / 10, b = h.length * 9 / 10;
      plan.households.push_back({h.household_id, {0, a}, {a, b}, {b, h.length}});
    }
    return plan;
  }
  if (households.size() < 2) throw ConfigError("unseen split needs at least two households");
  if (unseen_case < 1 || unseen_case > households.size()) {
    throw ConfigError("unseen case must lie in [1, " + std::to_string(households.size()) + "]");
  }
  plan.unseen_case = unseen_case;
  for (std::size_t i = 0; i < households.size(); ++i) {
    const auto& h = households[i];
    if (i + 1 == unseen_case) {
      plan.households.push_back({h.household_id, {0, 0}, {0, 0}, {0, h.length}});
    } else {
      const std::size_t a = h.length * 9 / 10;
      plan.households.push_back({h.household_id, {0, a}, {a, h.length}, {h.length, h.length}});
    }
  }
  return plan;
}

SplitMode parse_split_mode(const std::string& s) {
  if (s == "seen") return SplitMode::kSeen;
  if (s == "unseen") return SplitMode::kUnseen;
  throw ConfigError("split mode must be 'seen' or 'unseen', got '" + s + "'");
}

std::string to_string(SplitMode mode) { return mode == SplitMode::kSeen ? "seen" : "unseen"; }

// --- pipeline ----------------------------------------------------------------

namespace {

struct AlignedHousehold {
  std::uint32_t id = 0;
  std::vector<double> timestamps;
  std::vector<double> aggregate_w;
  std::vector<std::vector<std::uint8_t>> states;
  std::size_t clipped = 0;
  std::size_t filled = 0;
};

AlignedHousehold align_household(const HouseholdRaw& raw, std::span<const ApplianceSpec> specs) {
  if (raw.appliances.size() != specs.size()) {
    throw DataError("household " + std::to_string(raw.household_id) + " has " +
                    std::to_string(raw.appliances.size()) + " appliance channels, expected " +
                    std::to_string(specs.size()));
  }
  AlignedHousehold out;
  out.id = raw.household_id;
  std::vector<RawSeries> channels{raw.aggregate};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    RawSeries s = raw.appliances[i];
    out.clipped += clip_max_power(s, specs[i]);
    channels.push_back(std::move(s));
  }
  double origin = -INFINITY;
  for (const auto& c : channels) {
    c.validate();
    if (c.timestamps.empty()) {
      throw DataError("household " + std::to_string(raw.household_id) + " channel '" + c.channel +
                      "' is empty");
    }
    origin = std::max(origin, c.timestamps.front());
  }
  std::vector<RawSeries> binned;
  std::size_t first = 0, last = SIZE_MAX;
  for (const auto& c : channels) {
    ResampleReport rep;
    binned.push_back(downsample_6s(c, origin, &rep));
    out.filled += rep.empty_bins_filled;
    const auto& ts = binned.back().timestamps;
    if (ts.empty()) throw DataError("channel '" + c.channel + "' has no samples after alignment");
    const auto lo = static_cast<std::size_t>(std::llround((ts.front() - origin) / kSamplePeriodS));
    first = std::max(first, lo);
    last = std::min(last, lo + ts.size());
  }
  if (last <= first) {
    throw DataError("household " + std::to_string(raw.household_id) + " channels do not overlap");
  }
  auto slice = [&](const RawSeries& s) {
    const auto lo = static_cast<std::size_t>(std::llround((s.timestamps.front() - origin) / kSamplePeriodS));
    return std::pair{s.watts.begin() + static_cast<std::ptrdiff_t>(first - lo),
                     s.watts.begin() + static_cast<std::ptrdiff_t>(last - lo)};
  };
  {
    auto [b, e] = slice(binned[0]);
    out.aggregate_w.assign(b, e);
    const auto lo = static_cast<std::size_t>(
        std::llround((binned[0].timestamps.front() - origin) / kSamplePeriodS));
    out.timestamps.assign(binned[0].timestamps.begin() + static_cast<std::ptrdiff_t>(first - lo),
                          binned[0].timestamps.begin() + static_cast<std::ptrdiff_t>(last - lo));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto [b, e] = slice(binned[i + 1]);
    const std::vector<double> w(b, e);
    out.states.push_back(threshold_states(w, specs[i]));
  }
  return out;
}

std::vector<WindowSample> window_range(const AlignedHousehold& h, std::span<const float> normalized,
                                       IndexRange range, std::size_t window_len,
                                       std::size_t stride) {
  if (range.size() < window_len) return {};
  std::vector<std::vector<std::uint8_t>> labels;
  for (const auto& s : h.states) {
    labels.emplace_back(s.begin() + static_cast<std::ptrdiff_t>(range.begin),
                        s.begin() + static_cast<std::ptrdiff_t>(range.end));
  }
  return make_windows(normalized.subspan(range.begin, range.size()), labels, window_len, stride,
                      h.id, std::span<const double>(h.timestamps).subspan(range.begin, range.size()));
}

}  // namespace

PreparedDataset preprocess(std::span<const HouseholdRaw> households,
                           std::span<const ApplianceSpec> specs, const PreprocessOptions& options) {
  for (const auto& s : specs) s.validate();
  std::vector<AlignedHousehold> aligned;
  std::vector<HouseholdExtent> extents;
  for (const auto& raw : households) {
    aligned.push_back(align_household(raw, specs));
    extents.push_back({raw.household_id, aligned.back().aggregate_w.size()});
  }

  PreparedDataset out;
  for (const auto& s : specs) out.appliance_names.push_back(s.name);
  out.window_len = options.window_len;
  out.plan = plan_split(extents, options.mode, options.unseen_case);

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const IndexRange r = out.plan.households[i].train;
    for (std::size_t k = r.begin; k < r.end; ++k) sum += aligned[i].aggregate_w[k];
    count += r.size();
  }
  if (count == 0) throw DataError("training portion is empty; cannot compute the normalization mean");
  out.report.mean_w = sum / static_cast<double>(count);

  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const AlignedHousehold& h = aligned[i];
    const HouseholdSplit& split = out.plan.households[i];
    const std::vector<double> wide = normalize(h.aggregate_w, out.report.mean_w);
    const std::vector<float> normalized(wide.begin(), wide.end());
    HouseholdWindows hw;
    hw.household_id = h.id;
    hw.train = window_range(h, normalized, split.train, options.window_len, options.train_stride);
    hw.validation =
        window_range(h, normalized, split.validation, options.window_len, options.eval_stride);
    hw.test = window_range(h, normalized, split.test, options.window_len, options.eval_stride);
    out.households.push_back(std::move(hw));
    out.report.samples[h.id] = h.aggregate_w.size();
    out.report.clipped[h.id] = h.clipped;
    out.report.empty_bins_filled[h.id] = h.filled;
  }
  return out;
}

// --- windowed dataset file ---------------------------------------------------

namespace {
constexpr char kDatasetMagic[] = "FNLW";
constexpr std::uint16_t kDatasetVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_dataset(const WindowDataset& ds) {
  const std::size_t apps = ds.appliance_names.size();
  const std::size_t label_bits = ds.window_len * apps;
  std::vector<std::uint8_t> out;
  bytes::put_raw(out, std::string_view(kDatasetMagic, 4));
  bytes::put_le<std::uint16_t>(out, kDatasetVersion);
  bytes::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.window_len));
  bytes::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(apps));
  for (const auto& name : ds.appliance_names) {
    bytes::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    bytes::put_raw(out, name);
  }
  out.reserve(out.size() + ds.samples.size() * (4 * ds.window_len + (label_bits + 7) / 8));
  for (const auto& w : ds.samples) {
    if (w.aggregate.size() != ds.window_len || w.labels.size() != label_bits) {
      throw DimensionError("length", "window does not match the dataset header");
    }
    for (float v : w.aggregate) bytes::put_f32(out, v);
    std::vector<std::uint8_t> packed((label_bits + 7) / 8, 0);
    for (std::size_t i = 0; i < label_bits; ++i) {
      if (w.labels[i] > 1) throw ValidationError("labels must be 0 or 1");
      packed[i / 8] |= static_cast<std::uint8_t>(w.labels[i] << (i % 8));
    }
    out.insert(out.end(), packed.begin(), packed.end());
  }
  return out;
}

WindowDataset decode_dataset(std::span<const std::uint8_t> data) {
  bytes::Reader<DataError> in(data);
  if (in.str(4) != std::string_view(kDatasetMagic, 4)) throw DataError("not a windowed dataset (bad magic)");
  const auto version = in.le<std::uint16_t>();
  if (version != kDatasetVersion) {
    throw DataError("unsupported dataset version " + std::to_string(version));
  }
  WindowDataset ds;
  ds.window_len = in.le<std::uint32_t>();
  const std::size_t apps = in.le<std::uint32_t>();
  for (std::size_t i = 0; i < apps; ++i) ds.appliance_names.push_back(in.str(in.le<std::uint16_t>()));
  const std::size_t label_bits = ds.window_len * apps;
  const std::size_t record = 4 * ds.window_len + (label_bits + 7) / 8;
  if (record == 0 || in.remaining() % record != 0) {
    throw DataError("dataset body of " + std::to_string(in.remaining()) +
                    " bytes is not a whole number of records");
  }
  const std::size_t n = in.remaining() / record;
  ds.samples.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    WindowSample w;
    w.aggregate.resize(ds.window_len);
    for (float& v : w.aggregate) v = in.f32();
    const auto packed = in.take((label_bits + 7) / 8);
    w.labels.resize(label_bits);
    for (std::size_t i = 0; i < label_bits; ++i) w.labels[i] = (packed[i / 8] >> (i % 8)) & 1u;
    ds.samples.push_back(std::move(w));
  }
  return ds;
}

void write_dataset(const std::string& path, const WindowDataset& ds) {
  bytes::write_file(path, encode_dataset(ds));
}

WindowDataset read_dataset(const std::string& path) { return decode_dataset(bytes::read_file(path)); }

}  // namespace fednilm
