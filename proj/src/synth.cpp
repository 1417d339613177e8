#include <algorithm>
#include <cmath>
#include <random>

#include "fednilm/data.hpp"
#include "fednilm/error.hpp"
#include "fednilm/seeding.hpp"

namespace fednilm {

namespace {

using Rng = std::mt19937_64;

// A program phase: duration in 6 s slots and power in watts.
struct Phase {
  std::size_t slots;
  double watts;
};

constexpr double kSlot = kSamplePeriodS;
constexpr std::size_t kSlotsPerDay = 86400 / 6;

std::size_t slots_for(double seconds) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(seconds / kSlot)));
}

// Every phase power stays at least this far above the appliance threshold so
// that thresholding the clean 6 s channel reproduces the intended states.
constexpr double kMargin = 10.0;

struct Track {
  std::vector<double> watts;
  std::vector<std::uint8_t> states;
};

void place(Track& track, std::size_t start, const std::vector<Phase>& program) {
  std::size_t t = start;
  for (const Phase& p : program) {
    for (std::size_t k = 0; k < p.slots && t < track.watts.size(); ++k, ++t) {
      track.watts[t] = p.watts;
      track.states[t] = 1;
    }
  }
}

Track fridge_track(std::size_t slots, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double power = 80.0 + 40.0 * u01(rng);
  const double period_s = 1500.0 + 600.0 * u01(rng);
  const double duty = 0.35 + 0.15 * u01(rng);
  Track tr{std::vector<double>(slots, 0.0), std::vector<std::uint8_t>(slots, 0)};
  std::size_t t = static_cast<std::size_t>(u01(rng) * period_s / kSlot);
  while (t < slots) {
    const double jitter_on = 0.9 + 0.2 * u01(rng);
    const double jitter_off = 0.9 + 0.2 * u01(rng);
    const std::size_t on = slots_for(period_s * duty * jitter_on);
    const std::size_t off = slots_for(period_s * (1.0 - duty) * jitter_off);
    place(tr, t, {{on, power}});
    t += on + off;
  }
  return tr;
}

// Sparse programs run at most once per day, starting between 07:00 and 21:00,
// so consecutive activations are always separated by several hours.
Track sparse_track(std::size_t slots, Rng& rng, double runs_per_day,
                   const std::vector<Phase>& base_program) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Track tr{std::vector<double>(slots, 0.0), std::vector<std::uint8_t>(slots, 0)};
  for (std::size_t day = 0; day * kSlotsPerDay < slots; ++day) {
    if (u01(rng) >= runs_per_day) continue;
    const double start_h = 7.0 + 14.0 * u01(rng);
    const std::size_t start = day * kSlotsPerDay + static_cast<std::size_t>(start_h * 600.0);
    std::vector<Phase> program;
    for (const Phase& p : base_program) {
      const double scale = 0.9 + 0.2 * u01(rng);
      program.push_back({std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(p.slots * scale))),
                         p.watts * (0.95 + 0.1 * u01(rng))});
    }
    std::size_t total = 0;
    for (const Phase& p : program) total += p.slots;
    if (start + total > slots) continue;
    place(tr, start, program);
  }
  return tr;
}

Track dishwasher_track(std::size_t slots, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double heat = 1900.0 + 200.0 * u01(rng);
  const std::vector<Phase> program{
      {slots_for(12 * 60), 140.0},  {slots_for(18 * 60), heat},        {slots_for(25 * 60), 180.0},
      {slots_for(12 * 60), heat},   {slots_for(15 * 60), 60.0 + kMargin}, {slots_for(6 * 60), 120.0},
  };
  return sparse_track(slots, rng, 0.55 + 0.3 * u01(rng), program);
}

Track washer_track(std::size_t slots, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double spin = 450.0 + 150.0 * u01(rng);
  const std::vector<Phase> program{
      {slots_for(15 * 60), 220.0}, {slots_for(8 * 60), 1800.0},   {slots_for(20 * 60), 250.0},
      {slots_for(10 * 60), 150.0}, {slots_for(6 * 60), spin},     {slots_for(3 * 60), 20.0 + kMargin},
      {slots_for(7 * 60), spin * 1.3},
  };
  return sparse_track(slots, rng, 0.3 + 0.3 * u01(rng), program);
}

Track appliance_track(const std::string& name, std::size_t slots, Rng& rng) {
  if (name == "fridge") return fridge_track(slots, rng);
  if (name == "dishwasher") return dishwasher_track(slots, rng);
  if (name == "washing_machine" || name == "washer") return washer_track(slots, rng);
  throw ConfigError("synthetic generator has no model for appliance '" + name + "'");
}

}  // namespace

std::vector<SynthHousehold> synth_households(const SynthOptions& options) {
  if (options.households == 0) throw ConfigError("synthetic dataset needs at least one household");
  if (!(options.days > 0)) throw ConfigError("synthetic duration must be positive");
  if (!(options.noise_sigma_w >= 0)) throw ConfigError("noise sigma must be non-negative");
  const std::size_t slots = static_cast<std::size_t>(options.days * kSlotsPerDay);
  if (slots == 0) throw ConfigError("synthetic duration is shorter than one sample");

  std::vector<SynthHousehold> out;
  for (std::size_t h = 0; h < options.households; ++h) {
    Rng rng(derive_seed(options.seed, h));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    SynthHousehold hh;
    hh.raw.household_id = static_cast<std::uint32_t>(h + 1);
    const std::string source = "synth_h" + std::to_string(h + 1);

    std::vector<Track> tracks;
    for (const std::string& name : options.appliances) {
      Rng arng(derive_seed(rng(), 0));
      tracks.push_back(appliance_track(name, slots, arng));
    }

    for (std::size_t a = 0; a < tracks.size(); ++a) {
      RawSeries s;
      s.source_id = source;
      s.channel = options.appliances[a];
      s.timestamps.resize(slots);
      for (std::size_t t = 0; t < slots; ++t) s.timestamps[t] = options.start_time + kSlot * static_cast<double>(t);
      s.watts = tracks[a].watts;
      hh.raw.appliances.push_back(std::move(s));
      hh.intended_states.push_back(std::move(tracks[a].states));
    }

    const double base_w = 120.0 + 120.0 * u01(rng);
    std::normal_distribution<double> noise(0.0, options.noise_sigma_w);
    RawSeries agg;
    agg.source_id = source;
    agg.channel = "aggregate";
    const std::size_t seconds = slots * 6;
    agg.timestamps.resize(seconds);
    agg.watts.resize(seconds);
    for (std::size_t s = 0; s < seconds; ++s) {
      const std::size_t slot = s / 6;
      double w = base_w;
      for (const auto& series : hh.raw.appliances) w += series.watts[slot];
      if (options.noise_sigma_w > 0) w += noise(rng);
      agg.timestamps[s] = options.start_time + static_cast<double>(s);
      agg.watts[s] = std::max(0.0, w);
    }
    hh.raw.aggregate = std::move(agg);
    out.push_back(std::move(hh));
  }
  return out;
}

}  // namespace fednilm
