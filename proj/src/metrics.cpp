#include "fednilm/metrics.hpp"

#include <fstream>
#include <map>

#include <fmt/format.h>

#include "fednilm/error.hpp"

namespace fednilm {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("length", "prediction has " + std::to_string(predicted.size()) +
                                       " steps, truth has " + std::to_string(truth.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0, t = truth[i] != 0;
    if (p && t) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (t) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

namespace {

double ratio(double num, double den, std::uint32_t bit, std::uint32_t& flags) {
  if (den == 0.0) {
    flags |= bit;
    return 0.0;
  }
  return num / den;
}

}  // namespace

ScoreSet scores(const ConfusionCounts& c) {
  ScoreSet s;
  const auto d = [](std::uint64_t v) { return static_cast<double>(v); };
  s.accuracy = ratio(d(c.tp + c.tn), d(c.total()), kDegenerateAccuracy, s.degenerate);
  s.precision = ratio(d(c.tp), d(c.tp + c.fp), kDegeneratePrecision, s.degenerate);
  s.recall = ratio(d(c.tp), d(c.tp + c.fn), kDegenerateRecall, s.degenerate);
  s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall, kDegenerateF1, s.degenerate);
  return s;
}

std::vector<ScoreSet> aggregate_experiment(std::span<const std::vector<ScoreSet>> runs) {
  if (runs.empty()) throw ValidationError("no runs to aggregate");
  const std::size_t apps = runs.front().size();
  std::vector<ScoreSet> mean(apps);
  for (const auto& run : runs) {
    if (run.size() != apps) throw DimensionError("appliance", "runs disagree on the appliance count");
    for (std::size_t a = 0; a < apps; ++a) {
      mean[a].accuracy += run[a].accuracy;
      mean[a].precision += run[a].precision;
      mean[a].recall += run[a].recall;
      mean[a].f1 += run[a].f1;
      mean[a].degenerate |= run[a].degenerate;
    }
  }
  const double n = static_cast<double>(runs.size());
  for (ScoreSet& s : mean) {
    s.accuracy /= n;
    s.precision /= n;
    s.recall /= n;
    s.f1 /= n;
  }
  return mean;
}

std::string format_score_report(std::span<const ScoreRow> rows) {
  std::string out = "appliance,run,split,accuracy,precision,recall,f1,tp,tn,fp,fn,degenerate\n";
  auto line = [&](const std::string& app, const std::string& run, const std::string& split,
                  const ScoreSet& s, const ConfusionCounts& c) {
    out += fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{},{},{}\n", app, run, split,
                       s.accuracy, s.precision, s.recall, s.f1, c.tp, c.tn, c.fp, c.fn, s.degenerate);
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<ScoreSet>>> per_app;
  std::map<std::string, ConfusionCounts> pooled;
  for (const ScoreRow& r : rows) {
    line(r.appliance, r.run, r.split, r.scores, r.counts);
    if (!per_app.contains(r.appliance)) order.push_back(r.appliance);
    per_app[r.appliance].push_back({r.scores});
    pooled[r.appliance] += r.counts;
  }
  for (const std::string& app : order) {
    line(app, "mean", "all", aggregate_experiment(per_app[app]).front(), pooled[app]);
  }
  return out;
}

void write_score_report(const std::string& path, std::span<const ScoreRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << format_score_report(rows);
}

}  // namespace fednilm
