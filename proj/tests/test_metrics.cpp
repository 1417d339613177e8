#include <doctest.h>

#include <algorithm>
#include <random>

#include "fednilm/error.hpp"
#include "fednilm/metrics.hpp"

using namespace fednilm;

TEST_SUITE("confusion") {
  TEST_CASE("examples") {
    const std::vector<std::uint8_t> p{1, 0, 1}, t{1, 0, 1};
    CHECK(confusion(p, t) == ConfusionCounts{2, 1, 0, 0});
    const std::vector<std::uint8_t> p2{1, 1}, t2{0, 0};
    CHECK(confusion(p2, t2).fp == 2);
  }

  TEST_CASE("length mismatch") {
    const std::vector<std::uint8_t> p{1, 0}, t{1};
    CHECK_THROWS_AS(confusion(p, t), DimensionError);
  }

  TEST_CASE("matches brute-force counting on random pairs") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = rng() % 300;
      const double density = static_cast<double>(rng() % 101) / 100.0;
      std::bernoulli_distribution coin(density);
      std::vector<std::uint8_t> p(n), t(n);
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = coin(rng);
        t[i] = coin(rng);
      }
      std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += p[i] == 1 && t[i] == 1;
        tn += p[i] == 0 && t[i] == 0;
        fp += p[i] == 1 && t[i] == 0;
        fn += p[i] == 0 && t[i] == 1;
      }
      const auto c = confusion(p, t);
      REQUIRE(c == ConfusionCounts{tp, tn, fp, fn});
      const auto s = scores(c);
      const double acc = n ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
      const double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
      const double rec = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      CHECK(s.accuracy == acc);
      CHECK(s.precision == prec);
      CHECK(s.recall == rec);
      CHECK(s.f1 == f1);
      CHECK(((s.degenerate & kDegeneratePrecision) != 0) == (tp + fp == 0));
      CHECK(((s.degenerate & kDegenerateRecall) != 0) == (tp + fn == 0));
      CHECK(((s.degenerate & kDegenerateAccuracy) != 0) == (n == 0));
      if (prec > 0 && rec > 0) {
        CHECK(s.f1 <= std::max(prec, rec) + 1e-15);
        CHECK(s.f1 >= std::min(prec, rec) - 1e-15);
      }
      // Counting ignores order.
      std::vector<std::size_t> perm(n);
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<std::uint8_t> pp(n), tt(n);
      for (std::size_t i = 0; i < n; ++i) {
        pp[i] = p[perm[i]];
        tt[i] = t[perm[i]];
      }
      CHECK(confusion(pp, tt) == c);
    }
  }
}

TEST_SUITE("scores") {
  TEST_CASE("one hit, one false alarm") {
    const auto s = scores({1, 0, 1, 0});
    CHECK(s.precision == 0.5);
    CHECK(s.recall == 1.0);
    CHECK(s.accuracy == 0.5);
    CHECK(s.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(s.degenerate == 0);
  }

  TEST_CASE("all correct") {
    const auto s = scores({5, 7, 0, 0});
    CHECK(s.accuracy == 1.0);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.f1 == 1.0);
  }

  TEST_CASE("no positives predicted or present") {
    const auto s = scores({0, 9, 0, 0});
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
    CHECK(s.accuracy == 1.0);
    CHECK((s.degenerate & kDegeneratePrecision) != 0);
    CHECK((s.degenerate & kDegenerateRecall) != 0);
    CHECK((s.degenerate & kDegenerateF1) != 0);
    CHECK((s.degenerate & kDegenerateAccuracy) == 0);
  }

  TEST_CASE("empty counts") {
    const auto s = scores({});
    CHECK(s.accuracy == 0.0);
    CHECK((s.degenerate & kDegenerateAccuracy) != 0);
  }
}

TEST_SUITE("aggregation") {
  ScoreSet with_f1(double f1) {
    ScoreSet s;
    s.f1 = f1;
    s.accuracy = f1;
    return s;
  }

  TEST_CASE("metric-level mean") {
    const std::vector<std::vector<ScoreSet>> runs{{with_f1(0.8)}, {with_f1(0.6)}};
    const auto m = aggregate_experiment(runs);
    CHECK(m[0].f1 == doctest::Approx(0.7).epsilon(1e-15));
  }

  TEST_CASE("identical runs aggregate to themselves") {
    const auto s = scores({3, 4, 1, 2});
    const std::vector<std::vector<ScoreSet>> runs(5, std::vector<ScoreSet>{s, s});
    const auto m = aggregate_experiment(runs);
    CHECK(m[0].f1 == doctest::Approx(s.f1).epsilon(1e-15));
    CHECK(m[1].precision == doctest::Approx(s.precision).epsilon(1e-15));
  }

  TEST_CASE("nested and flat averaging agree for equal-count designs") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::vector<ScoreSet>> flat;
    std::vector<std::vector<ScoreSet>> case_means;
    for (int c = 0; c < 3; ++c) {
      std::vector<std::vector<ScoreSet>> reps;
      for (int r = 0; r < 5; ++r) {
        reps.push_back({with_f1(u(rng))});
        flat.push_back(reps.back());
      }
      case_means.push_back(aggregate_experiment(reps));
    }
    CHECK(aggregate_experiment(case_means)[0].f1 ==
          doctest::Approx(aggregate_experiment(flat)[0].f1).epsilon(1e-12));
  }

  TEST_CASE("degenerate flags propagate") {
    const std::vector<std::vector<ScoreSet>> runs{{scores({0, 3, 0, 0})}, {scores({1, 1, 1, 1})}};
    CHECK((aggregate_experiment(runs)[0].degenerate & kDegeneratePrecision) != 0);
  }

  TEST_CASE("report has a header, the rows and one summary per appliance") {
    std::vector<ScoreRow> rows;
    for (const char* app : {"fridge", "dishwasher"}) {
      for (int r = 1; r <= 2; ++r) {
        const ConfusionCounts c{static_cast<std::uint64_t>(r), 3, 1, 0};
        rows.push_back({app, "rep" + std::to_string(r), "seen", c, scores(c)});
      }
    }
    const std::string text = format_score_report(rows);
    CHECK(text.rfind("appliance,run,split,accuracy,precision,recall,f1,tp,tn,fp,fn,degenerate\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 4 + 2);
    CHECK(text.find("fridge,mean,all,") != std::string::npos);
    CHECK(text.find("dishwasher,mean,all,") != std::string::npos);
    CHECK(text.find(",3,6,2,0,0\n") != std::string::npos);  // pooled fridge counts
  }
}
