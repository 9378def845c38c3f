// Copyright 2026 The ifnmtpp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "ifnmtpp/error.hpp"
#include "ifnmtpp/log.hpp"
#include "ifnmtpp/thresholding.hpp"
#include "test_util.hpp"

using namespace ifnmtpp;

namespace {

// Plain F1 of the rule "predict positive when score > eps".
double f1_at(const std::vector<double>& s, const std::vector<bool>& pos, double eps) {
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool pred = s[i] > eps;
    tp += pred && pos[i];
    fp += pred && !pos[i];
    fn += !pred && pos[i];
  }
  return tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
}

BinaryThreshold binary(const std::vector<double>& s, const std::vector<bool>& pos) {
  std::unique_ptr<bool[]> buf(new bool[pos.size()]);
  std::copy(pos.begin(), pos.end(), buf.get());
  return calibrate_binary(s, std::span<const bool>(buf.get(), pos.size()));
}

struct Problem {
  std::vector<double> scores;
  std::vector<bool> positive;
};

Problem random_problem(std::mt19937_64& rng, int n, bool coarse) {
  std::bernoulli_distribution label(0.3);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> level(0, 6);
  Problem p;
  for (int i = 0; i < n; ++i) {
    const bool y = label(rng);
    p.positive.push_back(y);
    // Coarse scores force many ties.
    p.scores.push_back(coarse ? 0.25 * level(rng) + (y ? 0.25 : 0.0) : noise(rng) + (y ? 1.0 : 0.0));
  }
  return p;
}

}  // namespace

TEST_CASE("ratios") {
  const std::vector<double> prior{0.99, 0.01};
  const std::vector<double> pm{0.9, 0.1};
  const auto r = ratios(pm, prior);
  CHECK(r[0] == doctest::Approx(0.9 / 0.99));
  CHECK(r[1] == doctest::Approx(10.0));

  const std::vector<double> p3{0.5, 0.3, 0.2};
  for (double v : ratios(p3, p3)) CHECK(v == doctest::Approx(1.0));

  std::vector<std::string> warnings;
  set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  const std::vector<double> holey{0.5, 0.0, 0.5};
  const auto rz = ratios(p3, holey);
  set_warning_sink({});
  CHECK(std::isnan(rz[1]));
  CHECK(warnings.size() == 1);
  CHECK(std::isnan(ratios(p3, holey, true)[1]));
}

TEST_CASE("separable scores reach F1 one with a threshold between the groups") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.9, 0.8, 0.2};
  const std::vector<bool> y{false, false, false, true, true, false};
  const auto b = binary(s, y);
  CHECK(b.f1 == 1.0);
  CHECK(b.epsilon > 0.4);
  CHECK(b.epsilon < 0.8);
}

TEST_CASE("three-score example by exhaustive enumeration") {
  const std::vector<double> s{0.9, 0.8, 0.3};
  const std::vector<bool> y{true, false, true};
  // Regions: predict none, {0.9}, {0.9, 0.8}, all.
  CHECK(f1_at(s, y, 0.95) == 0.0);
  CHECK(f1_at(s, y, 0.85) == doctest::Approx(2.0 / 3.0));
  CHECK(f1_at(s, y, 0.5) == doctest::Approx(0.5));
  CHECK(f1_at(s, y, 0.0) == doctest::Approx(0.8));
  const auto b = binary(s, y);
  CHECK(b.f1 == doctest::Approx(0.8));
  CHECK(b.epsilon < 0.3);
  CHECK(b.true_positives == 2);
  CHECK(b.false_positives == 1);
  CHECK(b.false_negatives == 0);
}

TEST_CASE("calibration matches exhaustive and dense-grid oracles") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_problem(rng, 5 + trial % 60, trial % 2 == 0);
    const auto b = binary(p.scores, p.positive);
    const bool any_pos = std::find(p.positive.begin(), p.positive.end(), true) != p.positive.end();
    if (!any_pos) {
      CHECK(std::isinf(b.epsilon));
      continue;
    }
    // The reported F1 is the one the stored threshold produces.
    CHECK(f1_at(p.scores, p.positive, b.epsilon) == doctest::Approx(b.f1).epsilon(1e-15));

    // Exhaustive: every "score >= v" region.
    double best = 0.0;
    auto sorted = p.scores;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      const double below = k == 0 ? sorted[0] - 1.0 : sorted[k - 1];
      best = std::max(best, f1_at(p.scores, p.positive, below));
    }
    CHECK(b.f1 == doctest::Approx(best).epsilon(1e-14));

    // Dense grid over the score range.
    const double lo = sorted.front(), hi = sorted.back();
    for (int g = 0; g <= 1000; ++g) {
      const double theta = lo - 1e-9 + (hi - lo + 2e-9) * g / 1000.0;
      CHECK(f1_at(p.scores, p.positive, theta) <= b.f1 + 1e-12);
    }
  }
}

TEST_CASE("ties in F1 go to the smaller threshold") {
  const auto b = binary({0.9, 0.1}, {true, true});
  CHECK(b.f1 == 1.0);
  CHECK(b.epsilon < 0.1);
  const auto c = binary({0.7, 0.6, 0.5, 0.4}, {true, false, false, true});
  // {0.7}: 2/3, all: 2/3; the smaller threshold wins.
  CHECK(c.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(c.epsilon < 0.4);
}

TEST_CASE("multi-mark calibration") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<std::vector<double>> scores;
  std::vector<MarkId> labels;
  for (int i = 0; i < 300; ++i) {
    const MarkId y = i % 7 == 0 ? 2 : i % 3 == 0 ? 1 : 0;
    std::vector<double> r{u(rng), u(rng), u(rng), u(rng)};
    r[static_cast<std::size_t>(y)] += 1.0;
    scores.push_back(r);
    labels.push_back(y);
  }
  const auto table = calibrate(scores, labels, {0.5, 0.3, 0.15, 0.05});
  CHECK_NOTHROW(table.check());
  for (MarkId m = 0; m < 3; ++m) {
    std::vector<double> s;
    std::vector<bool> y;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      s.push_back(scores[i][static_cast<std::size_t>(m)]);
      y.push_back(labels[i] == m);
    }
    const auto b = binary(s, y);
    CHECK(table.epsilon[static_cast<std::size_t>(m)] == b.epsilon);
    CHECK(table.f1[static_cast<std::size_t>(m)] == b.f1);
  }
  // Mark 3 never occurs.
  CHECK(std::isinf(table.epsilon[3]));
  CHECK(table.f1[3] == 0.0);

  std::vector<MarkId> bad{0, 5};
  std::vector<std::vector<double>> two(scores.begin(), scores.begin() + 2);
  CHECK_THROWS_AS(calibrate(two, bad, {0.5, 0.3, 0.15, 0.05}), DataError);
}

TEST_CASE("predict_mark") {
  auto t = ThresholdTable::zero({0.5, 0.5});
  t.epsilon = {0.5, 0.0};
  const std::vector<double> r{1.2, 0.8};
  CHECK(predict_mark(r, t) == 1);

  const std::vector<double> pm{0.2, 0.5, 0.3};
  CHECK(predict_mark_plain(pm) == 1);
  CHECK(predict_mark_plain(std::vector<double>{0.5, 0.5}) == 0);
  CHECK(predict_mark_plain(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == 0);

  // Shift invariance and equivalence with the plain argmax.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<double> uniform(4, 0.25);
  auto zero = ThresholdTable::zero(uniform);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> p(4);
    for (double& v : p) v = u(rng);
    CHECK(predict_mark(ratios(p, uniform), zero) == predict_mark_plain(p));

    auto table = ThresholdTable::zero({0.4, 0.3, 0.2, 0.1});
    for (double& e : table.epsilon) e = u(rng);
    const MarkId base = predict_mark(p, table);
    auto shifted = table;
    for (double& e : shifted.epsilon) e += 0.375;
    CHECK(predict_mark(p, shifted) == base);
  }

  // Unusable marks are skipped; all unusable is an error.
  auto holey = ThresholdTable::zero({0.5, 0.0, 0.5});
  CHECK_FALSE(holey.usable[1]);
  CHECK(predict_mark(std::vector<double>{0.1, 9.0, 0.2}, holey) == 2);
  holey.usable = {false, false, false};
  CHECK_THROWS_AS(predict_mark(std::vector<double>{0.1, 9.0, 0.2}, holey), DataError);
}

TEST_CASE("raising a threshold never adds predictions of that mark") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<std::vector<double>> rs(400, std::vector<double>(3));
  for (auto& r : rs)
    for (double& v : r) v = u(rng);
  auto table = ThresholdTable::zero({0.6, 0.3, 0.1});
  long prev = static_cast<long>(rs.size()) + 1;
  for (double e = -2.0; e <= 2.5; e += 0.05) {
    table.epsilon[1] = e;
    long count = 0;
    for (const auto& r : rs) count += predict_mark(r, table) == 1;
    CHECK(count <= prev);
    prev = count;
  }
  CHECK(prev == 0);
}

TEST_CASE("JSON round trip") {
  auto t = ThresholdTable::zero({0.5, 0.0, 0.25, 0.25});
  t.epsilon = {0.125, std::numeric_limits<double>::infinity(), -0.3, 1.0 / 3.0};
  t.f1 = {0.5, 0.0, 0.75, 1.0 / 7.0};
  const auto text = thresholds_to_json(t);
  CHECK(text.find("\"prior\"") != std::string::npos);
  CHECK(text.find("\"epsilon\"") != std::string::npos);
  CHECK(text.find("\"f1\"") != std::string::npos);
  const auto back = thresholds_from_json(text);
  CHECK(back.prior == t.prior);
  CHECK(back.f1 == t.f1);
  CHECK(back.usable == t.usable);
  CHECK(back.epsilon[0] == t.epsilon[0]);
  CHECK(std::isinf(back.epsilon[1]));
  CHECK(back.epsilon[3] == t.epsilon[3]);

  const auto dir = ifnmtpp::testing::scratch_dir("thresholds");
  save_thresholds(t, (dir / "t.json").string());
  CHECK(load_thresholds((dir / "t.json").string()).epsilon[2] == -0.3);
  CHECK_THROWS(thresholds_from_json("{\"prior\": [1.0]}"));
  CHECK_THROWS(load_thresholds((dir / "missing.json").string()));
}
