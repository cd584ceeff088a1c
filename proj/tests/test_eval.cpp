#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "fraudkit/error.hpp"
#include "fraudkit/eval.hpp"
#include "fraudkit/rng.hpp"
#include "oracles.hpp"

using namespace fraudkit;
using namespace fraudkit::eval;

TEST_CASE("confusion examples") {
  CHECK(confusion({1, 1, 0, 0}, {1, 0, 0, 1}) == ConfusionMatrix{1, 1, 1, 1});
  const auto same = confusion({1, 0, 0, 1, 0}, {1, 0, 0, 1, 0});
  CHECK(same.fp == 0);
  CHECK(same.fn == 0);
  CHECK(same.total() == 5);
  const auto miss = confusion({1, 1, 1}, {0, 0, 0});
  CHECK(miss.tp == 0);
  CHECK(miss.fn == 3);
  CHECK_THROWS_AS(confusion({1, 0}, {1}), Error);
  CHECK_THROWS_AS(confusion({2}, {1}), Error);
}

TEST_CASE("summarize examples") {
  auto s = summarize({.tp = 9, .fp = 1, .tn = 89, .fn = 1});
  CHECK(s.accuracy == doctest::Approx(0.98));
  CHECK(s.precision == doctest::Approx(0.9));
  CHECK(s.recall == doctest::Approx(0.9));
  CHECK(s.f1 == doctest::Approx(0.9));

  s = summarize({.tp = 0, .fp = 0, .tn = 5, .fn = 2});
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f1 == 0.0);

  s = summarize({.tp = 3, .fp = 0, .tn = 4, .fn = 0});
  CHECK(s.accuracy == 1.0);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 1.0);
  CHECK(s.f1 == 1.0);

  CHECK_THROWS_AS(summarize({}), Error);
}

TEST_CASE("roc examples") {
  auto c = roc_curve({1, 0}, {0.9, 0.1});
  CHECK(std::isinf(c.points.front().threshold));
  CHECK(c.points.front().fpr == 0.0);
  CHECK(c.points.front().tpr == 0.0);
  CHECK(c.points[1] == RocPoint{0.9, 0.0, 1.0});
  CHECK(c.points.back().fpr == 1.0);
  CHECK(c.points.back().tpr == 1.0);
  CHECK(auc(c) == 1.0);

  c = roc_curve({1, 0, 1, 0}, {0.3, 0.3, 0.3, 0.3});
  CHECK(c.points.size() == 2);
  CHECK(auc(c) == 0.5);

  c = roc_curve({1, 0, 1, 0}, {0.8, 0.7, 0.6, 0.1});
  CHECK(auc(c) == doctest::Approx(0.75));
  CHECK(c.points.size() == 5);

  CHECK_THROWS_AS(roc_curve({1, 1}, {0.1, 0.2}), Error);
  CHECK_THROWS_AS(roc_curve({1, 0}, {0.1}), Error);
}

TEST_CASE("auc equals pair counting on random instances") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(499);
    std::vector<Label> y(n);
    std::vector<double> s(n);
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform() < 0.3 ? 1 : 0;
      s[i] = coarse ? static_cast<double>(rng.below(6)) / 5.0 : rng.uniform() + 0.3 * y[i];
    }
    y[0] = 0;
    y[1] = 1;
    const auto curve = roc_curve(y, s);
    const double a = auc(curve);
    CHECK(std::abs(a - oracle::pair_auc(y, s)) <= 1e-9);

    for (std::size_t p = 1; p < curve.points.size(); ++p) {
      CHECK(curve.points[p].fpr >= curve.points[p - 1].fpr);
      CHECK(curve.points[p].tpr >= curve.points[p - 1].tpr);
      CHECK(curve.points[p].threshold < curve.points[p - 1].threshold);
    }

    std::vector<double> transformed(n);
    for (std::size_t i = 0; i < n; ++i) transformed[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(std::abs(auc(roc_curve(y, transformed)) - a) <= 1e-9);

    std::vector<Label> flipped(n);
    std::vector<double> negated(n);
    for (std::size_t i = 0; i < n; ++i) {
      flipped[i] = 1 - y[i];
      negated[i] = -s[i];
    }
    CHECK(std::abs(auc(roc_curve(flipped, negated)) - a) <= 1e-9);
    CHECK(std::abs(auc(roc_curve(flipped, s)) - (1.0 - a)) <= 1e-9);
  }
}

TEST_CASE("summarize accuracy equals direct agreement rate") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    std::vector<Label> t(n), p(n);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = rng.uniform() < 0.2 ? 1 : 0;
      p[i] = rng.uniform() < 0.3 ? 1 : 0;
      agree += t[i] == p[i];
    }
    const auto cm = confusion(t, p);
    CHECK(cm.total() == n);
    const auto s = summarize(cm);
    CHECK(std::abs(s.accuracy - static_cast<double>(agree) / static_cast<double>(n)) <= 1e-12);
    if (cm.tp + cm.fp > 0) CHECK(std::abs(s.precision - double(cm.tp) / double(cm.tp + cm.fp)) <= 1e-12);
    if (cm.tp + cm.fn > 0) CHECK(std::abs(s.recall - double(cm.tp) / double(cm.tp + cm.fn)) <= 1e-12);
  }
}

TEST_CASE("roc csv round trip is exact") {
  Rng rng(10);
  std::vector<Label> y(300);
  std::vector<double> s(300);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = i % 7 == 0 ? 1 : 0;
    s[i] = rng.uniform() / 3.0;
  }
  const auto curve = roc_curve(y, s);
  const auto path = std::filesystem::temp_directory_path() / "fraudkit_roc.csv";
  write_roc_csv(curve, path);
  const auto back = read_roc_csv(path);
  REQUIRE(back.points.size() == curve.points.size());
  CHECK(std::isinf(back.points.front().threshold));
  for (std::size_t i = 1; i < curve.points.size(); ++i) CHECK(back.points[i] == curve.points[i]);
  CHECK(auc(back) == auc(curve));
}
