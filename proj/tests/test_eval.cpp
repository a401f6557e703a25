/* Copyright 2026 The openseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "openseg/error.hpp"
#include "openseg/eval.hpp"
#include "oracles.hpp"

using namespace openseg;

namespace {

ErrorKind kind_of(auto&& fn)
{
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::ConfigError;
}

RocCurve auc_of(std::vector<double> known, std::vector<double> unknown)
{
  std::vector<double> s = known;
  s.insert(s.end(), unknown.begin(), unknown.end());
  std::vector<std::uint8_t> u(known.size(), 0);
  u.insert(u.end(), unknown.size(), 1);
  return roc_auc(s, u);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("loco_remap")
{
  LabelMap lab(1, 4);
  lab.values = {0, 1, 2, -1};
  const auto split = loco_remap(lab, 1, 3);
  CHECK(split.unknown_id == 2);
  CHECK(split.eval_labels.values == std::vector<std::int32_t>{0, 2, 1, -1});
  CHECK(split.train_mask.values == std::vector<std::uint8_t>{1, 0, 1, 0});
  CHECK(split.id_map == std::vector<std::int32_t>{0, 2, 1});

  CHECK(kind_of([&] { loco_remap(lab, 7, 5); }) == ErrorKind::BadClass);
  const auto empty = loco_remap(LabelMap(2, 2, -1), 0, 5);
  CHECK(std::all_of(empty.train_mask.values.begin(), empty.train_mask.values.end(), [](auto v) { return v == 0; }));
  CHECK(std::all_of(empty.eval_labels.values.begin(), empty.eval_labels.values.end(), [](auto v) { return v == -1; }));
}

TEST_CASE("loco_logits drops the hidden channel and centres each pixel")
{
  FloatTensor t({3, 1, 2});
  t.data = {0, 1, 10, 11, 20, 21};
  const auto d = loco_logits(t, 1);
  CHECK(d.shape == std::vector<std::size_t>{2, 1, 2});
  CHECK(d.data == std::vector<float>{-10, -10, 10, 10});
  // argmax is unchanged by the centring
  CHECK(d.data[2] > d.data[0]);
}

TEST_CASE("calibrate_threshold order statistics")
{
  std::vector<double> s;
  for (int i = 1; i <= 10; ++i) s.push_back(0.1 * i);
  std::vector<std::uint8_t> u(10, 1);
  const auto c = calibrate_threshold(s, u, 0.3);
  CHECK(c.threshold == s[2]);
  CHECK(c.flagged == 3);
  CHECK(c.achieved_tpr == doctest::Approx(0.3));

  CHECK(calibrate_threshold(s, u, 1.0).threshold == s[9]);

  const std::vector<double> same(7, 0.42);
  const auto t = calibrate_threshold(same, std::vector<std::uint8_t>(7, 1), 0.1);
  CHECK(t.threshold == 0.42);
  CHECK(t.achieved_tpr == 1.0);

  CHECK(kind_of([&] { calibrate_threshold(s, std::vector<std::uint8_t>(10, 0), 0.5); }) == ErrorKind::NoUnknowns);
}

TEST_CASE("calibration is minimal and monotone on random maps")
{
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> level(0, 30);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> s(200);
    std::vector<std::uint8_t> u(200);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = level(gen) / 10.0;
      u[i] = (gen() % 3 == 0) ? 1 : 0;
    }
    u[0] = 1;
    double prev = 0.0;
    for (double tpr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const auto c = calibrate_threshold(s, u, tpr);
      CHECK(c.achieved_tpr >= tpr - 1e-12);
      CHECK(c.achieved_tpr >= prev);
      prev = c.achieved_tpr;
      // Any lower distinct unknown score would miss the target.
      double below = -kInf;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (u[i] && s[i] < c.threshold) below = std::max(below, s[i]);
      if (std::isfinite(below)) {
        double caught = 0, total = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
          total += u[i];
          caught += (u[i] && s[i] <= below) ? 1 : 0;
        }
        CHECK(caught / total < tpr);
      }
    }
  }
}

TEST_CASE("apply_threshold")
{
  ScoreMap s(2, 2);
  s.values = {0.9, 0.2, 0.5, 0.7};
  LabelMap prior(2, 2);
  prior.values = {0, 1, 1, 0};
  CHECK(apply_threshold(s, prior, 0.5, 2).labels.values == std::vector<std::int32_t>{0, 2, 2, 0});
  CHECK(apply_threshold(s, prior, -kInf, 2).labels == prior);
  CHECK(apply_threshold(s, prior, kInf, 2).labels.values == std::vector<std::int32_t>{2, 2, 2, 2});
}

TEST_CASE("roc_auc examples")
{
  CHECK(auc_of({0.9, 0.8, 0.7}, {0.4, 0.3}).auc == 1.0);
  CHECK(auc_of({0.9, 0.4}, {0.5, 0.1}).auc == 0.75);
  CHECK(auc_of({0.5, 0.5, 0.5}, {0.5, 0.5}).auc == 0.5);
  CHECK(kind_of([] { roc_auc(std::vector<double>{1, 2}, std::vector<std::uint8_t>{0, 0}); }) == ErrorKind::SingleClassMask);
  const auto c = auc_of({0.9, 0.4}, {0.5, 0.1});
  CHECK(c.points.front().fpr == 0.0);
  CHECK(c.points.front().tpr == 0.0);
  CHECK(c.points.back().fpr == 1.0);
  CHECK(c.points.back().tpr == 1.0);
}

TEST_CASE("roc_auc: brute force, trapezoid and monotone invariance")
{
  std::mt19937_64 gen(17);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 2 + gen() % 300;
    std::vector<double> s(n);
    std::vector<std::uint8_t> u(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(gen() % 40) / 7.0;
      u[i] = static_cast<std::uint8_t>(gen() % 2);
    }
    u[0] = 0;
    u[1] = 1;
    const auto c = roc_auc(s, u);
    CHECK(std::abs(c.auc - oracle::brute_auc(s, u)) < 1e-12);
    CHECK(std::abs(c.auc - trapezoid_auc(c.points)) < 1e-12);
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(3.0 * s[i]) - 5.0;
    CHECK(roc_auc(e, u).auc == c.auc);
  }
}

TEST_CASE("cohen_kappa")
{
  ConfusionMatrix d(3);
  d(0, 0) = 5;
  d(1, 1) = 2;
  d(2, 2) = 9;
  CHECK(cohen_kappa(d) == 1.0);

  ConfusionMatrix m(2);
  m(0, 0) = 20;
  m(0, 1) = 5;
  m(1, 0) = 10;
  m(1, 1) = 15;
  CHECK(cohen_kappa(m) == doctest::Approx(0.4).epsilon(1e-14));

  // Independent predictions with matched marginals: counts = row * col / n.
  ConfusionMatrix ind(3);
  const std::vector<std::uint64_t> rows{10, 20, 30}, cols{30, 20, 10};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) ind(i, j) = rows[i] * cols[j];
  CHECK(std::abs(cohen_kappa(ind)) < 1e-12);

  ConfusionMatrix single(2);
  single(1, 1) = 4;
  CHECK(cohen_kappa(single) == 1.0);
  CHECK(kind_of([] { cohen_kappa(ConfusionMatrix(3)); }) == ErrorKind::EmptyMatrix);
}

TEST_CASE("evaluate: perfect and closed-set predictions")
{
  LabelMap truth(1, 6);
  truth.values = {0, 0, 1, 2, 2, -1};
  OpenSetPrediction perfect{truth, 2, 0.0, "x"};
  ScoreMap s(1, 6);
  s.values = {0.9, 0.8, 0.7, 0.1, 0.2, 0.0};
  const auto r = evaluate(perfect, truth, s);
  CHECK(r.acc_known == 1.0);
  CHECK(r.pre_unknown == 1.0);
  CHECK(r.kappa == 1.0);
  REQUIRE(r.auc.has_value());
  CHECK(*r.auc == 1.0);

  LabelMap prior(1, 6);
  prior.values = {0, 1, 1, 0, 1, 1};
  const auto closed = evaluate(apply_threshold(s, prior, -kInf, 2), truth, s);
  CHECK(closed.pre_unknown == 0.0);
  CHECK(closed.acc_known == doctest::Approx(2.0 / 3.0));
  CHECK(cohen_kappa(closed.confusion) == closed.kappa);
}

TEST_CASE("evaluate: 3x3 hand example")
{
  LabelMap truth(3, 3);
  truth.values = {0, 0, 1, 1, 2, 2, 0, -1, 2};
  LabelMap pred(3, 3);
  pred.values = {0, 2, 1, 0, 2, 1, 0, 2, 2};
  const auto r = evaluate(OpenSetPrediction{pred, 2, 0.0, "h"}, truth, ScoreMap(3, 3, 0.5));
  // known truths: 0,0,1,1,0 -> correct 0,1,0 = 3 of 5
  CHECK(r.acc_known == doctest::Approx(0.6));
  // flagged: pixels 1,4,8 -> true unknown at 4,8
  CHECK(r.pre_unknown == doctest::Approx(2.0 / 3.0));
  // p_o = 5/8; rows (3,2,3), cols (3,2,3): p_e = (9+4+9)/64
  const double pe = 22.0 / 64.0;
  CHECK(r.kappa == doctest::Approx((0.625 - pe) / (1.0 - pe)).epsilon(1e-14));
  CHECK(r.confusion.total() == 8);
  // known block [[2, 0], [1, 1]]: p_o = 3/4, p_e = (2*3 + 2*1)/16
  REQUIRE(r.kappa_known.has_value());
  CHECK(*r.kappa_known == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(known_block(r.confusion).classes == 2);
}

TEST_CASE("metrics against the brute oracle on random matrices")
{
  std::mt19937_64 gen(23);
  for (int t = 0; t < 100; ++t) {
    const int k = 2 + static_cast<int>(gen() % 5);
    const std::size_t n = 1 + gen() % 400;
    LabelMap truth(1, n), pred(1, n);
    std::vector<int> tv(n), pv(n);
    for (std::size_t i = 0; i < n; ++i) {
      tv[i] = static_cast<int>(gen() % static_cast<std::uint64_t>(k));
      pv[i] = (gen() % 3 == 0) ? tv[i] : static_cast<int>(gen() % static_cast<std::uint64_t>(k));
      truth.values[i] = tv[i];
      pred.values[i] = pv[i];
    }
    EvalReport r;
    r.confusion = confusion(OpenSetPrediction{pred, k - 1, 0.0, ""}, truth);
    fill_metrics(r);
    const auto o = oracle::brute_metrics(tv, pv, k);
    CHECK(std::abs(r.acc_known - o.acc_known) < 1e-12);
    CHECK(std::abs(r.pre_unknown - o.pre_unknown) < 1e-12);
    CHECK(std::abs(r.kappa - o.kappa) < 1e-12);
  }
}
