#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "csigait/io.hpp"
#include "csigait/metrics.hpp"

namespace csigait {
namespace {

ConfusionMatrix from_counts(const std::vector<std::vector<std::size_t>>& m) {
  std::vector<int> t, p;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      for (std::size_t n = 0; n < m[i][j]; ++n) {
        t.push_back(static_cast<int>(i));
        p.push_back(static_cast<int>(j));
      }
  return confusion(t, p, m.size());
}

// Per-class counts straight from the label vectors.
ClassCounts count_directly(const std::vector<int>& t, const std::vector<int>& p, int c) {
  ClassCounts k;
  for (std::size_t n = 0; n < t.size(); ++n) {
    const bool is = t[n] == c, said = p[n] == c;
    if (is && said) ++k.tp;
    else if (!is && said) ++k.fp;
    else if (is && !said) ++k.fn;
    else ++k.tn;
  }
  return k;
}

std::pair<std::vector<int>, std::vector<int>> random_labels(std::size_t n, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> lab(0, k - 1);
  std::bernoulli_distribution right(0.6);
  std::vector<int> t(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = lab(rng);
    p[i] = right(rng) ? t[i] : lab(rng);
  }
  return {t, p};
}

TEST(Accuracy, HandCounts) {
  const std::vector<int> t{0, 0, 1, 2}, p{0, 1, 1, 2}, wrong{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(accuracy(t, p), 0.75);
  EXPECT_DOUBLE_EQ(accuracy(t, t), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(t, wrong), 0.0);
}

TEST(Accuracy, RejectsBadInput) {
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(accuracy(a, b), ParameterError);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), ParameterError);
}

TEST(Confusion, SmallCases) {
  const auto cm = confusion(std::vector<int>{0, 1}, std::vector<int>{1, 0}, 2);
  EXPECT_EQ(cm.counts, (std::vector<std::size_t>{0, 1, 1, 0}));
  const std::vector<int> y{0, 2, 2, 1, 2};
  const auto d = confusion(y, y, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) {
        EXPECT_EQ(d(i, j), 0u);
      }
  EXPECT_EQ(d(0, 0), 1u);
  EXPECT_EQ(d(1, 1), 1u);
  EXPECT_EQ(d(2, 2), 3u);
}

TEST(Confusion, OutOfRangeLabel) {
  EXPECT_THROW(confusion(std::vector<int>{0, 3}, std::vector<int>{0, 1}, 3), ParameterError);
  EXPECT_THROW(confusion(std::vector<int>{0, 1}, std::vector<int>{-1, 1}, 3), ParameterError);
  EXPECT_THROW(confusion(std::vector<int>{0, 1}, std::vector<int>{0}, 3), ParameterError);
}

TEST(Confusion, CountsMatchDirectTally) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto [t, p] = random_labels(seed == 1 ? 500 : 1000, 30, seed);
    const auto cm = confusion(t, p, 30);
    EXPECT_EQ(cm.total(), t.size());
    EXPECT_DOUBLE_EQ(accuracy(t, p), static_cast<double>(cm.trace()) / static_cast<double>(cm.total()));
    for (int c = 0; c < 30; ++c) {
      const auto got = cm.class_counts(static_cast<std::size_t>(c));
      const auto want = count_directly(t, p, c);
      EXPECT_EQ(got.tp, want.tp);
      EXPECT_EQ(got.fp, want.fp);
      EXPECT_EQ(got.fn, want.fn);
      EXPECT_EQ(got.tn, want.tn);
      EXPECT_EQ(got.tp + got.fp + got.fn + got.tn, t.size());
      EXPECT_EQ(cm.row_sum(static_cast<std::size_t>(c)),
                static_cast<std::size_t>(std::count(t.begin(), t.end(), c)));
    }
  }
}

TEST(Report, TwoByTwoHandValues) {
  const auto r = classification_report(from_counts({{2, 1}, {0, 3}}));
  EXPECT_NEAR(r.classes[0].precision, 1.0, 1e-12);
  EXPECT_NEAR(r.classes[0].recall, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.classes[0].f1, 0.8, 1e-12);
  EXPECT_NEAR(r.classes[1].precision, 0.75, 1e-12);
  EXPECT_NEAR(r.classes[1].recall, 1.0, 1e-12);
  EXPECT_NEAR(r.classes[1].f1, 6.0 / 7.0, 1e-12);
  EXPECT_EQ(r.classes[0].support, 3u);
  EXPECT_EQ(r.classes[1].support, 3u);
  EXPECT_NEAR(r.macro_f1, (0.8 + 6.0 / 7.0) / 2, 1e-12);
  EXPECT_FALSE(r.classes[0].undefined);
}

TEST(Report, PerfectDiagonal) {
  const auto r = classification_report(from_counts({{4, 0, 0}, {0, 1, 0}, {0, 0, 7}}));
  for (const auto& c : r.classes) {
    EXPECT_EQ(c.precision, 1.0);
    EXPECT_EQ(c.recall, 1.0);
    EXPECT_EQ(c.f1, 1.0);
  }
  EXPECT_EQ(r.total_support, 12u);
}

TEST(Report, AbsentClassScoresZeroAndIsFlagged) {
  const auto r = classification_report(from_counts({{3, 1, 0}, {2, 2, 0}, {0, 0, 0}}));
  const auto& c = r.classes[2];
  EXPECT_EQ(c.precision, 0.0);
  EXPECT_EQ(c.recall, 0.0);
  EXPECT_EQ(c.f1, 0.0);
  EXPECT_EQ(c.support, 0u);
  EXPECT_TRUE(c.undefined);
  EXPECT_NEAR(r.macro_recall, (0.75 + 0.5 + 0.0) / 3, 1e-12);
}

TEST(Report, RandomCasesFollowFormulasAndBounds) {
  const auto [t, p] = random_labels(1000, 30, 9);
  const auto cm = confusion(t, p, 30);
  const auto r = classification_report(cm);
  std::size_t support = 0;
  for (int c = 0; c < 30; ++c) {
    const auto k = count_directly(t, p, c);
    const auto& s = r.classes[static_cast<std::size_t>(c)];
    const double prec = k.tp + k.fp ? double(k.tp) / double(k.tp + k.fp) : 0.0;
    const double rec = k.tp + k.fn ? double(k.tp) / double(k.tp + k.fn) : 0.0;
    EXPECT_NEAR(s.precision, prec, 1e-12);
    EXPECT_NEAR(s.recall, rec, 1e-12);
    if (prec + rec > 0) {
      EXPECT_NEAR(s.f1, 2 * prec * rec / (prec + rec), 1e-12);
    }
    for (double v : {s.precision, s.recall, s.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(std::min(s.precision, s.recall), s.f1 + 1e-15);
    EXPECT_GE(std::max(s.precision, s.recall), s.f1 - 1e-15);
    if (s.precision != s.recall) {
      EXPECT_LT(std::min(s.precision, s.recall), s.f1);
      EXPECT_GT(std::max(s.precision, s.recall), s.f1);
    }
    support += s.support;
  }
  EXPECT_EQ(support, t.size());
  EXPECT_EQ(r.total_support, t.size());
}

TEST(Report, SampleOrderDoesNotMatter) {
  auto [t, p] = random_labels(400, 7, 4);
  const auto before = classification_report(confusion(t, p, 7));
  std::vector<std::size_t> perm(t.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  std::vector<int> t2, p2;
  for (auto i : perm) {
    t2.push_back(t[i]);
    p2.push_back(p[i]);
  }
  EXPECT_EQ(confusion(t, p, 7).counts, confusion(t2, p2, 7).counts);
  EXPECT_EQ(accuracy(t, p), accuracy(t2, p2));
  const auto after = classification_report(confusion(t2, p2, 7));
  for (std::size_t c = 0; c < 7; ++c) EXPECT_EQ(before.classes[c].f1, after.classes[c].f1);
  EXPECT_EQ(before.macro_f1, after.macro_f1);
}

TEST(MetricsExport, ConfusionCsvAndImage) {
  auto cm = from_counts({{2, 1}, {0, 3}});
  cm.class_names = {"alice", "bob"};
  const auto rows = io::parse_csv(io::confusion_csv(cm));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"true\\pred", "alice", "bob"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"alice", "2", "1"}));
  EXPECT_EQ(rows[2], (std::vector<std::string>{"bob", "0", "3"}));
  const auto img = io::confusion_image(cm);
  EXPECT_EQ(img(0, 0), 170.0);
  EXPECT_EQ(img(0, 1), 85.0);
  EXPECT_EQ(img(1, 1), 255.0);
  const auto pgm = io::encode_pgm(img);
  const auto info = io::pgm_info(pgm);
  EXPECT_EQ(info.width, 2u);
  EXPECT_EQ(info.height, 2u);
  EXPECT_EQ(pgm.size(), std::string("P5\n2 2\n255\n").size() + 4);
}

TEST(MetricsExport, ReportCsvColumns) {
  const auto cm = from_counts({{2, 1, 0}, {0, 3, 0}, {0, 0, 0}});
  const auto rows = io::parse_csv(io::report_csv(classification_report(cm), cm));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"class", "precision", "recall", "f1", "support", "undefined"}));
  EXPECT_EQ(rows[1][0], "0");
  EXPECT_DOUBLE_EQ(std::stod(rows[1][3]), 0.8);
  EXPECT_EQ(rows[3][5], "1");
  EXPECT_EQ(rows[4][0], "macro");
  EXPECT_EQ(rows[4][4], "6");
}

}  // namespace
}  // namespace csigait
