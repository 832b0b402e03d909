#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "cube3d/metrics/report.hpp"
#include "oracles.hpp"
#include "reference_rows.hpp"
#include "test_helpers.hpp"

using namespace cube3d;
using namespace cube3d::metrics;

namespace {

struct Sample {
  std::vector<std::size_t> truth;
  std::vector<std::vector<double>> scores;
};

Sample random_sample(std::size_t n, std::size_t classes, std::uint64_t seed, int levels = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    s.truth.push_back(rng() % classes);
    std::vector<double> row(classes);
    double sum = 0.0;
    for (auto& v : row) {
      v = levels ? static_cast<double>(rng() % levels) + 0.5 : u(rng);
      sum += v;
    }
    for (auto& v : row) v /= sum;
    s.scores.push_back(std::move(row));
  }
  return s;
}

}  // namespace

TEST(Confusion, PerfectPredictionsGiveIdentity) {
  const std::vector<std::size_t> y{0, 1, 2, 3, 2, 1, 0};
  const auto cm = confusion_matrix(y, y, 4);
  const auto n = cm.normalized();
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(n[t][p], t == p ? 1.0 : 0.0);
  EXPECT_EQ(average_accuracy(cm), 1.0);
}

TEST(Confusion, ThreeSampleRow) {
  const auto cm = confusion_matrix(std::vector<std::size_t>{0, 0, 0}, std::vector<std::size_t>{0, 0, 1}, 2);
  const auto n = cm.normalized();
  EXPECT_DOUBLE_EQ(n[0][0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(n[0][1], 1.0 / 3.0);
  EXPECT_EQ(n[1][0], 0.0);
  EXPECT_EQ(n[1][1], 0.0);
  EXPECT_FALSE(cm.has_support()[1]);
  EXPECT_DOUBLE_EQ(average_accuracy(cm), 2.0 / 3.0);
}

TEST(Confusion, Errors) {
  const std::vector<std::size_t> a{0, 1}, b{0}, c{0, 5};
  expect_error_kind([&] { confusion_matrix(a, b, 2); }, ErrorKind::validation);
  expect_error_kind([&] { confusion_matrix(a, c, 2); }, ErrorKind::validation);
}

TEST(Confusion, NormalizedRowsSumToOne) {
  const Sample s = random_sample(300, 6, 1);
  std::vector<std::size_t> pred;
  for (const auto& r : s.scores) pred.push_back(argmax(r));
  const auto cm = confusion_matrix(s.truth, pred, 6);
  std::uint64_t total = 0;
  for (auto v : cm.counts) total += v;
  EXPECT_EQ(total, 300u);
  for (const auto& row : cm.normalized()) {
    double sum = 0.0;
    for (double v : row) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Confusion, ReferenceDiagonalAveragesTo452) {
  EXPECT_NEAR(average_accuracy(kReferenceRows), 0.452, 1e-3);
  double sum = 0.0;
  for (std::size_t c = 0; c < 14; ++c) sum += kReferenceRows[c][c];
  EXPECT_DOUBLE_EQ(average_accuracy(kReferenceRows), sum / 14.0);
}

TEST(Prf, IdentityIsAllOnes) {
  const std::vector<std::size_t> y{0, 1, 2, 0, 1, 2};
  const auto s = precision_recall_f1(confusion_matrix(y, y, 3));
  for (const auto& k : s.per_class) {
    EXPECT_EQ(k.precision, 1.0);
    EXPECT_EQ(k.recall, 1.0);
    EXPECT_EQ(k.f1, 1.0);
  }
  EXPECT_EQ(s.mean_f1, 1.0);
}

TEST(Prf, HarmonicMeanOfReferenceAbuseRow) {
  // Standard F1 for P = 0.81, R = 0.62; the reference table prints 0.73.
  EXPECT_NEAR(harmonic_f1(0.81, 0.62), 0.702, 1e-3);
  EXPECT_NEAR(harmonic_f1(0.81, 0.62), 2 * 0.81 * 0.62 / 1.43, 1e-15);
}

TEST(Prf, HandCountedMatrix) {
  // truth/pred pairs: (0,0)x3 (0,1)x1 (1,1)x2 (1,0)x2 (2,0)x1
  const std::vector<std::size_t> t{0, 0, 0, 0, 1, 1, 1, 1, 2}, p{0, 0, 0, 1, 1, 1, 0, 0, 0};
  const auto s = precision_recall_f1(confusion_matrix(t, p, 3));
  EXPECT_DOUBLE_EQ(s.per_class[0].precision, 3.0 / 6.0);
  EXPECT_DOUBLE_EQ(s.per_class[0].recall, 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(s.per_class[1].precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.per_class[1].recall, 2.0 / 4.0);
  EXPECT_EQ(s.per_class[2].precision, 0.0);
  EXPECT_FALSE(s.per_class[2].precision_defined);
  EXPECT_TRUE(s.per_class[2].recall_defined);
  EXPECT_DOUBLE_EQ(s.mean_precision, (0.5 + 2.0 / 3.0 + 0.0) / 3.0);
}

TEST(Prf, AbsentClassIsZeroAndFlagged) {
  const std::vector<std::size_t> y{0, 1, 0, 1};
  const auto s = precision_recall_f1(confusion_matrix(y, y, 3));
  const auto& k = s.per_class[2];
  EXPECT_EQ(k.precision, 0.0);
  EXPECT_EQ(k.recall, 0.0);
  EXPECT_EQ(k.f1, 0.0);
  EXPECT_FALSE(k.precision_defined);
  EXPECT_FALSE(k.recall_defined);
  EXPECT_FALSE(k.f1_defined);
}

TEST(Roc, SeparatedScoresGiveAucOne) {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  const auto c = roc_curve(s, {true, true, false, false});
  EXPECT_EQ(c.auc, 1.0);
  EXPECT_EQ(c.points.front(), (RocPoint{0, 0}));
  EXPECT_EQ(c.points.back(), (RocPoint{1, 1}));
}

TEST(Roc, IdenticalScoresGiveHalf) {
  const std::vector<double> s(10, 0.4);
  const auto c = roc_curve(s, {true, false, true, false, false, true, false, false, false, true});
  EXPECT_EQ(c.auc, 0.5);
  EXPECT_EQ(c.points.size(), 2u);
}

TEST(Roc, UndefinedWithoutBothOutcomes) {
  const std::vector<double> s{0.1, 0.2};
  const auto c = roc_curve(s, {true, true});
  EXPECT_FALSE(c.defined);
  EXPECT_TRUE(c.points.empty());
  expect_error_kind([&] { roc_curve(s, {true}); }, ErrorKind::validation);
}

TEST(Roc, MatchesAllPairsOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % 499;
    const int levels = trial % 2 ? 5 + trial : 0;  // odd trials are tie heavy
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = levels ? static_cast<double>(rng() % levels) : std::uniform_real_distribution<double>(0, 1)(rng);
      pos[i] = rng() % 3 == 0;
    }
    pos[0] = true;
    pos[1] = false;
    EXPECT_NEAR(roc_curve(s, pos).auc, oracle::all_pairs_auc(s, pos), 1e-12) << "trial " << trial;
  }
}

TEST(Roc, CurveIsMonotoneAndInUnitSquare) {
  const Sample s = random_sample(200, 3, 8, 6);
  for (const auto& c : one_vs_rest(s.scores, s.truth, 3)) {
    ASSERT_TRUE(c.defined);
    EXPECT_GE(c.auc, 0.0);
    EXPECT_LE(c.auc, 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GE(c.points[i].fpr, c.points[i - 1].fpr);
      EXPECT_GE(c.points[i].tpr, c.points[i - 1].tpr);
    }
    EXPECT_EQ(c.points.back(), (RocPoint{1, 1}));
  }
}

TEST(Roc, NegatedScoresComplementWithoutTies) {
  std::mt19937_64 rng(9);
  std::vector<double> s(300), neg(300);
  std::vector<bool> pos(300);
  for (std::size_t i = 0; i < 300; ++i) {
    s[i] = std::uniform_real_distribution<double>(0, 1)(rng);
    neg[i] = -s[i];
    pos[i] = rng() % 2;
  }
  EXPECT_NEAR(roc_curve(neg, pos).auc, 1.0 - roc_curve(s, pos).auc, 1e-12);
}

TEST(Auc, PerfectClassifierMicroMacroOne) {
  std::vector<std::size_t> truth;
  std::vector<std::vector<double>> scores;
  for (std::size_t i = 0; i < 20; ++i) {
    truth.push_back(i % 4);
    std::vector<double> row(4, 0.05);
    row[i % 4] = 0.85;
    scores.push_back(row);
  }
  const auto a = micro_macro_auc(scores, truth, 4);
  EXPECT_EQ(a.micro, 1.0);
  EXPECT_EQ(a.macro, 1.0);
}

TEST(Auc, SingleClassInputHasNoMacro) {
  const std::vector<std::size_t> truth{1, 1, 1};
  const std::vector<std::vector<double>> scores{{0.2, 0.8}, {0.6, 0.4}, {0.5, 0.5}};
  expect_error_kind([&] { micro_macro_auc(scores, truth, 2); }, ErrorKind::validation);
}

TEST(Auc, TwoClassHandEnumerable) {
  // Class 0 scores: positives {0.9, 0.6, 0.4}, negatives {0.7, 0.4}.
  const std::vector<std::size_t> truth{0, 0, 0, 1, 1};
  const std::vector<std::vector<double>> scores{{0.9, 0.1}, {0.6, 0.4}, {0.4, 0.6}, {0.7, 0.3}, {0.4, 0.6}};
  const auto a = micro_macro_auc(scores, truth, 2);
  // Pairs for class 0: (0.9 beats both) 2 + (0.6: beats 0.4) 1 + (0.4: ties 0.4) 0.5 = 3.5 / 6.
  // Class 1 mirrors class 0 exactly with complemented scores: also 3.5 / 6.
  EXPECT_NEAR(a.macro, 3.5 / 6.0, 1e-15);
  std::vector<double> pooled;
  std::vector<bool> pos;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 2; ++c) pooled.push_back(scores[i][c]), pos.push_back(truth[i] == c);
  EXPECT_NEAR(a.micro, oracle::all_pairs_auc(pooled, pos), 1e-15);
}

TEST(Auc, MacroBetweenClassExtremes) {
  const Sample s = random_sample(150, 5, 10, 4);
  const auto curves = one_vs_rest(s.scores, s.truth, 5);
  double lo = 1, hi = 0;
  for (const auto& c : curves) lo = std::min(lo, c.auc), hi = std::max(hi, c.auc);
  const double m = macro_auc(curves);
  EXPECT_GE(m, lo);
  EXPECT_LE(m, hi);
}

TEST(Report, PerfectRowsGiveAccuracyOne) {
  std::vector<std::size_t> truth{0, 1, 2, 3};
  std::vector<std::vector<double>> scores{{0.7, 0.1, 0.1, 0.1}, {0.1, 0.7, 0.1, 0.1}, {0.1, 0.1, 0.7, 0.1}, {0.1, 0.1, 0.1, 0.7}};
  const auto r = compute_report(truth, scores, 4);
  EXPECT_EQ(r.average_accuracy, 1.0);
  EXPECT_EQ(r.prf.mean_f1, 1.0);
  EXPECT_EQ(*r.macro_auc, 1.0);
  const auto j = to_json(r);
  EXPECT_EQ(j["average_accuracy"], 1.0);
  EXPECT_EQ(j["classes"][0]["name"], "Abuse");
}

TEST(Report, WritesFiles) {
  TempDir dir;
  const Sample s = random_sample(60, 3, 11);
  auto r = compute_report(s.truth, s.scores, 3);
  write_report(dir.path.string(), r);
  for (const char* f : {"metrics.json", "confusion.csv", "roc_Abuse.csv", "roc_Arrest.csv", "roc_Arson.csv", "roc_micro.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir.path / f)) << f;
  const auto j = nlohmann::json::parse(io::read_file((dir.path / "metrics.json").string()));
  EXPECT_DOUBLE_EQ(j["micro_auc"].get<double>(), r.micro.auc);
  const std::string roc = io::read_file((dir.path / "roc_Abuse.csv").string());
  EXPECT_EQ(roc.rfind("fpr,tpr\n0,0\n", 0), 0u);
}

TEST(Report, UndefinedClassesAreNull) {
  const std::vector<std::size_t> truth{0, 1, 0, 1};
  const std::vector<std::vector<double>> scores{{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.6, 0.3, 0.1}, {0.2, 0.7, 0.1}};
  const auto r = compute_report(truth, scores, 3);
  const auto j = to_json(r);
  EXPECT_TRUE(j["classes"][2]["auc"].is_null());
  EXPECT_FALSE(j["classes"][2]["f1_defined"].get<bool>());
  EXPECT_EQ(*r.macro_auc, 1.0);
}

TEST(Report, VideoMajorityVote) {
  const std::vector<std::string> ids{"a", "a", "a", "b", "b"};
  const std::vector<std::size_t> truth{1, 1, 0, 0, 0};
  const std::vector<std::vector<double>> scores{{0.2, 0.8}, {0.6, 0.4}, {0.3, 0.7}, {0.9, 0.1}, {0.4, 0.6}};
  const auto v = aggregate_by_video(ids, truth, scores, 2);
  EXPECT_EQ(v.video_ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(v.truth, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(v.predicted, (std::vector<std::size_t>{1, 0}));  // b: one vote each, lower index wins
  EXPECT_NEAR(v.scores[0][1], (0.8 + 0.4 + 0.7) / 3.0, 1e-15);
  const auto r = compute_report(v.truth, v.scores, 2, v.predicted, Unit::video);
  EXPECT_EQ(to_json(r)["unit"], "video");
  EXPECT_EQ(r.samples, 2u);
}
