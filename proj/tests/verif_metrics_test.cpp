#include <gtest/gtest.h>

#include <cmath>

#include "kvc/verif_metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace kvc {
namespace {

using V = std::vector<double>;

TEST(Sweep, HandCountedExamples) {
  const auto c = sweep(V{0.9}, V{0.1});
  const auto at = [](const SweepCurve& c, double t) {
    for (const auto& q : c)
      if (q.threshold >= t) return q;
    return c.back();
  };
  // Between two sweep points the rates equal those of the upper point.
  EXPECT_EQ(at(c, 0.5).fmr, 0.0);
  EXPECT_EQ(at(c, 0.5).fnmr, 0.0);
  const auto d = sweep(V{0.3, 0.7}, V{0.2, 0.6});
  EXPECT_EQ(at(d, 0.5).fmr, 0.5);
  EXPECT_EQ(at(d, 0.5).fnmr, 0.5);
  EXPECT_EQ(accuracy_at(V{0.3, 0.7}, V{0.2, 0.6}, 0.5), 0.5);
}

TEST(Sweep, MonotoneWithSentinels) {
  SplitMix64 rng(1);
  const auto g = testing::random_scores(rng, 1000, false);
  const auto i = testing::random_scores(rng, 1000, true);
  const auto c = sweep(g, i);
  EXPECT_EQ(c.front().fmr, 1.0);
  EXPECT_EQ(c.front().fnmr, 0.0);
  EXPECT_EQ(c.back().fmr, 0.0);
  EXPECT_EQ(c.back().fnmr, 1.0);
  for (std::size_t k = 1; k < c.size(); ++k) {
    EXPECT_LT(c[k - 1].threshold, c[k].threshold);
    EXPECT_LE(c[k].fmr, c[k - 1].fmr);
    EXPECT_GE(c[k].fnmr, c[k - 1].fnmr);
  }
  const auto o = oracle::curve(g, i);
  ASSERT_EQ(o.size(), c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    EXPECT_EQ(o[k].t, c[k].threshold);
    EXPECT_EQ(o[k].fmr, c[k].fmr);
    EXPECT_EQ(o[k].fnmr, c[k].fnmr);
  }
}

TEST(Sweep, EmptyInputRejected) {
  EXPECT_THROW(sweep(V{}, V{0.1}), Error);
  EXPECT_THROW(eer(V{0.1}, V{}), Error);
  EXPECT_THROW(auc(V{}, V{0.1}), Error);
}

TEST(Eer, Examples) {
  EXPECT_EQ(eer(V{0.8, 0.9}, V{0.1, 0.2}).rate, 0.0);
  EXPECT_EQ(eer(V{0.3, 0.7}, V{0.2, 0.6}).rate, 0.5);
  const V same{0.1, 0.4, 0.4, 0.9};
  EXPECT_EQ(eer(same, same).rate, 0.5);
}

TEST(Eer, InterpolatesWhenNoExactCrossing) {
  // FMR steps by 1/3 and FNMR by 1/2, so no sweep point has FMR == FNMR.
  const V g{0.5, 0.9}, i{0.1, 0.6, 0.7};
  const auto e = eer(g, i);
  EXPECT_NEAR(e.rate, oracle::eer(g, i), 1e-12);
  EXPECT_GT(e.rate, 0.0);
  EXPECT_LT(e.rate, 1.0);
}

TEST(FnmrAtFmr, Examples) {
  EXPECT_EQ(fnmr_at_fmr(V{1, 1, 1}, V{0, 0, 0}, 0.01), 0.0);
  // 10 impostors: FMR = 10% is reached exactly at the 9th impostor score.
  V imp, gen;
  for (int k = 0; k < 10; ++k) imp.push_back(0.05 * k);
  for (int k = 0; k < 10; ++k) gen.push_back(0.3 + 0.05 * k);
  const auto c = sweep(gen, imp);
  EXPECT_EQ(threshold_at_fmr(c, 0.10), 0.45);
  // 90% of impostors rejected at 0.45; genuine scores below it: 0.3..0.40 -> 3 of 10.
  EXPECT_NEAR(fnmr_at_fmr(gen, imp, 0.10), 0.3, 1e-15);
  EXPECT_THROW(fnmr_at_fmr(gen, imp, 0.0), Error);
  EXPECT_THROW(fnmr_at_fmr(gen, imp, 1.0), Error);
}

TEST(FnmrAtFmr, UniformRanksMatchBruteForce) {
  V imp, gen;
  for (int k = 0; k < 100; ++k) imp.push_back(k / 100.0);
  for (int k = 0; k < 100; ++k) gen.push_back(std::min(1.0, k / 100.0 + 0.3));
  for (const double x : {0.01, 0.05, 0.10, 0.333})
    EXPECT_NEAR(fnmr_at_fmr(gen, imp, x), oracle::fnmr_at_fmr(gen, imp, x), 1e-9);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(V{0.9, 0.8}, V{0.1, 0.2}), 1.0);
  EXPECT_EQ(auc(V{0.8, 0.6}, V{0.7, 0.1}), 0.75);
  const V same{0.1, 0.5, 0.5};
  EXPECT_EQ(auc(same, same), 0.5);
}

TEST(Auc, TrapezoidMatchesPairStatistic) {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing::random_scores(rng, 300, trial % 2 == 0);
    const auto i = testing::random_scores(rng, 300, trial % 3 == 0);
    EXPECT_NEAR(roc_area(sweep(g, i)), auc(g, i), 1e-9);
    EXPECT_NEAR(auc(g, i), oracle::auc(g, i), 1e-12);
  }
}

TEST(Accuracy, BalancedTieFreeIdentity) {
  SplitMix64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing::random_scores(rng, 200, false);
    const auto i = testing::random_scores(rng, 200, false);
    const auto e = eer(g, i);
    EXPECT_NEAR(accuracy_at(g, i, e.threshold), 1.0 - e.rate, 1e-15);
  }
  EXPECT_EQ(accuracy_at(V{0.9, 0.8}, V{0.1, 0.2}, 0.5), 1.0);
}

TEST(Rank, Examples) {
  SubjectScoreProfile p;
  p.genuine.fill(1.0);
  p.similar_impostor.fill(0.4);
  p.dissimilar_impostor.fill(0.2);
  EXPECT_EQ(rank_n(p, 1), 1.0);
  p.genuine[3] = 0.1;
  EXPECT_DOUBLE_EQ(rank_n(p, 1), 0.9);
  // A tie with an impostor loses.
  p.genuine[4] = 0.4;
  EXPECT_DOUBLE_EQ(rank_n(p, 1), 0.8);
  EXPECT_DOUBLE_EQ(rank_n(p, 11), 0.9);
  EXPECT_DOUBLE_EQ(rank_n(p, 21), 1.0);
}

TEST(Rank, MatchesSortingOracle) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = testing::random_scores(rng, 10, true);
    const auto i = testing::random_scores(rng, 20, true);
    for (const std::size_t n : {1u, 2u, 5u})
      EXPECT_EQ(rank_n(g, i, n), oracle::rank_n(g, i, n));
  }
}

TEST(Oracle, RandomPairsWithinTolerance) {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const auto ng = 10 + rng.below(200), ni = 10 + rng.below(200);
    const bool coarse = trial % 2 == 1;
    const auto g = testing::random_scores(rng, ng, coarse);
    const auto i = testing::random_scores(rng, ni, coarse);
    const auto r = evaluate_global(g, i);
    EXPECT_NEAR(*r.eer, oracle::eer(g, i), 1e-9);
    EXPECT_NEAR(*r.fnmr_at_fmr_1, oracle::fnmr_at_fmr(g, i, 0.01), 1e-9);
    EXPECT_NEAR(*r.fnmr_at_fmr_10, oracle::fnmr_at_fmr(g, i, 0.10), 1e-9);
    EXPECT_NEAR(*r.auc, oracle::auc(g, i), 1e-9);
    EXPECT_NEAR(*r.accuracy, oracle::accuracy(g, i, *r.eer_threshold), 1e-9);
  }
}

TEST(Invariance, StrictlyIncreasingTransform) {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = testing::random_scores(rng, 50, trial % 2 == 0);
    auto i = testing::random_scores(rng, 80, trial % 2 == 0);
    const auto before = evaluate_global(g, i);
    const double r1 = rank_n(g, i, 1);
    for (auto* v : {&g, &i})
      for (auto& s : *v) s = std::sqrt(s);
    const auto after = evaluate_global(g, i);
    EXPECT_EQ(*before.eer, *after.eer);
    EXPECT_EQ(*before.auc, *after.auc);
    EXPECT_EQ(*before.fnmr_at_fmr_1, *after.fnmr_at_fmr_1);
    EXPECT_EQ(r1, rank_n(g, i, 1));
  }
}

SubjectScoreProfile random_profile(SplitMix64& rng, const std::string& id) {
  SubjectScoreProfile p;
  p.subject_id = id;
  for (auto& s : p.genuine) s = 0.3 + 0.7 * rng.uniform();
  for (auto& s : p.similar_impostor) s = 0.7 * rng.uniform();
  for (auto& s : p.dissimilar_impostor) s = 0.6 * rng.uniform();
  return p;
}

TEST(Modes, SingleSubjectGlobalEqualsPerSubject) {
  SplitMix64 rng(3);
  const std::vector<SubjectScoreProfile> one{random_profile(rng, "a")};
  EXPECT_EQ(*evaluate_global(one).eer, *evaluate_per_subject(one).eer);
  EXPECT_EQ(*evaluate_global(one).auc, *evaluate_per_subject(one).auc);
}

TEST(Modes, PerSubjectMeansMatchLoop) {
  SplitMix64 rng(4);
  std::vector<SubjectScoreProfile> profiles;
  for (int k = 0; k < 300; ++k) profiles.push_back(random_profile(rng, "s" + std::to_string(k)));
  const auto r = evaluate_per_subject(profiles, 3);
  double e = 0, a = 0, r1 = 0;
  for (const auto& p : profiles) {
    const auto imp = p.impostors();
    e += oracle::eer(p.genuine, imp);
    a += oracle::auc(p.genuine, imp);
    r1 += oracle::rank_n(p.genuine, imp, 1);
  }
  const double n = static_cast<double>(profiles.size());
  EXPECT_NEAR(*r.eer, e / n, 1e-12);
  EXPECT_NEAR(*r.auc, a / n, 1e-12);
  EXPECT_NEAR(*r.rank1, r1 / n, 1e-12);
  EXPECT_FALSE(r.fnmr_at_fmr_1.has_value());
  EXPECT_FALSE(r.fnmr_at_fmr_10.has_value());
  // Thread count does not change the result.
  const auto single = evaluate_per_subject(profiles, 1);
  EXPECT_EQ(single.to_json().dump(), r.to_json().dump());
}

TEST(Modes, SeparableSubjects) {
  std::vector<SubjectScoreProfile> profiles(5);
  for (auto& p : profiles) {
    p.genuine.fill(0.9);
    p.similar_impostor.fill(0.3);
    p.dissimilar_impostor.fill(0.1);
  }
  const auto r = evaluate_per_subject(profiles);
  EXPECT_EQ(*r.eer, 0.0);
  EXPECT_EQ(*r.rank1, 1.0);
}

TEST(Modes, DegenerateHalfScores) {
  std::vector<SubjectScoreProfile> profiles(3);
  for (auto& p : profiles) {
    p.genuine.fill(0.5);
    p.similar_impostor.fill(0.5);
    p.dissimilar_impostor.fill(0.5);
  }
  const auto r = evaluate_global(profiles);
  EXPECT_EQ(*r.eer, 0.5);
  EXPECT_EQ(*r.auc, 0.5);
}

TEST(Modes, TwoSubjectHandPooled) {
  SplitMix64 rng(12);
  const std::vector<SubjectScoreProfile> two{random_profile(rng, "a"), random_profile(rng, "b")};
  V g, i;
  for (const auto& p : two) {
    g.insert(g.end(), p.genuine.begin(), p.genuine.end());
    const auto imp = p.impostors();
    i.insert(i.end(), imp.begin(), imp.end());
  }
  const auto r = evaluate_global(two);
  EXPECT_NEAR(*r.eer, oracle::eer(g, i), 1e-12);
  EXPECT_EQ(*r.auc, oracle::auc(g, i));
}

TEST(Report, JsonFieldsAndNulls) {
  SplitMix64 rng(2);
  const std::vector<SubjectScoreProfile> ps{random_profile(rng, "a"), random_profile(rng, "b")};
  const auto g = evaluate_global(ps).to_json();
  std::vector<std::string> keys;
  for (const auto& [k, v] : g.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"eer", "eer_threshold", "fnmr_at_fmr_1", "fnmr_at_fmr_10", "auc",
                                            "accuracy", "rank1", "mode"}));
  EXPECT_TRUE(g["rank1"].is_null());
  EXPECT_EQ(g["mode"], "global");
  const auto p = evaluate_per_subject(ps).to_json();
  EXPECT_TRUE(p["fnmr_at_fmr_1"].is_null());
  EXPECT_EQ(p["mode"], "mean_per_subject");
}

TEST(Curves, FilesAndIdentities) {
  PooledScores s;
  s.genuine = {0.91, 0.95, 0.99};
  s.similar_impostor = {0.31, 0.35};
  s.dissimilar_impostor = {0.05, 0.11};
  testing::TempDir dir;
  const auto data = emit_curves(s, CurvePaths::in(dir.path()));
  for (const auto* name : {"det.csv", "roc.csv", "histogram.csv", "markers.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  // Separable: no bin holds both genuine and impostor scores.
  for (std::size_t b = 0; b < kHistogramBins; ++b)
    EXPECT_FALSE(data.histogram[0][b] > 0 && (data.histogram[1][b] + data.histogram[2][b]) > 0);
  // The top bin is closed on the right.
  EXPECT_EQ(data.histogram[0][kHistogramBins - 1], 1u);
  EXPECT_EQ(histogram_bin(1.0), kHistogramBins - 1);
  const auto hist = text::read_file(dir / "histogram.csv");
  EXPECT_EQ(hist.substr(0, hist.find('\n')), "bin_low,bin_high,genuine,similar_impostor,dissimilar_impostor");
  ASSERT_EQ(data.markers.size(), 3u);
  EXPECT_EQ(data.markers[0].name, "eer");
  EXPECT_EQ(data.markers[1].name, "fmr_1pct");
  EXPECT_EQ(data.markers[2].name, "fmr_10pct");
}

TEST(Curves, RocRowsIntegrateToAuc) {
  SplitMix64 rng(8);
  PooledScores s;
  s.genuine = testing::random_scores(rng, 400, false);
  for (auto& v : s.genuine) v = std::sqrt(v);
  s.similar_impostor = testing::random_scores(rng, 200, false);
  s.dissimilar_impostor = testing::random_scores(rng, 200, true);
  testing::TempDir dir;
  emit_curves(s, CurvePaths::in(dir.path()));
  const auto roc = text::read_file(dir / "roc.csv");
  text::LineReader reader(roc);
  std::string_view line;
  reader.next(line);
  EXPECT_EQ(line, "fmr,tmr");
  std::vector<std::pair<double, double>> pts;
  std::vector<std::string_view> f;
  while (reader.next(line)) {
    if (line.empty()) continue;
    text::split(line, f);
    pts.push_back({*text::parse_double(f[0]), *text::parse_double(f[1])});
  }
  double area = 0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k)
    area += (pts[k].first - pts[k + 1].first) * (pts[k].second + pts[k + 1].second) / 2;
  EXPECT_NEAR(area, auc(s.genuine, s.impostor()), 1e-6);

  const auto det = text::read_file(dir / "det.csv");
  EXPECT_EQ(det.substr(0, det.find('\n')), "threshold,fmr,fnmr");
}

}  // namespace
}  // namespace kvc
