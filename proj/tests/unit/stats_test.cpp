#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "sekg/stats.hpp"
#include "test_util.hpp"

namespace sekg {
namespace {

using Pairs = std::vector<std::pair<std::string, std::string>>;

TEST(Frequency, Examples) {
  EXPECT_EQ(frequency(0, 100), 0.0);
  EXPECT_NEAR(frequency(740, 4242), 0.174446, 5e-7);
  EXPECT_EQ(frequency(100, 100), 1.0);
  EXPECT_THROW(frequency(1, 0), DomainError);
  EXPECT_THROW(frequency(101, 100), DomainError);
  EXPECT_THROW(frequency(-1, 100), DomainError);
}

TEST(LogorTest, SymmetricGroups) {
  const auto t = logor_test(10, 100, 10, 100);
  EXPECT_EQ(t.beta1, 0.0);
  EXPECT_EQ(t.p, 1.0);
  EXPECT_FALSE(t.corrected);
}

// Frozen from an iteratively reweighted GLM fit of the same 2x2 table.
TEST(LogorTest, TwentyOfHundredVersusTenOfHundred) {
  const auto t = logor_test(20, 100, 10, 100);
  EXPECT_NEAR(t.beta0, -2.1972245773362196, 1e-12);
  EXPECT_NEAR(t.beta1, 0.8109302162163288, 1e-8);
  EXPECT_NEAR(t.se, 0.4166666666666667, 1e-8);
  EXPECT_NEAR(t.z, 1.946232518919189, 1e-8);
  EXPECT_NEAR(t.p, 0.05162681534726814, 1e-9);
  EXPECT_EQ(t.p_adjusted, t.p);
}

TEST(LogorTest, ZeroCellUsesHaldaneCorrection) {
  const auto t = logor_test(0, 50, 5, 100);
  EXPECT_TRUE(t.corrected);
  EXPECT_NEAR(t.beta1, -1.7607423615930002, 1e-9);
  EXPECT_NEAR(t.se, 1.487310110973728, 1e-9);
  EXPECT_TRUE(std::isfinite(t.z));
  EXPECT_TRUE(logor_test(50, 50, 5, 100).corrected);
  EXPECT_TRUE(logor_test(5, 50, 100, 100).corrected);
}

TEST(LogorTest, DomainErrors) {
  EXPECT_THROW(logor_test(0, 0, 1, 10), DomainError);
  EXPECT_THROW(logor_test(1, 10, 0, 0), DomainError);
  EXPECT_THROW(logor_test(11, 10, 1, 10), DomainError);
  EXPECT_THROW(logor_test(1, 10, -1, 10), DomainError);
}

TEST(LogorTest, PropertyAntisymmetryAndSign) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t n1 = 2 + static_cast<std::int64_t>(rng() % 500), n0 = 2 + static_cast<std::int64_t>(rng() % 5000);
    const std::int64_t a = 1 + static_cast<std::int64_t>(rng() % (n1 - 1)), b = 1 + static_cast<std::int64_t>(rng() % (n0 - 1));
    const auto t = logor_test(a, n1, b, n0);
    const auto r = logor_test(b, n0, a, n1);
    EXPECT_NEAR(t.beta1, -r.beta1, 1e-12);
    EXPECT_NEAR(t.se, r.se, 1e-12);
    EXPECT_NEAR(t.z, t.beta1 / t.se, 1e-12);
    const double diff = static_cast<double>(a) / n1 - static_cast<double>(b) / n0;
    if (std::abs(diff) > 1e-12) {
      EXPECT_EQ(t.beta1 > 0, diff > 0);
    }
    EXPECT_GE(t.p, 0.0);
    EXPECT_LE(t.p, 1.0);
  }
}

TEST(NormalTail, KnownQuantiles) {
  EXPECT_NEAR(normal_two_sided_p(1.959963984540054), 0.05, 1e-12);
  EXPECT_EQ(normal_two_sided_p(0.0), 1.0);
  EXPECT_EQ(normal_two_sided_p(-2.0), normal_two_sided_p(2.0));
}

TEST(Bonferroni, Examples) {
  EXPECT_EQ(bonferroni(std::vector<double>{0.01}), (std::vector<double>{0.01}));
  const auto five = bonferroni(std::vector<double>{0.01, 0.02, 0.03, 0.04, 0.05});
  const std::vector<double> expected{0.05, 0.10, 0.15, 0.20, 0.25};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(five[i], expected[i], 1e-15);
  EXPECT_EQ(bonferroni(std::vector<double>{0.5, 0.9}), (std::vector<double>{1.0, 1.0}));
  EXPECT_TRUE(bonferroni({}).empty());
  EXPECT_THROW(bonferroni(std::vector<double>{0.5, 1.5}), DomainError);
  EXPECT_THROW(bonferroni(std::vector<double>{-0.1}), DomainError);
  EXPECT_THROW(bonferroni(std::vector<double>{std::nan("")}), DomainError);
}

TEST(Bonferroni, PropertyBoundedAndOrderPreserving) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> ps(1 + rng() % 30);
    for (auto& p : ps) p = u(rng) * u(rng);
    const auto adj = bonferroni(ps);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      EXPECT_GE(adj[i], ps[i]);
      EXPECT_LE(adj[i], 1.0);
      for (std::size_t j = 0; j < ps.size(); ++j) {
        if (ps[i] <= ps[j]) {
          EXPECT_LE(adj[i], adj[j]);
        }
      }
    }
  }
}

TEST(Spearman, Examples) {
  const std::vector<double> up{1, 2, 3, 4}, down{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(spearman(up, up), 1.0);
  EXPECT_DOUBLE_EQ(spearman(up, down), -1.0);
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 2, 4}, std::vector<double>{1, 3, 2, 4}), 0.9486832980505138, 1e-12);
  EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Spearman, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2}, flat{2, 2, 2};
  EXPECT_THROW(spearman(a, b), ArgumentError);
  EXPECT_THROW(spearman(std::vector<double>{1}, std::vector<double>{1}), ArgumentError);
  EXPECT_THROW(spearman(a, flat), DomainError);
  EXPECT_THROW(spearman(a, std::vector<double>{1, std::nan(""), 3}), DomainError);
}

TEST(Spearman, PropertyBoundedAndMonotoneInvariant) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 3 + rng() % 20;
    std::vector<double> xs(n), ys(n);
    for (auto& x : xs) x = static_cast<double>(rng() % 6);
    for (auto& y : ys) y = static_cast<double>(rng() % 6);
    if (std::set(xs.begin(), xs.end()).size() < 2 || std::set(ys.begin(), ys.end()).size() < 2) continue;
    const double rho = spearman(xs, ys);
    EXPECT_GE(rho, -1.0);
    EXPECT_LE(rho, 1.0);
    std::vector<double> tx(n);
    std::transform(xs.begin(), xs.end(), tx.begin(), [](double x) { return std::exp(x) * 3.0 - 7.0; });
    EXPECT_NEAR(spearman(tx, ys), rho, 1e-12);
  }
}

// --- comparison -------------------------------------------------------------

Relation rel(Brand b, std::string effect) {
  Relation r;
  r.medication = b;
  r.side_effect = std::move(effect);
  r.description = "d";
  return r;
}

ExtractedRow row(std::string id, std::vector<Relation> rels) {
  ExtractedRow r;
  r.item.id = std::move(id);
  r.item.text = "t";
  r.relations = std::move(rels);
  return r;
}

std::vector<ExtractedRow> crowd_rows() {
  return {row("r1", {rel(Brand::Ozempic, "Nausea"), rel(Brand::Ozempic, "Nausea"), rel(Brand::Wegovy, "Vomiting")}),
          row("r2", {rel(Brand::Ozempic, "Fatigue")}),
          row("r3", {rel(Brand::Wegovy, "Nausea")}),
          row("r4", {})};
}

std::vector<FaersSummary> registry() {
  return {{"Ozempic", {{"Nausea", 40}, {"Vomiting", 30}, {"Headache", 5}}, 100, "2024Q4"},
          {"Wegovy", {{"Nausea", 10}}, 50, "2024Q4"},
          {"Semaglutide", {}, 20, "2024Q4"}};
}

TEST(RedditCounts, PostsNotRelations) {
  const auto rows = crowd_rows();
  const auto all = reddit_counts(rows);
  EXPECT_EQ(all.total, 3);
  EXPECT_EQ(all.counts, (std::map<std::string, std::int64_t>{{"Fatigue", 1}, {"Nausea", 2}, {"Vomiting", 1}}));
  const auto oz = reddit_counts(rows, Brand::Ozempic);
  EXPECT_EQ(oz.total, 2);
  EXPECT_EQ(oz.counts, (std::map<std::string, std::int64_t>{{"Fatigue", 1}, {"Nausea", 1}}));
  EXPECT_EQ(reddit_counts(rows, Brand::Rybelsus).total, 0);
}

TEST(Compare, EmptyMapReportsEverythingUnmatched) {
  const auto f = registry();
  const auto c = compare(reddit_counts(crowd_rows()), f, MatchMap{});
  EXPECT_TRUE(c.rows.empty());
  EXPECT_EQ(c.unmatched_reddit, (std::vector<std::string>{"Nausea", "Fatigue", "Vomiting"}));
  EXPECT_EQ(c.unmatched_fda, (std::vector<std::string>{"Nausea", "Vomiting", "Headache"}));
}

TEST(Compare, PooledMatchesHandBuiltTables) {
  const auto f = registry();
  const MatchMap map(Pairs{{"Nausea", "Nausea"}, {"Fatigue", "Fatigue"}});
  const auto c = compare(reddit_counts(crowd_rows()), f, map);
  ASSERT_EQ(c.rows.size(), 2u);
  const auto& n = c.rows[0];
  EXPECT_EQ(std::tie(n.a, n.n1, n.b, n.n0), std::make_tuple(2, 3, 50, 170));
  const auto& t = c.rows[1];
  EXPECT_EQ(std::tie(t.a, t.n1, t.b, t.n0), std::make_tuple(1, 3, 0, 170));
  EXPECT_TRUE(t.test.corrected);
  EXPECT_FALSE(n.brand);
  for (const auto& r : c.rows) {
    const auto expect = logor_test(r.a, r.n1, r.b, r.n0);
    EXPECT_EQ(r.test.beta1, expect.beta1);
    EXPECT_EQ(r.test.p_adjusted, std::min(1.0, expect.p * 2));
    EXPECT_EQ(r.freq_reddit, static_cast<double>(r.a) / static_cast<double>(r.n1));
    EXPECT_EQ(r.freq_fda, static_cast<double>(r.b) / static_cast<double>(r.n0));
  }
  EXPECT_EQ(c.unmatched_reddit, (std::vector<std::string>{"Vomiting"}));
  EXPECT_EQ(c.unmatched_fda, (std::vector<std::string>{"Vomiting", "Headache"}));
}

TEST(Compare, BrandRestrictsBothSources) {
  const auto f = registry();
  const MatchMap map(Pairs{{"Nausea", "Nausea"}, {"Fatigue", "Fatigue"}});
  const auto c = compare(reddit_counts(crowd_rows(), Brand::Ozempic), f, map, Brand::Ozempic);
  EXPECT_EQ(std::tie(c.rows[0].a, c.rows[0].n1, c.rows[0].b, c.rows[0].n0), std::make_tuple(1, 2, 40, 100));
  EXPECT_EQ(c.rows[0].brand, Brand::Ozempic);
}

TEST(Compare, UnspecifiedBrandUsesSemaglutideProduct) {
  std::vector<ExtractedRow> rows{row("u", {rel(Brand::UnspecifiedBrands, "Nausea")})};
  const auto f = registry();
  const auto c = compare(reddit_counts(rows, Brand::UnspecifiedBrands), f, MatchMap(Pairs{{"Nausea", "Nausea"}}),
                         Brand::UnspecifiedBrands);
  EXPECT_EQ(c.rows[0].n0, 20);
  EXPECT_EQ(c.rows[0].b, 0);
}

TEST(Compare, MissingProductAndNoPosts) {
  std::vector<FaersSummary> only_oz{registry()[0]};
  const MatchMap map(Pairs{{"Nausea", "Nausea"}});
  EXPECT_THROW(compare(reddit_counts(crowd_rows(), Brand::Wegovy), only_oz, map, Brand::Wegovy), ConfigError);
  const auto f = registry();
  EXPECT_THROW(compare(RedditCounts{}, f, map), DomainError);
}

TEST(MatchMap, DuplicatesAndLoad) {
  EXPECT_THROW(MatchMap(Pairs{{"a", "X"}, {"a", "Y"}}), ConfigError);
  EXPECT_THROW(MatchMap(Pairs{{"a", "X"}, {"b", "X"}}), ConfigError);
  EXPECT_THROW(MatchMap(Pairs{{"", "X"}}), ConfigError);
  testing::TempDir dir;
  std::ofstream(dir / "m.csv") << "reddit_term,fda_pt\nHair Loss, Alopecia\n";
  EXPECT_EQ(MatchMap::load((dir / "m.csv").string()).pairs(),
            (std::vector<std::pair<std::string, std::string>>{{"Hair Loss", "Alopecia"}}));
}

TEST(ComparisonCsv, Format) {
  ComparisonRow r;
  r.reddit_term = "Nausea";
  r.fda_pt = "Nausea";
  r.a = 20;
  r.n1 = 100;
  r.b = 10;
  r.n0 = 100;
  r.freq_reddit = 0.2;
  r.freq_fda = 0.1;
  r.test = logor_test(20, 100, 10, 100);
  std::ostringstream out;
  write_comparison_csv(out, std::vector<ComparisonRow>{r});
  EXPECT_EQ(out.str(),
            "term_pair,brand,a,n1,b,n0,freq_reddit,freq_fda,beta1,se,z,p,p_adjusted,corrected_flag\n"
            "Nausea|Nausea,All,20,100,10,100,0.2,0.1,0.81093,0.416667,1.94623,0.0516268,0.0516268,0\n");
}

// --- evaluation ---------------------------------------------------------------

TEST(Sampling, SizeIsCeiling) {
  EXPECT_EQ(sample_size(4242, 0.05), 213u);
  EXPECT_EQ(sample_size(100, 0.07), 7u);  // 0.07 * 100 rounds up past 7 in binary
  EXPECT_EQ(sample_size(7, 1.0), 7u);
  EXPECT_EQ(sample_size(0, 0.5), 0u);
  EXPECT_EQ(sample_indices(4242, 0.05, 1).size(), 213u);
}

TEST(Sampling, DeterministicDistinctAndSeedDependent) {
  const auto a = sample_indices(4242, 0.05, 42);
  EXPECT_EQ(sample_indices(4242, 0.05, 42), a);
  EXPECT_NE(sample_indices(4242, 0.05, 43), a);
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), a.size());
  for (auto i : a) EXPECT_LT(i, 4242u);
}

TEST(Sampling, FullFractionIsPermutation) {
  auto all = sample_indices(50, 1.0, 7);
  std::vector<std::size_t> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(50);
  std::iota(iota.begin(), iota.end(), 0);
  EXPECT_EQ(sorted, iota);
  EXPECT_NE(all, iota);
}

TEST(Sampling, BadFraction) {
  EXPECT_THROW(sample_indices(10, 0.0, 1), ArgumentError);
  EXPECT_THROW(sample_indices(10, 1.01, 1), ArgumentError);
  const std::vector<int> rows{1, 2, 3, 4};
  EXPECT_EQ(sample_for_eval<int>(rows, 0.5, 3).size(), 2u);
}

TEST(ScoreAnnotations, MajorityVote) {
  const std::vector<AnnotatedRelation> in{{"r1", {1, 1, 0}}, {"r2", {0, 0, 1}}, {"r3", {1, 1, 1}}, {"r4", {0, 1, 0}}};
  const auto s = score_annotations(in, 3);
  EXPECT_EQ(s.per_relation, (std::vector<int>{1, 0, 1, 0}));
  EXPECT_DOUBLE_EQ(s.accuracy, 0.5);
  const std::vector<AnnotatedRelation> unanimous{{"a", {1, 1, 1}}, {"b", {1, 1, 1}}};
  EXPECT_EQ(score_annotations(unanimous, 3).accuracy, 1.0);
  const std::vector<AnnotatedRelation> five{{"a", {1, 0, 1, 0, 1}}};
  EXPECT_EQ(score_annotations(five, 5).per_relation, (std::vector<int>{1}));
}

TEST(ScoreAnnotations, Errors) {
  const std::vector<AnnotatedRelation> ok{{"r1", {1, 1, 0, 0}}};
  EXPECT_THROW(score_annotations(ok, 4), ConfigError);
  EXPECT_THROW(score_annotations(ok, 1), ConfigError);
  const std::vector<AnnotatedRelation> missing{{"r1", {1, 1, 0}}, {"r7", {1, 1}}};
  try {
    score_annotations(missing, 3);
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("r7"), std::string::npos);
  }
  const std::vector<AnnotatedRelation> nonbinary{{"r1", {1, 2, 0}}};
  EXPECT_THROW(score_annotations(nonbinary, 3), ArgumentError);
  EXPECT_THROW(score_annotations({}, 3), ArgumentError);
}

TEST(LoadAnnotations, ParsesAndRejectsBadRows) {
  testing::TempDir dir;
  std::ofstream(dir / "a.csv") << "relation_id,annotator,side_effect_score,severity_score\n"
                                  "t1#0,ann1,1,1\nt1#0,ann2,1,\nt1#0,ann3,0,0\n";
  const auto t = load_annotations((dir / "a.csv").string());
  EXPECT_EQ(t.annotators, 3u);
  ASSERT_EQ(t.side_effect.size(), 1u);
  EXPECT_EQ(t.side_effect[0].scores, (std::vector<int>{1, 1, 0}));
  EXPECT_EQ(t.severity[0].scores, (std::vector<int>{1, 0}));
  EXPECT_THROW(score_annotations(t.severity, 3), ArgumentError);

  std::ofstream(dir / "dup.csv") << "relation_id,annotator,side_effect_score,severity_score\nx,a,1,1\nx,a,0,0\n";
  EXPECT_THROW(load_annotations((dir / "dup.csv").string()), ParseError);
  std::ofstream(dir / "bad.csv") << "relation_id,annotator,side_effect_score,severity_score\nx,a,yes,1\n";
  EXPECT_THROW(load_annotations((dir / "bad.csv").string()), ParseError);
}

}  // namespace
}  // namespace sekg
