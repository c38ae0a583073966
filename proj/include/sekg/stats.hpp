#pragma once

// Registry comparison statistics and the annotation-evaluation workflow.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sekg/extract.hpp"
#include "sekg/ingest.hpp"

namespace sekg {

/// count / total. Throws DomainError for total <= 0, count < 0 or count > total.
double frequency(std::int64_t count, std::int64_t total);

struct TestResult {
  double beta0 = 0.0;  // log odds under the registry group
  double beta1 = 0.0;  // log odds ratio, crowd vs registry
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
  double p_adjusted = 1.0;
  bool corrected = false;  // Haldane-Anscombe 0.5 added to every cell
};

/// Two-sided standard normal tail probability P(|Z| >= |z|).
double normal_two_sided_p(double z);

/// Closed-form maximum-likelihood fit of the two-group binomial regression
/// events ~ b0 + b1 * X (X = 1 for the crowd group with a of n1 events, X = 0
/// for the registry group with b of n0), with Wald inference. Any zero cell
/// triggers the Haldane-Anscombe correction. p_adjusted equals p.
TestResult logor_test(std::int64_t a, std::int64_t n1, std::int64_t b, std::int64_t n0);

/// min(1, p * m). Throws DomainError for p outside [0, 1].
std::vector<double> bonferroni(std::span<const double> p_values);

/// Mean of the 1-based positions spanned by each tie group.
std::vector<double> average_ranks(std::span<const double> xs);

/// Pearson correlation of average ranks. Throws ArgumentError on length
/// mismatch or fewer than two values; DomainError when either ranking is
/// constant.
double spearman(std::span<const double> xs, std::span<const double> ys);

// --- crowd vs registry comparison ------------------------------------------

/// Manually curated crowd-term to preferred-term pairing.
class MatchMap {
 public:
  MatchMap() = default;
  /// Throws ConfigError if a term appears in more than one pair.
  explicit MatchMap(std::vector<std::pair<std::string, std::string>> pairs);
  static MatchMap load(const std::string& path);

  const std::vector<std::pair<std::string, std::string>>& pairs() const noexcept { return pairs_; }

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
};

/// Posts mentioning each canonical term, over `total` posts that report any
/// side effect.
struct RedditCounts {
  std::map<std::string, std::int64_t> counts;
  std::int64_t total = 0;
};

/// Counts deduplicated rows. With a brand, only relations of that brand are
/// considered and only rows carrying at least one such relation count.
RedditCounts reddit_counts(std::span<const ExtractedRow> rows, std::optional<Brand> brand = {});

/// Sums case counts and totals across products.
FaersSummary pool_faers(std::span<const FaersSummary> summaries);

struct ComparisonRow {
  std::string reddit_term;
  std::string fda_pt;
  std::optional<Brand> brand;
  std::int64_t a = 0, n1 = 0, b = 0, n0 = 0;
  double freq_reddit = 0.0;
  double freq_fda = 0.0;
  TestResult test;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<std::string> unmatched_reddit;
  std::vector<std::string> unmatched_fda;
};

/// One row per matched pair with Bonferroni adjustment across this call's
/// rows. With a brand, FAERS counts come from the brand's product (throws
/// ConfigError if absent); without one, all products are pooled.
Comparison compare(const RedditCounts& reddit, std::span<const FaersSummary> faers,
                   const MatchMap& map, std::optional<Brand> brand = {});

void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows);

// --- evaluation ---------------------------------------------------------------

/// ceil(fraction * n), guarded against floating-point overshoot.
std::size_t sample_size(std::size_t n, double fraction);

/// Uniform sample without replacement, in draw order. Deterministic for a
/// given seed on every platform (mt19937_64 with rejection-sampled bounds).
/// Throws ArgumentError unless 0 < fraction <= 1.
std::vector<std::size_t> sample_indices(std::size_t n, double fraction, std::uint64_t seed);

template <typename T>
std::vector<T> sample_for_eval(std::span<const T> rows, double fraction, std::uint64_t seed) {
  std::vector<T> out;
  for (auto i : sample_indices(rows.size(), fraction, seed)) out.push_back(rows[i]);
  return out;
}

struct AnnotatedRelation {
  std::string relation_id;
  std::vector<int> scores;  // one 0/1 score per annotator
};

struct EvalScore {
  double accuracy = 0.0;
  std::vector<int> per_relation;
};

/// Majority vote per relation over `annotators` scores. Throws ConfigError
/// for an even or < 3 annotator count and ArgumentError naming a relation
/// with missing or non-binary scores.
EvalScore score_annotations(std::span<const AnnotatedRelation> annotations, std::size_t annotators);

struct AnnotationTable {
  std::vector<AnnotatedRelation> side_effect;
  std::vector<AnnotatedRelation> severity;
  std::size_t annotators = 0;
};

/// Reads `relation_id,annotator,side_effect_score,severity_score`; blank
/// scores are omitted so score_annotations reports them as missing.
AnnotationTable load_annotations(const std::string& path);

}  // namespace sekg
