#include "sekg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "sekg/csv.hpp"
#include "sekg/error.hpp"
#include "sekg/text.hpp"

namespace sekg {

double frequency(std::int64_t count, std::int64_t total) {
  if (total <= 0) throw DomainError("frequency denominator must be positive");
  if (count < 0 || count > total) throw DomainError("frequency count must lie in [0, total]");
  return static_cast<double>(count) / static_cast<double>(total);
}

double normal_two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

TestResult logor_test(std::int64_t a, std::int64_t n1, std::int64_t b, std::int64_t n0) {
  if (n1 <= 0 || n0 <= 0) throw DomainError("both groups need at least one observation");
  if (a < 0 || a > n1 || b < 0 || b > n0) throw DomainError("event counts must lie within group sizes");

  TestResult r;
  double ea = static_cast<double>(a), na = static_cast<double>(n1 - a);
  double eb = static_cast<double>(b), nb = static_cast<double>(n0 - b);
  if (a == 0 || a == n1 || b == 0 || b == n0) {
    ea += 0.5;
    na += 0.5;
    eb += 0.5;
    nb += 0.5;
    r.corrected = true;
  }
  r.beta0 = std::log(eb / nb);
  r.beta1 = std::log(ea / na) - r.beta0;
  r.se = std::sqrt(1.0 / ea + 1.0 / na + 1.0 / eb + 1.0 / nb);
  r.z = r.beta1 / r.se;
  r.p = normal_two_sided_p(r.z);
  r.p_adjusted = r.p;
  return r;
}

std::vector<double> bonferroni(std::span<const double> p_values) {
  const double m = static_cast<double>(p_values.size());
  std::vector<double> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p-value outside [0, 1]");
    out.push_back(std::min(1.0, p * m));
  }
  return out;
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t stop = start + 1;
    while (stop < order.size() && xs[order[stop]] == xs[order[start]]) ++stop;
    // positions start+1 .. stop, 1-based
    const double mean = (static_cast<double>(start + 1) + static_cast<double>(stop)) / 2.0;
    for (std::size_t k = start; k < stop; ++k) ranks[order[k]] = mean;
    start = stop;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ArgumentError("spearman needs equal-length inputs");
  if (xs.size() < 2) throw ArgumentError("spearman needs at least two observations");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(xs.begin(), xs.end(), finite) || !std::all_of(ys.begin(), ys.end(), finite)) {
    throw DomainError("spearman inputs must be finite");
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("correlation undefined for a constant ranking");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// --- comparison ---------------------------------------------------------------

MatchMap::MatchMap(std::vector<std::pair<std::string, std::string>> pairs) : pairs_(std::move(pairs)) {
  std::set<std::string> reddit, fda;
  for (const auto& [r, f] : pairs_) {
    if (r.empty() || f.empty()) throw ConfigError("match map pairs need both terms");
    if (!reddit.insert(r).second) throw ConfigError("reddit term '" + r + "' paired more than once");
    if (!fda.insert(f).second) throw ConfigError("FDA term '" + f + "' paired more than once");
  }
}

MatchMap MatchMap::load(const std::string& path) {
  auto records = csv::read_file(path);
  if (records.empty()) return MatchMap{};
  csv::Header h(records.front(), {"reddit_term", "fda_pt"});
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    if (f.size() != records.front().fields.size()) throw ParseError("match map: wrong field count", records[i].line);
    pairs.emplace_back(std::string(trim(f[h["reddit_term"]])), std::string(trim(f[h["fda_pt"]])));
  }
  return MatchMap(std::move(pairs));
}

RedditCounts reddit_counts(std::span<const ExtractedRow> rows, std::optional<Brand> brand) {
  RedditCounts out;
  for (const auto& row : rows) {
    std::set<std::string> terms;
    for (const auto& r : row.relations) {
      if (!brand || r.medication == *brand) terms.insert(r.side_effect);
    }
    if (terms.empty()) continue;
    ++out.total;
    for (const auto& t : terms) ++out.counts[t];
  }
  return out;
}

FaersSummary pool_faers(std::span<const FaersSummary> summaries) {
  FaersSummary pooled;
  pooled.product = "All";
  std::map<std::string, std::int64_t> counts;
  std::vector<std::string> order;
  std::set<std::string> quarters;
  for (const auto& s : summaries) {
    pooled.total_reports += s.total_reports;
    quarters.insert(s.as_of_quarter);
    for (const auto& r : s.rows) {
      auto [it, inserted] = counts.emplace(r.preferred_term, 0);
      if (inserted) order.push_back(r.preferred_term);
      it->second += r.case_count;
    }
  }
  for (const auto& pt : order) pooled.rows.push_back({pt, counts[pt]});
  if (quarters.size() == 1) pooled.as_of_quarter = *quarters.begin();
  return pooled;
}

Comparison compare(const RedditCounts& reddit, std::span<const FaersSummary> faers,
                   const MatchMap& map, std::optional<Brand> brand) {
  FaersSummary registry;
  if (brand) {
    const char* product = faers_product(*brand);
    auto it = std::find_if(faers.begin(), faers.end(),
                           [&](const FaersSummary& s) { return iequals(s.product, product); });
    if (it == faers.end()) {
      throw ConfigError(std::string("no FAERS data for product '") + product + "' (brand " +
                        to_string(*brand) + ")");
    }
    registry = *it;
  } else {
    registry = pool_faers(faers);
  }

  Comparison out;
  std::set<std::string> paired_reddit, paired_fda;
  for (const auto& [rt, pt] : map.pairs()) {
    paired_reddit.insert(rt);
    paired_fda.insert(pt);
    if (reddit.total <= 0) {
      throw DomainError(std::string("no Reddit posts report side effects") +
                        (brand ? std::string(" for ") + to_string(*brand) : std::string()));
    }
    ComparisonRow row;
    row.reddit_term = rt;
    row.fda_pt = pt;
    row.brand = brand;
    auto rc = reddit.counts.find(rt);
    row.a = rc == reddit.counts.end() ? 0 : rc->second;
    row.n1 = reddit.total;
    row.b = registry.count_for(pt).value_or(0);
    row.n0 = registry.total_reports;
    row.freq_reddit = frequency(row.a, row.n1);
    row.freq_fda = frequency(row.b, row.n0);
    row.test = logor_test(row.a, row.n1, row.b, row.n0);
    out.rows.push_back(std::move(row));
  }

  std::vector<double> ps;
  for (const auto& r : out.rows) ps.push_back(r.test.p);
  const auto adjusted = bonferroni(ps);
  for (std::size_t i = 0; i < out.rows.size(); ++i) out.rows[i].test.p_adjusted = adjusted[i];

  std::vector<std::pair<std::string, std::int64_t>> ur;
  for (const auto& [term, n] : reddit.counts) {
    if (!paired_reddit.contains(term)) ur.emplace_back(term, n);
  }
  std::stable_sort(ur.begin(), ur.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  for (auto& [t, n] : ur) out.unmatched_reddit.push_back(std::move(t));

  std::vector<std::pair<std::string, std::int64_t>> uf;
  for (const auto& r : registry.rows) {
    if (!paired_fda.contains(r.preferred_term)) uf.emplace_back(r.preferred_term, r.case_count);
  }
  std::stable_sort(uf.begin(), uf.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  for (auto& [t, n] : uf) out.unmatched_fda.push_back(std::move(t));
  return out;
}

void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows) {
  csv::write_row(out, {"term_pair", "brand", "a", "n1", "b", "n0", "freq_reddit", "freq_fda", "beta1",
                       "se", "z", "p", "p_adjusted", "corrected_flag"});
  auto num = [](double v) { return fmt::format("{:.6g}", v); };
  for (const auto& r : rows) {
    csv::write_row(out, {r.reddit_term + "|" + r.fda_pt, r.brand ? to_string(*r.brand) : "All",
                         std::to_string(r.a), std::to_string(r.n1), std::to_string(r.b),
                         std::to_string(r.n0), num(r.freq_reddit), num(r.freq_fda), num(r.test.beta1),
                         num(r.test.se), num(r.test.z), num(r.test.p), num(r.test.p_adjusted),
                         r.test.corrected ? "1" : "0"});
  }
}

// --- evaluation ---------------------------------------------------------------

std::size_t sample_size(std::size_t n, double fraction) {
  const double x = fraction * static_cast<double>(n);
  const double k = std::ceil(x - 1e-9 * std::max(1.0, x));
  return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

namespace {

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  // rejection sampling keeps the draw unbiased and platform independent
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t v = rng();
    if (v < limit) return v % bound;
  }
}

}  // namespace

std::vector<std::size_t> sample_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("sample fraction must lie in (0, 1]");
  const std::size_t k = sample_size(n, fraction);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

EvalScore score_annotations(std::span<const AnnotatedRelation> annotations, std::size_t annotators) {
  if (annotators < 3 || annotators % 2 == 0) {
    throw ConfigError("majority voting needs an odd number of at least 3 annotators, got " +
                      std::to_string(annotators));
  }
  if (annotations.empty()) throw ArgumentError("no annotated relations");
  EvalScore out;
  for (const auto& rel : annotations) {
    if (rel.scores.size() != annotators) {
      throw ArgumentError("relation " + rel.relation_id + " has " + std::to_string(rel.scores.size()) +
                          " scores, expected " + std::to_string(annotators));
    }
    std::size_t ones = 0;
    for (int s : rel.scores) {
      if (s != 0 && s != 1) throw ArgumentError("relation " + rel.relation_id + " has a non-binary score");
      ones += static_cast<std::size_t>(s);
    }
    out.per_relation.push_back(2 * ones > annotators ? 1 : 0);
  }
  out.accuracy = static_cast<double>(std::accumulate(out.per_relation.begin(), out.per_relation.end(), 0)) /
                 static_cast<double>(out.per_relation.size());
  return out;
}

AnnotationTable load_annotations(const std::string& path) {
  auto records = csv::read_file(path);
  if (records.empty()) throw ParseError("annotation file is empty");
  csv::Header h(records.front(), {"relation_id", "annotator", "side_effect_score", "severity_score"});
  AnnotationTable table;
  std::map<std::string, std::size_t> index;
  std::set<std::string> annotators;
  std::set<std::pair<std::string, std::string>> seen;

  auto parse_score = [](const std::string& field, std::size_t line) -> std::optional<int> {
    const auto s = trim(field);
    if (s.empty()) return std::nullopt;
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw ParseError("score must be 0 or 1, got '" + field + "'", line);
  };

  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.fields.size() != records.front().fields.size()) throw ParseError("wrong field count", r.line);
    const std::string id(trim(r.fields[h["relation_id"]]));
    const std::string who(trim(r.fields[h["annotator"]]));
    if (!seen.emplace(id, who).second) {
      throw ParseError("annotator " + who + " scored relation " + id + " twice", r.line);
    }
    annotators.insert(who);
    auto [it, inserted] = index.emplace(id, table.side_effect.size());
    if (inserted) {
      table.side_effect.push_back({id, {}});
      table.severity.push_back({id, {}});
    }
    if (auto s = parse_score(r.fields[h["side_effect_score"]], r.line)) {
      table.side_effect[it->second].scores.push_back(*s);
    }
    if (auto s = parse_score(r.fields[h["severity_score"]], r.line)) {
      table.severity[it->second].scores.push_back(*s);
    }
  }
  table.annotators = annotators.size();
  return table;
}

}  // namespace sekg
