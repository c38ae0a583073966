#include "sekg/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "sekg/csv.hpp"
#include "sekg/log.hpp"
#include "sekg/text.hpp"

namespace sekg {

using nlohmann::json;

namespace {

void require_unique_nonempty(std::span<const std::string> terms) {
  std::set<std::string_view> seen;
  for (const auto& t : terms) {
    if (t.empty()) throw ArgumentError("empty side-effect term");
    if (!seen.insert(t).second) throw ArgumentError("duplicate side-effect term '" + t + "'");
  }
}

std::vector<double> parse_vector(const std::string& bytes, const std::string& term) {
  try {
    return json::parse(bytes).get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ProviderError("cached embedding for '" + term + "' is not a numeric array", false);
  }
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

std::size_t freq_of(const TermFrequencies& f, std::string_view term) {
  auto it = f.find(term);
  return it == f.end() ? 0 : it->second;
}

}  // namespace

std::vector<TermEmbedding> embed_terms(const std::vector<std::string>& terms,
                                       EmbeddingProvider& provider, ReplayCache& cache,
                                       const EmbedOptions& options) {
  require_unique_nonempty(terms);
  std::vector<std::vector<double>> raw(terms.size());
  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (auto hit = cache.get(options.model_id, terms[i])) {
      raw[i] = parse_vector(*hit, terms[i]);
    } else {
      misses.push_back(i);
    }
  }

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  for (std::size_t start = 0; start < misses.size(); start += batch) {
    const std::size_t stop = std::min(misses.size(), start + batch);
    std::vector<std::string> texts;
    for (std::size_t k = start; k < stop; ++k) texts.push_back(terms[misses[k]]);
    auto vectors = with_retry(options.retry, [&] { return provider.embed(options.model_id, texts); });
    if (vectors.size() != texts.size()) {
      throw ProviderError("embedding provider returned " + std::to_string(vectors.size()) +
                              " vectors for " + std::to_string(texts.size()) + " inputs",
                          false);
    }
    for (std::size_t k = start; k < stop; ++k) {
      const auto& term = terms[misses[k]];
      const auto stored = cache.put(options.model_id, term, json(vectors[k - start]).dump());
      raw[misses[k]] = parse_vector(stored, term);
    }
  }

  std::vector<TermEmbedding> out;
  out.reserve(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (raw[i].empty()) throw ProviderError("empty embedding for '" + terms[i] + "'", false);
    if (raw[i].size() != raw.front().size()) {
      throw ProviderError("embedding length " + std::to_string(raw[i].size()) + " for '" + terms[i] +
                              "' differs from " + std::to_string(raw.front().size()),
                          false);
    }
    TermEmbedding e;
    e.term = terms[i];
    e.vector = Eigen::Map<const Eigen::VectorXd>(raw[i].data(), static_cast<Eigen::Index>(raw[i].size()));
    e.norm = e.vector.norm();
    if (!(e.norm > 0.0) || !std::isfinite(e.norm)) {
      throw ProviderError("embedding for '" + terms[i] + "' has zero or non-finite length", false);
    }
    e.vector /= e.norm;
    out.push_back(std::move(e));
  }
  return out;
}

TermFrequencies term_frequencies(std::span<const Relation> relations) {
  TermFrequencies f;
  for (const auto& r : relations) ++f[r.side_effect];
  return f;
}

Eigen::MatrixXd similarity_matrix(std::span<const TermEmbedding> embeddings) {
  if (embeddings.empty()) return Eigen::MatrixXd(0, 0);
  const auto n = static_cast<Eigen::Index>(embeddings.size());
  const auto d = embeddings.front().vector.size();
  Eigen::MatrixXd e(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = embeddings[static_cast<std::size_t>(i)].vector;
    if (v.size() != d) throw ArgumentError("embeddings of unequal length");
    e.row(i) = v.transpose();
  }
  return e * e.transpose();
}

void sort_by_frequency(std::vector<std::string>& terms, const TermFrequencies& frequencies) {
  std::sort(terms.begin(), terms.end(), [&](const std::string& a, const std::string& b) {
    const auto fa = freq_of(frequencies, a), fb = freq_of(frequencies, b);
    if (fa != fb) return fa > fb;
    return a < b;
  });
}

ThresholdGrouping group_by_similarity(std::span<const std::string> terms,
                                      const Eigen::MatrixXd& similarity, double theta,
                                      const TermFrequencies& frequencies) {
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw ArgumentError("similarity threshold must lie in (0, 1]");
  }
  const auto n = terms.size();
  if (similarity.rows() != static_cast<Eigen::Index>(n) || similarity.cols() != static_cast<Eigen::Index>(n)) {
    throw ArgumentError("similarity matrix shape does not match the term list");
  }
  require_unique_nonempty(terms);

  DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      if (similarity(ii, jj) >= theta || similarity(jj, ii) >= theta) sets.unite(i, j);
    }
  }

  std::map<std::size_t, std::vector<std::string>> by_root;
  for (std::size_t i = 0; i < n; ++i) by_root[sets.find(i)].push_back(terms[i]);

  ThresholdGrouping out;
  for (auto& [root, members] : by_root) {
    std::sort(members.begin(), members.end());
    std::vector<std::string> ranked = members;
    sort_by_frequency(ranked, frequencies);
    out.groups.push_back({ranked.front(), std::move(members)});
  }
  std::sort(out.groups.begin(), out.groups.end(),
            [](const TermGroup& a, const TermGroup& b) { return a.canonical < b.canonical; });
  for (const auto& g : out.groups) out.residual.push_back(g.canonical);
  sort_by_frequency(out.residual, frequencies);
  return out;
}

ThresholdGrouping group_by_threshold(std::span<const TermEmbedding> embeddings, double theta,
                                     const TermFrequencies& frequencies) {
  std::vector<std::string> terms;
  terms.reserve(embeddings.size());
  for (const auto& e : embeddings) terms.push_back(e.term);
  return group_by_similarity(terms, similarity_matrix(embeddings), theta, frequencies);
}

// --- LLM clustering -----------------------------------------------------------

ClusterPrompt::ClusterPrompt(std::string text) : text_(std::move(text)) {
  if (text_.find("{term}") == std::string::npos || text_.find("{keys}") == std::string::npos) {
    throw ConfigError("cluster prompt must contain {term} and {keys} placeholders");
  }
}

ClusterPrompt ClusterPrompt::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const ParseError&) {
    throw ConfigError("cluster prompt asset not found: " + path);
  }
  return ClusterPrompt(std::move(text));
}

std::string ClusterPrompt::render(std::string_view term, std::span<const std::string> keys) const {
  std::string listing;
  for (const auto& k : keys) {
    if (!listing.empty()) listing.push_back('\n');
    listing += "- " + k;
  }
  return render_template(text_, {{"term", std::string(term)}, {"keys", listing}});
}

namespace {

std::string_view clean_answer(std::string_view answer) {
  auto a = strip_code_fence(answer);
  // a lone first line is the answer; anything after it is ignored
  if (auto nl = a.find('\n'); nl != std::string_view::npos) a = trim(a.substr(0, nl));
  if (a.size() >= 2 && a.substr(0, 2) == "- ") a = trim(a.substr(2));
  while (!a.empty() && (a.back() == '.' || a.back() == '"' || a.back() == '\'' || a.back() == '`')) {
    a.remove_suffix(1);
  }
  while (!a.empty() && (a.front() == '"' || a.front() == '\'' || a.front() == '`')) a.remove_prefix(1);
  return trim(a);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> llm_cluster(
    const std::vector<std::string>& residual, LLMProvider& llm, ReplayCache& cache,
    const ClusterPrompt& prompt, const ClusterOptions& options) {
  if (residual.empty()) throw ArgumentError("llm_cluster needs at least one term");
  require_unique_nonempty(residual);

  std::vector<std::string> keys;
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(residual.size());
  for (const auto& term : residual) {
    if (keys.empty()) {
      keys.push_back(term);
      out.emplace_back(term, term);
      continue;
    }
    const auto response =
        cached_complete(llm, cache, options.model_id, prompt.render(term, keys), options.retry);
    const auto answer = clean_answer(response);

    std::optional<std::string> match;
    if (!iequals(answer, "NEW")) {
      auto exact = std::find(keys.begin(), keys.end(), answer);
      if (exact != keys.end()) {
        match = *exact;
      } else {
        auto loose = std::find_if(keys.begin(), keys.end(),
                                  [&](const std::string& k) { return iequals(k, answer); });
        if (loose != keys.end()) {
          match = *loose;
        } else {
          log::warn("normalize", "cluster_unparseable", {{"term", term}, {"answer", std::string(answer)}});
        }
      }
    }
    if (match) {
      out.emplace_back(term, *match);
    } else {
      keys.push_back(term);
      out.emplace_back(term, term);
    }
  }
  return out;
}

// --- canonical map ------------------------------------------------------------

const char* to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::Threshold: return "threshold";
    case Provenance::Llm: return "llm";
    case Provenance::Override: return "override";
  }
  return "threshold";
}

CanonicalMap::CanonicalMap(std::vector<Group> groups) : groups_(std::move(groups)) {
  std::sort(groups_.begin(), groups_.end(),
            [](const Group& a, const Group& b) { return a.canonical < b.canonical; });
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    auto& group = groups_[g];
    std::sort(group.members.begin(), group.members.end(),
              [](const Member& a, const Member& b) { return a.term < b.term; });
    bool self = false;
    for (const auto& m : group.members) {
      if (!index_.emplace(m.term, g).second) {
        throw ArgumentError("term '" + m.term + "' belongs to more than one canonical group");
      }
      self = self || m.term == group.canonical;
    }
    if (!self) throw ArgumentError("canonical '" + group.canonical + "' is not a member of its group");
  }
}

std::optional<std::string> CanonicalMap::canonical_of(std::string_view raw) const {
  auto it = index_.find(raw);
  if (it == index_.end()) return std::nullopt;
  return groups_[it->second].canonical;
}

CanonicalMap build_canonical_map(const ThresholdGrouping& grouping,
                                 std::span<const std::pair<std::string, std::string>> llm_keys) {
  std::map<std::string, std::string, std::less<>> key_of(llm_keys.begin(), llm_keys.end());
  std::map<std::string, std::vector<CanonicalMap::Member>> merged;
  for (const auto& g : grouping.groups) {
    auto it = key_of.find(g.canonical);
    const std::string key = it == key_of.end() ? g.canonical : it->second;
    const auto prov = key == g.canonical ? Provenance::Threshold : Provenance::Llm;
    auto& members = merged[key];
    for (const auto& m : g.members) members.push_back({m, prov});
  }
  std::vector<CanonicalMap::Group> groups;
  for (auto& [key, members] : merged) groups.push_back({key, std::move(members)});
  return CanonicalMap(std::move(groups));
}

// --- overrides ----------------------------------------------------------------

OverrideFile::OverrideFile(std::vector<std::pair<std::string, std::string>> rules) {
  std::map<std::string, std::string, std::less<>> direct;
  for (auto& [raw, target] : rules) {
    if (raw.empty() || target.empty()) throw ConfigError("override rules need both terms");
    if (raw == target) continue;
    auto [it, inserted] = direct.emplace(raw, target);
    if (!inserted && it->second != target) {
      throw ConfigError("conflicting overrides for '" + raw + "': '" + it->second + "' vs '" + target + "'");
    }
  }
  for (const auto& [raw, target] : direct) {
    std::set<std::string> visited{raw};
    std::string cur = target;
    for (auto next = direct.find(cur); next != direct.end(); next = direct.find(cur)) {
      if (!visited.insert(cur).second) {
        throw ConfigError("override cycle through '" + cur + "'");
      }
      cur = next->second;
    }
    resolved_.emplace(raw, cur);
  }
}

OverrideFile OverrideFile::load(const std::string& path) {
  std::vector<csv::Record> records;
  try {
    records = csv::read_file(path);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("override file: ") + e.what());
  }
  if (records.empty()) return OverrideFile{};
  csv::Header h(records.front(), {"raw_term", "canonical_term"});
  std::vector<std::pair<std::string, std::string>> rules;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    if (f.size() != records.front().fields.size()) {
      throw ParseError("override file: wrong field count", records[i].line);
    }
    rules.emplace_back(std::string(trim(f[h["raw_term"]])), std::string(trim(f[h["canonical_term"]])));
  }
  return OverrideFile(std::move(rules));
}

std::optional<std::string> OverrideFile::resolve(std::string_view term) const {
  auto it = resolved_.find(term);
  if (it == resolved_.end()) return std::nullopt;
  return it->second;
}

std::vector<Relation> apply_canonical_map(std::span<const Relation> relations,
                                          const CanonicalMap& map, const OverrideFile& overrides) {
  std::vector<Relation> out;
  out.reserve(relations.size());
  std::set<std::string> warned;
  for (const auto& r : relations) {
    Relation n = r;
    if (auto o = overrides.resolve(r.side_effect)) {
      n.side_effect = *o;
    } else if (auto c = map.canonical_of(r.side_effect)) {
      n.side_effect = overrides.resolve(*c).value_or(*c);
    } else if (warned.insert(r.side_effect).second) {
      log::warn("normalize", "unmapped_term", {{"term", r.side_effect}});
    }
    out.push_back(std::move(n));
  }
  return out;
}

std::vector<CanonicalRow> effective_rows(const CanonicalMap& map, const OverrideFile& overrides) {
  std::vector<CanonicalRow> rows;
  for (const auto& g : map.groups()) {
    const auto group_override = overrides.resolve(g.canonical);
    for (const auto& m : g.members) {
      if (auto o = overrides.resolve(m.term)) {
        rows.push_back({*o, m.term, Provenance::Override});
      } else if (group_override) {
        rows.push_back({*group_override, m.term, Provenance::Override});
      } else {
        rows.push_back({g.canonical, m.term, m.provenance});
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const CanonicalRow& a, const CanonicalRow& b) {
    return std::tie(a.canonical, a.member) < std::tie(b.canonical, b.member);
  });
  return rows;
}

void write_canonical_csv(std::ostream& out, std::span<const CanonicalRow> rows) {
  csv::write_row(out, {"canonical", "member", "provenance"});
  for (const auto& r : rows) csv::write_row(out, {r.canonical, r.member, to_string(r.provenance)});
}

}  // namespace sekg
