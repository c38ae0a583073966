#pragma once

// Side-effect term normalization: embedding similarity grouping, LLM-assisted
// clustering of the residual representatives, and override standardization.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sekg/extract.hpp"
#include "sekg/provider.hpp"
#include "sekg/replay_cache.hpp"

namespace sekg {

struct TermEmbedding {
  std::string term;
  Eigen::VectorXd vector;  // unit length
  double norm = 0.0;       // length as returned by the provider
};

struct EmbedOptions {
  std::string model_id = "all-MiniLM-L6-v2";
  RetryPolicy retry;
  std::size_t batch_size = 64;
};

/// One L2-normalized embedding per term, cache-first. Throws ArgumentError for
/// empty or duplicate terms and ProviderError when vector lengths disagree or
/// a vector has zero length.
std::vector<TermEmbedding> embed_terms(const std::vector<std::string>& terms,
                                       EmbeddingProvider& provider, ReplayCache& cache,
                                       const EmbedOptions& options = {});

/// Relation count per raw side-effect string.
using TermFrequencies = std::map<std::string, std::size_t, std::less<>>;
TermFrequencies term_frequencies(std::span<const Relation> relations);

/// Cosine similarity of unit vectors, as a dense symmetric matrix.
Eigen::MatrixXd similarity_matrix(std::span<const TermEmbedding> embeddings);

struct TermGroup {
  std::string canonical;
  std::vector<std::string> members;  // sorted

  bool operator==(const TermGroup&) const = default;
};

struct ThresholdGrouping {
  std::vector<TermGroup> groups;      // sorted by canonical
  std::vector<std::string> residual;  // one representative per group, frequency-descending
};

/// Merges terms connected by a chain of pairs with similarity >= theta
/// (transitive closure). Each group's canonical is its most frequent member,
/// ties broken lexicographically. Throws ArgumentError unless 0 < theta <= 1
/// or when the matrix shape does not match `terms`.
ThresholdGrouping group_by_similarity(std::span<const std::string> terms,
                                      const Eigen::MatrixXd& similarity, double theta,
                                      const TermFrequencies& frequencies);

ThresholdGrouping group_by_threshold(std::span<const TermEmbedding> embeddings, double theta,
                                     const TermFrequencies& frequencies);

/// Frequency-descending, then lexicographic.
void sort_by_frequency(std::vector<std::string>& terms, const TermFrequencies& frequencies);

/// Clustering prompt; must contain `{term}` and `{keys}` placeholders.
class ClusterPrompt {
 public:
  explicit ClusterPrompt(std::string text);
  static ClusterPrompt load(const std::string& path);

  std::string render(std::string_view term, std::span<const std::string> keys) const;

 private:
  std::string text_;
};

struct ClusterOptions {
  std::string model_id = "gpt-4o-mini";
  RetryPolicy retry;
};

/// Visits `residual` in order. Each term is offered to the LLM together with
/// the keys created so far; an answer naming an existing key maps the term to
/// it, "NEW" or an unrecognized answer makes the term a key of its own. The
/// first term never needs a provider call. Returns (term, key) in input order.
std::vector<std::pair<std::string, std::string>> llm_cluster(
    const std::vector<std::string>& residual, LLMProvider& llm, ReplayCache& cache,
    const ClusterPrompt& prompt, const ClusterOptions& options = {});

enum class Provenance { Threshold, Llm, Override };

const char* to_string(Provenance p) noexcept;

/// A partition of raw side-effect terms into canonical groups.
class CanonicalMap {
 public:
  struct Member {
    std::string term;
    Provenance provenance = Provenance::Threshold;

    bool operator==(const Member&) const = default;
  };
  struct Group {
    std::string canonical;
    std::vector<Member> members;

    bool operator==(const Group&) const = default;
  };

  CanonicalMap() = default;

  /// Throws ArgumentError if groups overlap or a canonical is missing from
  /// its own group.
  explicit CanonicalMap(std::vector<Group> groups);

  const std::vector<Group>& groups() const noexcept { return groups_; }
  std::optional<std::string> canonical_of(std::string_view raw) const;
  std::size_t term_count() const noexcept { return index_.size(); }

 private:
  std::vector<Group> groups_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Combines threshold groups with the LLM key assignment of their
/// representatives. Members of a representative merged into a different key
/// are tagged Provenance::Llm.
CanonicalMap build_canonical_map(const ThresholdGrouping& grouping,
                                 std::span<const std::pair<std::string, std::string>> llm_keys);

/// `raw_term,canonical_term` standardization rules. Chains are followed to
/// their end; cycles and conflicting duplicate rules are ConfigErrors.
class OverrideFile {
 public:
  OverrideFile() = default;
  explicit OverrideFile(std::vector<std::pair<std::string, std::string>> rules);
  static OverrideFile load(const std::string& path);

  std::optional<std::string> resolve(std::string_view term) const;
  std::size_t size() const noexcept { return resolved_.size(); }

 private:
  std::map<std::string, std::string, std::less<>> resolved_;
};

/// Replaces each relation's side_effect by, in order of precedence: the
/// override for the raw term, the override for the term's canonical, the
/// canonical itself. Terms absent from both pass through with a warning.
std::vector<Relation> apply_canonical_map(std::span<const Relation> relations,
                                          const CanonicalMap& map, const OverrideFile& overrides);

struct CanonicalRow {
  std::string canonical;
  std::string member;
  Provenance provenance;
};

/// Audit view after overrides, sorted by (canonical, member).
std::vector<CanonicalRow> effective_rows(const CanonicalMap& map, const OverrideFile& overrides);

void write_canonical_csv(std::ostream& out, std::span<const CanonicalRow> rows);

}  // namespace sekg
