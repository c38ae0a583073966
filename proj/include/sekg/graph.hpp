#pragma once

// Bipartite medication/side-effect knowledge graph, render geometry and the
// viewer document.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sekg/extract.hpp"

namespace sekg {

struct RenderParams {
  double base_size = 6.0;
  double base_thickness = 1.5;

  /// Throws ArgumentError unless both constants are positive and finite.
  void validate() const;
};

/// base_size + ln(frequency). Throws DomainError for frequency < 1.
double node_radius(std::int64_t frequency, const RenderParams& params);

/// base_thickness * ln(weight); zero at weight 1. Throws DomainError for
/// weight < 1.
double edge_thickness(std::int64_t weight, const RenderParams& params);

using Histogram = std::map<std::string, std::int64_t>;

struct EdgeExample {
  std::string description;
  std::string source_id;
  EpochSeconds source_date = 0;

  bool operator==(const EdgeExample&) const = default;
};

struct Edge {
  Brand medication = Brand::UnspecifiedBrands;
  std::string side_effect;
  std::int64_t weight = 0;
  Histogram severity;  // lowercased keys
  Histogram duration;
  Histogram dosage;
  std::vector<EdgeExample> examples;  // most recent first

  bool operator==(const Edge&) const = default;
};

using EdgeKey = std::pair<Brand, std::string>;

struct KnowledgeGraph {
  std::set<Brand> medications;
  std::map<std::string, std::int64_t> side_effects;  // canonical term -> frequency
  std::map<EdgeKey, Edge> edges;
  std::optional<std::pair<EpochSeconds, EpochSeconds>> window;  // earliest/latest source_date

  bool operator==(const KnowledgeGraph&) const = default;

  std::int64_t relation_count() const;
  std::int64_t medication_frequency(Brand b) const;
};

/// Aggregates relations into nodes and weighted edges, keeping at most
/// `max_examples` descriptions per edge.
KnowledgeGraph build_graph(std::span<const Relation> relations, std::size_t max_examples = 5);

/// Throws ArgumentError naming the first violated invariant: dangling edge
/// endpoint, frequency differing from incident weight sum, histogram total
/// exceeding weight, or non-positive weight.
void check_invariants(const KnowledgeGraph& kg);

std::string node_id(Brand b);
std::string node_id(std::string_view side_effect);

/// Document with keys `metadata`, `nodes`, `links`. Object keys are sorted
/// and floats rounded to 6 significant digits so that dumps are canonical.
nlohmann::json export_viewer_document(const KnowledgeGraph& kg, const RenderParams& params);

/// Inverse of export_viewer_document. Throws ParseError on schema or
/// invariant violations.
KnowledgeGraph parse_viewer_document(const nlohmann::json& doc);

/// Canonical text form: two-space indent, trailing newline.
std::string dump_document(const nlohmann::json& doc);

}  // namespace sekg
