#include "sekg/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "sekg/error.hpp"
#include "sekg/text.hpp"

namespace sekg {

using nlohmann::json;

void RenderParams::validate() const {
  if (!(base_size > 0.0) || !std::isfinite(base_size)) throw ArgumentError("base_size must be positive");
  if (!(base_thickness > 0.0) || !std::isfinite(base_thickness)) {
    throw ArgumentError("base_thickness must be positive");
  }
}

double node_radius(std::int64_t frequency, const RenderParams& params) {
  if (frequency < 1) throw DomainError("node frequency must be at least 1");
  return params.base_size + std::log(static_cast<double>(frequency));
}

double edge_thickness(std::int64_t weight, const RenderParams& params) {
  if (weight < 1) throw DomainError("edge weight must be at least 1");
  return params.base_thickness * std::log(static_cast<double>(weight));
}

std::int64_t KnowledgeGraph::relation_count() const {
  std::int64_t n = 0;
  for (const auto& [key, e] : edges) n += e.weight;
  return n;
}

std::int64_t KnowledgeGraph::medication_frequency(Brand b) const {
  std::int64_t n = 0;
  for (const auto& [key, e] : edges) {
    if (key.first == b) n += e.weight;
  }
  return n;
}

KnowledgeGraph build_graph(std::span<const Relation> relations, std::size_t max_examples) {
  KnowledgeGraph kg;
  std::map<EdgeKey, std::vector<EdgeExample>> pool;
  for (const auto& r : relations) {
    kg.medications.insert(r.medication);
    ++kg.side_effects[r.side_effect];
    EdgeKey key{r.medication, r.side_effect};
    auto& e = kg.edges[key];
    e.medication = r.medication;
    e.side_effect = r.side_effect;
    ++e.weight;
    if (r.severity) ++e.severity[to_lower(trim(*r.severity))];
    if (r.duration) ++e.duration[*r.duration];
    if (r.dosage) ++e.dosage[*r.dosage];
    pool[key].push_back({r.description, r.source_id, r.source_date});

    if (!kg.window) {
      kg.window = {r.source_date, r.source_date};
    } else {
      kg.window->first = std::min(kg.window->first, r.source_date);
      kg.window->second = std::max(kg.window->second, r.source_date);
    }
  }
  for (auto& [key, examples] : pool) {
    std::sort(examples.begin(), examples.end(), [](const EdgeExample& a, const EdgeExample& b) {
      if (a.source_date != b.source_date) return a.source_date > b.source_date;
      return std::tie(a.source_id, a.description) < std::tie(b.source_id, b.description);
    });
    if (examples.size() > max_examples) examples.resize(max_examples);
    kg.edges[key].examples = std::move(examples);
  }
  return kg;
}

namespace {

std::int64_t total(const Histogram& h) {
  std::int64_t n = 0;
  for (const auto& [k, v] : h) n += v;
  return n;
}

Histogram& add_into(Histogram& into, const Histogram& from) {
  for (const auto& [k, v] : from) into[k] += v;
  return into;
}

}  // namespace

void check_invariants(const KnowledgeGraph& kg) {
  std::map<std::string, std::int64_t> incident;
  for (const auto& [key, e] : kg.edges) {
    if (key.first != e.medication || key.second != e.side_effect) {
      throw ArgumentError("edge key does not match its endpoints");
    }
    if (!kg.medications.contains(e.medication)) {
      throw ArgumentError(std::string("edge references missing medication node ") + to_string(e.medication));
    }
    if (!kg.side_effects.contains(e.side_effect)) {
      throw ArgumentError("edge references missing side-effect node " + e.side_effect);
    }
    if (e.weight < 1) throw ArgumentError("edge weight must be positive");
    if (total(e.severity) > e.weight || total(e.duration) > e.weight || total(e.dosage) > e.weight) {
      throw ArgumentError("histogram total exceeds edge weight for " + e.side_effect);
    }
    incident[e.side_effect] += e.weight;
  }
  for (const auto& [term, freq] : kg.side_effects) {
    if (freq != incident[term]) {
      throw ArgumentError("frequency of " + term + " differs from its incident weight sum");
    }
  }
  for (Brand b : kg.medications) {
    if (kg.medication_frequency(b) == 0) {
      throw ArgumentError(std::string("medication node without edges: ") + to_string(b));
    }
  }
}

std::string node_id(Brand b) { return std::string("med:") + to_string(b); }
std::string node_id(std::string_view side_effect) { return "se:" + std::string(side_effect); }

namespace {

double round6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return std::strtod(buf, nullptr);
}

json histogram_json(const Histogram& h) {
  json j = json::object();
  for (const auto& [k, v] : h) j[k] = v;
  return j;
}

}  // namespace

json export_viewer_document(const KnowledgeGraph& kg, const RenderParams& params) {
  params.validate();
  const auto relations = kg.relation_count();

  json nodes = json::array();
  for (Brand b : kg.medications) {
    const auto freq = kg.medication_frequency(b);
    nodes.push_back({{"id", node_id(b)},
                     {"type", "medication"},
                     {"name", to_string(b)},
                     {"frequency", freq},
                     {"share", round6(static_cast<double>(freq) / static_cast<double>(relations))},
                     {"radius", round6(node_radius(freq, params))}});
  }

  std::map<std::string, std::array<Histogram, 3>> node_hist;
  for (const auto& [key, e] : kg.edges) {
    auto& h = node_hist[e.side_effect];
    add_into(h[0], e.severity);
    add_into(h[1], e.duration);
    add_into(h[2], e.dosage);
  }
  for (const auto& [term, freq] : kg.side_effects) {
    const auto& h = node_hist[term];
    nodes.push_back({{"id", node_id(term)},
                     {"type", "side_effect"},
                     {"name", term},
                     {"frequency", freq},
                     {"share", round6(static_cast<double>(freq) / static_cast<double>(relations))},
                     {"radius", round6(node_radius(freq, params))},
                     {"severity", histogram_json(h[0])},
                     {"duration", histogram_json(h[1])},
                     {"dosage", histogram_json(h[2])}});
  }

  json links = json::array();
  for (const auto& [key, e] : kg.edges) {
    json examples = json::array();
    for (const auto& ex : e.examples) {
      examples.push_back(
          {{"description", ex.description}, {"source_id", ex.source_id}, {"source_date", ex.source_date}});
    }
    links.push_back({{"source", node_id(e.medication)},
                     {"target", node_id(e.side_effect)},
                     {"weight", e.weight},
                     {"thickness", round6(edge_thickness(e.weight, params))},
                     {"severity", histogram_json(e.severity)},
                     {"duration", histogram_json(e.duration)},
                     {"dosage", histogram_json(e.dosage)},
                     {"examples", std::move(examples)}});
  }

  json metadata = {
      {"counts",
       {{"relations", relations},
        {"medication_nodes", kg.medications.size()},
        {"side_effect_nodes", kg.side_effects.size()},
        {"links", kg.edges.size()}}},
      {"params",
       {{"base_size", round6(params.base_size)},
        {"base_thickness", round6(params.base_thickness)},
        {"log_base", "e"}}},
      {"window", kg.window ? json{{"first_source_date", kg.window->first},
                                  {"last_source_date", kg.window->second}}
                           : json(nullptr)},
  };

  return json{{"metadata", std::move(metadata)}, {"nodes", std::move(nodes)}, {"links", std::move(links)}};
}

namespace {

Histogram histogram_from(const json& j) {
  if (!j.is_object()) throw ParseError("histogram must be an object");
  Histogram h;
  for (const auto& [k, v] : j.items()) h[k] = v.get<std::int64_t>();
  return h;
}

std::string strip_prefix(const std::string& id, std::string_view prefix) {
  if (id.rfind(prefix, 0) != 0) {
    throw ParseError("node id '" + id + "' lacks prefix '" + std::string(prefix) + "'");
  }
  return id.substr(prefix.size());
}

}  // namespace

KnowledgeGraph parse_viewer_document(const json& doc) {
  KnowledgeGraph kg;
  try {
    for (const char* key : {"metadata", "nodes", "links"}) {
      if (!doc.contains(key)) throw ParseError(std::string("viewer document lacks '") + key + "'");
    }
    for (const auto& n : doc.at("nodes")) {
      const auto type = n.at("type").get<std::string>();
      const auto id = n.at("id").get<std::string>();
      if (type == "medication") {
        const Brand b = brand_from_string(strip_prefix(id, "med:"));
        if (!kg.medications.insert(b).second) throw ParseError("duplicate node " + id);
      } else if (type == "side_effect") {
        const auto term = strip_prefix(id, "se:");
        if (!kg.side_effects.emplace(term, n.at("frequency").get<std::int64_t>()).second) {
          throw ParseError("duplicate node " + id);
        }
      } else {
        throw ParseError("unknown node type '" + type + "'");
      }
    }
    for (const auto& l : doc.at("links")) {
      Edge e;
      e.medication = brand_from_string(strip_prefix(l.at("source").get<std::string>(), "med:"));
      e.side_effect = strip_prefix(l.at("target").get<std::string>(), "se:");
      e.weight = l.at("weight").get<std::int64_t>();
      e.severity = histogram_from(l.at("severity"));
      e.duration = histogram_from(l.at("duration"));
      e.dosage = histogram_from(l.at("dosage"));
      for (const auto& ex : l.at("examples")) {
        e.examples.push_back({ex.at("description").get<std::string>(),
                              ex.at("source_id").get<std::string>(),
                              ex.at("source_date").get<EpochSeconds>()});
      }
      EdgeKey key{e.medication, e.side_effect};
      if (!kg.edges.emplace(key, std::move(e)).second) throw ParseError("duplicate link");
    }
    const auto& window = doc.at("metadata").at("window");
    if (!window.is_null()) {
      kg.window = {window.at("first_source_date").get<EpochSeconds>(),
                   window.at("last_source_date").get<EpochSeconds>()};
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed viewer document: ") + e.what());
  }
  try {
    check_invariants(kg);
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("viewer document violates graph invariants: ") + e.what());
  }
  return kg;
}

std::string dump_document(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace sekg
