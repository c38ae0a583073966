#include "sekg/extract.hpp"

#include <array>
#include <atomic>
#include <exception>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "sekg/log.hpp"
#include "sekg/text.hpp"

namespace sekg {

using nlohmann::json;

namespace {
constexpr std::array<Brand, 4> kBrands = {Brand::Ozempic, Brand::Wegovy, Brand::Rybelsus,
                                          Brand::UnspecifiedBrands};
constexpr std::size_t kExcerptBytes = 300;
}  // namespace

const char* to_string(Brand brand) noexcept {
  switch (brand) {
    case Brand::Ozempic: return "Ozempic";
    case Brand::Wegovy: return "Wegovy";
    case Brand::Rybelsus: return "Rybelsus";
    case Brand::UnspecifiedBrands: return "Unspecified Brands";
  }
  return "Unspecified Brands";
}

Brand brand_from_string(std::string_view name) {
  for (Brand b : kBrands) {
    if (name == to_string(b)) return b;
  }
  throw ParseError("unknown brand '" + std::string(name) + "'");
}

std::span<const Brand> all_brands() noexcept { return kBrands; }

const char* faers_product(Brand brand) noexcept {
  return brand == Brand::UnspecifiedBrands ? "Semaglutide" : to_string(brand);
}

Brand canonical_brand(std::string_view name) {
  const auto n = trim(name);
  if (iequals(n, "ozempic")) return Brand::Ozempic;
  if (iequals(n, "wegovy")) return Brand::Wegovy;
  if (iequals(n, "rybelsus")) return Brand::Rybelsus;
  if (iequals(n, "semaglutide")) return Brand::UnspecifiedBrands;
  throw WhitelistError(std::string(n));
}

namespace {

json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> opt_from(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<std::string>();
}

}  // namespace

void to_json(json& j, const Relation& r) {
  j = json{{"medication", to_string(r.medication)},
           {"side_effect", r.side_effect},
           {"severity", opt_json(r.severity)},
           {"duration", opt_json(r.duration)},
           {"dosage", opt_json(r.dosage)},
           {"description", r.description},
           {"source_id", r.source_id},
           {"source_date", r.source_date}};
}

void from_json(const json& j, Relation& r) {
  r.medication = brand_from_string(j.at("medication").get<std::string>());
  r.side_effect = j.at("side_effect").get<std::string>();
  r.severity = opt_from(j, "severity");
  r.duration = opt_from(j, "duration");
  r.dosage = opt_from(j, "dosage");
  r.description = j.at("description").get<std::string>();
  r.source_id = j.at("source_id").get<std::string>();
  r.source_date = j.at("source_date").get<EpochSeconds>();
}

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  if (text_.find("{text}") == std::string::npos) {
    throw ConfigError("prompt template lacks a {text} placeholder");
  }
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError("prompt template asset not found: " + path);
  }
  return PromptTemplate(read_file(path));
}

std::string build_prompt(const PromptTemplate& tmpl, std::string_view text) {
  if (text.empty()) throw ArgumentError("cannot build a prompt for empty text");
  return render_template(tmpl.text(), {{"text", std::string(text)}});
}

std::string_view strip_code_fence(std::string_view text) {
  auto t = trim(text);
  if (t.substr(0, 3) != "```") return t;
  const auto nl = t.find('\n');
  if (nl == std::string_view::npos) return t;
  t.remove_prefix(nl + 1);
  t = trim(t);
  if (t.size() >= 3 && t.substr(t.size() - 3) == "```") t.remove_suffix(3);
  return trim(t);
}

namespace {

[[noreturn]] void schema_error(const std::string& why, std::string_view response) {
  throw ParseError("response violates the relation schema: " + why, 0, std::string(response));
}

const json& require(const json& obj, const char* key, std::string_view response) {
  if (!obj.is_object()) schema_error(std::string("expected an object holding '") + key + "'", response);
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(std::string("missing field '") + key + "'", response);
  return *it;
}

std::string require_string(const json& obj, const char* key, std::string_view response) {
  const auto& v = require(obj, key, response);
  if (!v.is_string()) schema_error(std::string("field '") + key + "' must be a string", response);
  return v.get<std::string>();
}

std::optional<std::string> optional_property(const json& props, const char* key,
                                             std::string_view response) {
  const auto& v = require(props, key, response);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) schema_error(std::string("field '") + key + "' must be a string or null", response);
  auto s = std::string(trim(v.get<std::string>()));
  if (s.empty()) return std::nullopt;
  return s;
}

}  // namespace

std::vector<Relation> parse_response(std::string_view text) {
  const auto body = strip_code_fence(text);
  if (iequals(body, "null")) return {};

  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw ParseError(std::string("response is not valid JSON: ") + e.what(), 0, std::string(text));
  }
  if (doc.is_null()) return {};
  if (!doc.is_array()) schema_error("top level must be an array", text);

  std::vector<Relation> out;
  for (const auto& entry : doc) {
    const auto& start = require(entry, "start", text);
    const auto med_name = require_string(require(start, "properties", text), "name", text);
    const auto& end = require(entry, "end", text);
    const auto effect = std::string(trim(require_string(require(end, "properties", text), "name", text)));
    const auto& props = require(entry, "properties", text);

    Relation r;
    r.side_effect = effect;
    r.severity = optional_property(props, "severity", text);
    r.duration = optional_property(props, "duration", text);
    r.dosage = optional_property(props, "dosage", text);
    r.description = std::string(trim(require_string(props, "description", text)));
    if (r.side_effect.empty()) schema_error("empty side effect name", text);
    if (r.description.empty()) schema_error("empty description", text);

    try {
      r.medication = canonical_brand(med_name);
    } catch (const WhitelistError& e) {
      log::warn("extract", "relation_dropped",
                {{"medication", e.name()}, {"side_effect", r.side_effect}});
      continue;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string cached_complete(LLMProvider& provider, ReplayCache& cache, const std::string& model_id,
                            const std::string& prompt, const RetryPolicy& retry) {
  if (auto hit = cache.get(model_id, prompt)) return *std::move(hit);
  auto response = with_retry(retry, [&] { return provider.complete(model_id, prompt); });
  return cache.put(model_id, prompt, response);
}

std::vector<Relation> extract_relations(const RawItem& item, LLMProvider& provider,
                                        ReplayCache& cache, const PromptTemplate& tmpl,
                                        const ExtractOptions& options) {
  const auto prompt = build_prompt(tmpl, item.text);
  const auto response = cached_complete(provider, cache, options.model_id, prompt, options.retry);
  auto relations = parse_response(response);
  for (auto& r : relations) {
    r.source_id = item.id;
    r.source_date = item.created_at;
  }
  return relations;
}

void to_json(json& j, const ExtractedRow& row) {
  j = json(row.item);
  j["relations"] = row.relations;
}

void from_json(const json& j, ExtractedRow& row) {
  row.item = j.get<RawItem>();
  row.relations = j.at("relations").get<std::vector<Relation>>();
}

void to_json(json& j, const Reject& r) {
  j = json{{"source_id", r.source_id},
           {"error_kind", r.error_kind},
           {"response_excerpt", r.response_excerpt}};
}

namespace {

std::string excerpt(std::string_view s) {
  if (s.size() <= kExcerptBytes) return std::string(s);
  // back off to a UTF-8 boundary
  std::size_t n = kExcerptBytes;
  while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
  return std::string(s.substr(0, n));
}

}  // namespace

CorpusExtraction extract_corpus(std::span<const RawItem> items, LLMProvider& provider,
                                ReplayCache& cache, const PromptTemplate& tmpl,
                                const ExtractOptions& options, std::size_t max_in_flight) {
  std::vector<std::optional<ExtractedRow>> rows(items.size());
  std::vector<std::optional<Reject>> rejects(items.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      const auto& item = items[i];
      try {
        rows[i] = ExtractedRow{item, extract_relations(item, provider, cache, tmpl, options)};
      } catch (const ParseError& e) {
        log::warn("extract", "rejected", {{"id", item.id}, {"kind", "parse"}});
        rejects[i] = Reject{item.id, "parse", excerpt(e.offending_text())};
      } catch (const ProviderError& e) {
        log::warn("extract", "rejected", {{"id", item.id}, {"kind", "provider"}, {"error", e.what()}});
        rejects[i] = Reject{item.id, "provider", excerpt(e.what())};
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        abort.store(true);
        return;
      }
    }
  };

  const std::size_t n_threads = std::max<std::size_t>(1, std::min(max_in_flight, items.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  CorpusExtraction out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (rows[i]) out.rows.push_back(*std::move(rows[i]));
    if (rejects[i]) out.rejects.push_back(*std::move(rejects[i]));
  }
  return out;
}

std::vector<ExtractedRow> dedupe_records(std::vector<ExtractedRow> rows) {
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<ExtractedRow> out;
  for (auto& row : rows) {
    if (row.relations.empty()) continue;
    if (!seen.emplace(row.item.id, row.item.text).second) continue;
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace sekg
