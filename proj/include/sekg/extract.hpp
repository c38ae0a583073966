#pragma once

// LLM-driven relation extraction: prompt rendering, response parsing,
// cache-first provider calls, and record deduplication.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sekg/error.hpp"
#include "sekg/ingest.hpp"
#include "sekg/provider.hpp"
#include "sekg/replay_cache.hpp"

namespace sekg {

enum class Brand { Ozempic, Wegovy, Rybelsus, UnspecifiedBrands };

/// Display name: "Ozempic", "Wegovy", "Rybelsus", "Unspecified Brands".
const char* to_string(Brand brand) noexcept;

/// Inverse of to_string (exact match). Throws ParseError.
Brand brand_from_string(std::string_view name);

std::span<const Brand> all_brands() noexcept;

/// FAERS product name searched for a brand; unspecified maps to "Semaglutide".
const char* faers_product(Brand brand) noexcept;

class WhitelistError : public Error {
 public:
  explicit WhitelistError(const std::string& name)
      : Error(ErrorKind::Parse, "medication '" + name + "' is not an admissible semaglutide product"),
        name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Case-insensitive, whitespace-trimmed brand lookup; "semaglutide" maps to
/// UnspecifiedBrands. Anything else throws WhitelistError.
Brand canonical_brand(std::string_view name);

struct Relation {
  Brand medication = Brand::UnspecifiedBrands;
  std::string side_effect;
  std::optional<std::string> severity;
  std::optional<std::string> duration;
  std::optional<std::string> dosage;
  std::string description;
  std::string source_id;
  EpochSeconds source_date = 0;

  bool operator==(const Relation&) const = default;
};

void to_json(nlohmann::json& j, const Relation& r);
void from_json(const nlohmann::json& j, Relation& r);

/// The extraction prompt. Must contain a `{text}` placeholder.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text);

  /// Throws ConfigError when the asset is missing or lacks `{text}`.
  static PromptTemplate load(const std::string& path);

  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

/// Substitutes `text` for `{text}` in one pass. Throws ArgumentError on
/// empty text.
std::string build_prompt(const PromptTemplate& tmpl, std::string_view text);

/// Removes a surrounding Markdown code fence (```json ... ```), if any.
std::string_view strip_code_fence(std::string_view text);

/// Parses a raw provider response into relations (source fields left empty).
/// "null" yields no relations. Relations naming a non-admissible medication
/// are dropped and logged. Throws ParseError carrying the response on
/// malformed JSON or schema violations.
std::vector<Relation> parse_response(std::string_view text);

struct ExtractOptions {
  std::string model_id = "gpt-4o-mini";
  RetryPolicy retry;
};

/// Cache-first completion: returns the cached response or calls the provider
/// (with retries) and records the round trip before returning.
std::string cached_complete(LLMProvider& provider, ReplayCache& cache, const std::string& model_id,
                            const std::string& prompt, const RetryPolicy& retry);

/// build_prompt -> cached provider call -> parse_response, stamping
/// source_id/source_date from the item.
std::vector<Relation> extract_relations(const RawItem& item, LLMProvider& provider,
                                        ReplayCache& cache, const PromptTemplate& tmpl,
                                        const ExtractOptions& options);

struct ExtractedRow {
  RawItem item;
  std::vector<Relation> relations;

  bool operator==(const ExtractedRow&) const = default;
};

void to_json(nlohmann::json& j, const ExtractedRow& row);
void from_json(const nlohmann::json& j, ExtractedRow& row);

struct Reject {
  std::string source_id;
  std::string error_kind;  // "parse" or "provider"
  std::string response_excerpt;

  bool operator==(const Reject&) const = default;
};

void to_json(nlohmann::json& j, const Reject& r);

struct CorpusExtraction {
  std::vector<ExtractedRow> rows;  // input order, including rows with no relations
  std::vector<Reject> rejects;     // input order
};

/// Runs extract_relations over every item with at most `max_in_flight`
/// concurrent provider calls. Parse and provider failures are quarantined as
/// rejects; configuration errors abort the whole run.
CorpusExtraction extract_corpus(std::span<const RawItem> items, LLMProvider& provider,
                                ReplayCache& cache, const PromptTemplate& tmpl,
                                const ExtractOptions& options, std::size_t max_in_flight = 4);

/// Drops rows without relations, then keeps the first occurrence of each
/// (id, text) pair, preserving order.
std::vector<ExtractedRow> dedupe_records(std::vector<ExtractedRow> rows);

}  // namespace sekg
