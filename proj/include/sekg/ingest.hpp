#pragma once

// Thread-dump and FAERS-summary ingestion.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sekg {

using EpochSeconds = std::int64_t;

/// A post and its comment tree as scraped. Comments and replies share the
/// node type; their kind is derived from depth when flattened.
struct ThreadNode {
  std::string id;
  std::optional<std::string> parent_id;
  std::string author;
  EpochSeconds created_at = 0;
  std::int64_t score = 0;
  std::string text;
  std::string subreddit;
  std::vector<ThreadNode> children;
};

using ThreadTree = ThreadNode;

enum class ItemKind { Post, Comment, Reply };

const char* to_string(ItemKind kind) noexcept;
ItemKind item_kind_from_string(std::string_view s);

struct RawItem {
  std::string id;
  std::optional<std::string> parent_id;
  ItemKind kind = ItemKind::Post;
  std::string author;
  EpochSeconds created_at = 0;
  std::int64_t score = 0;
  std::string text;
  std::string subreddit;

  bool operator==(const RawItem&) const = default;
};

void to_json(nlohmann::json& j, const RawItem& item);
void from_json(const nlohmann::json& j, RawItem& item);
ThreadTree thread_from_json(const nlohmann::json& j);

/// Depth-first, document-order flattening. Depth 0 is a post, depth 1 a
/// comment, anything deeper a reply.
/// Throws StructuralError on duplicate ids, dangling or missing parent ids.
std::vector<RawItem> flatten_thread(const ThreadTree& tree);

std::size_t node_count(const ThreadTree& tree);

// --- filtering --------------------------------------------------------------

/// Inclusive [start, end] in epoch seconds UTC.
struct TimeWindow {
  EpochSeconds start = 0;
  EpochSeconds end = 0;

  bool contains(EpochSeconds t) const noexcept { return t >= start && t <= end; }
};

/// Returns true when the text is acceptably English.
using LanguageClassifier = std::function<bool(std::string_view)>;

enum class FilterRule { EmptyText, UrlOnly, Bot, NonEnglish, OutsideWindow, DeletedAuthor };

const char* to_string(FilterRule rule) noexcept;

struct FilterConfig {
  std::vector<std::string> bot_authors = default_bot_authors();
  LanguageClassifier is_english;  // empty: stopword heuristic
  std::optional<TimeWindow> window;
  bool keep_deleted_authors = true;

  static std::vector<std::string> default_bot_authors();
};

struct Removal {
  std::string id;
  FilterRule rule;

  bool operator==(const Removal&) const = default;
};

struct FilterResult {
  std::vector<RawItem> kept;
  std::vector<Removal> removed;
};

/// The bundled 200-word English stopword list, lowercase.
std::span<const std::string_view> english_stopwords() noexcept;

/// Default language heuristic: texts with at least `min_tokens` whitespace
/// tokens need at least `min_ratio` of them in the stopword list.
bool looks_english(std::string_view text, double min_ratio = 0.2, std::size_t min_tokens = 5);

bool is_url_only(std::string_view text);
bool is_bot(const RawItem& item, std::span<const std::string> bot_authors);

/// First rule the item fails, checked in declaration order of FilterRule.
std::optional<FilterRule> failing_rule(const RawItem& item, const FilterConfig& config);

/// Keeps the subsequence that passes every rule; each removal is logged.
FilterResult filter_items(std::span<const RawItem> items, const FilterConfig& config);

// --- dumps ------------------------------------------------------------------

std::vector<RawItem> load_items_ndjson(const std::string& path);
std::vector<ThreadTree> load_threads_ndjson(const std::string& path);
void write_items_ndjson(std::ostream& out, std::span<const RawItem> items);

// --- FAERS ------------------------------------------------------------------

struct FaersRow {
  std::string preferred_term;
  std::int64_t case_count = 0;

  bool operator==(const FaersRow&) const = default;
};

struct FaersSummary {
  std::string product;
  std::vector<FaersRow> rows;
  std::int64_t total_reports = 0;
  std::string as_of_quarter;

  bool operator==(const FaersSummary&) const = default;

  std::optional<std::int64_t> count_for(std::string_view preferred_term) const;
};

/// Reads the rows for `product` from a `product,preferred_term,case_count`
/// CSV and its `product,total_reports,as_of_quarter` sidecar. Product names
/// match case-insensitively. Errors carry the offending line number.
FaersSummary load_faers(const std::string& counts_path, const std::string& totals_path,
                        std::string_view product);
FaersSummary load_faers(std::istream& counts, std::istream& totals, std::string_view product);

/// Every product listed in a totals sidecar, in file order.
std::vector<std::string> faers_products(const std::string& totals_path);

void write_faers(const FaersSummary& summary, std::ostream& counts, std::ostream& totals);

}  // namespace sekg
