#include "sekg/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sekg/csv.hpp"
#include "sekg/error.hpp"
#include "sekg/log.hpp"
#include "sekg/text.hpp"

namespace sekg {

using nlohmann::json;

const char* to_string(ItemKind kind) noexcept {
  switch (kind) {
    case ItemKind::Post: return "post";
    case ItemKind::Comment: return "comment";
    case ItemKind::Reply: return "reply";
  }
  return "post";
}

ItemKind item_kind_from_string(std::string_view s) {
  if (s == "post") return ItemKind::Post;
  if (s == "comment") return ItemKind::Comment;
  if (s == "reply") return ItemKind::Reply;
  throw ParseError("unknown item kind '" + std::string(s) + "'");
}

void to_json(json& j, const RawItem& item) {
  j = json{{"id", item.id},
           {"parent_id", item.parent_id ? json(*item.parent_id) : json(nullptr)},
           {"kind", to_string(item.kind)},
           {"author", item.author},
           {"created_at", item.created_at},
           {"score", item.score},
           {"text", item.text},
           {"subreddit", item.subreddit}};
}

void from_json(const json& j, RawItem& item) {
  item.id = j.at("id").get<std::string>();
  const auto pid = j.find("parent_id");
  if (pid != j.end() && !pid->is_null()) {
    item.parent_id = pid->get<std::string>();
  } else {
    item.parent_id.reset();
  }
  item.kind = item_kind_from_string(j.at("kind").get<std::string>());
  item.author = j.at("author").get<std::string>();
  item.created_at = j.at("created_at").get<EpochSeconds>();
  item.score = j.at("score").get<std::int64_t>();
  item.text = j.at("text").get<std::string>();
  item.subreddit = j.value("subreddit", std::string{});
  if ((item.kind == ItemKind::Post) != !item.parent_id.has_value()) {
    throw ParseError("item " + item.id + ": kind=post requires an absent parent_id and vice versa");
  }
}

namespace {

ThreadNode node_from_json(const json& j, const std::string& inherited_subreddit) {
  ThreadNode n;
  n.id = j.at("id").get<std::string>();
  if (auto pid = j.find("parent_id"); pid != j.end() && !pid->is_null()) {
    n.parent_id = pid->get<std::string>();
  }
  n.author = j.value("author", std::string{});
  n.created_at = j.at("created_at").get<EpochSeconds>();
  n.score = j.value("score", std::int64_t{0});
  n.text = j.value("text", std::string{});
  n.subreddit = j.value("subreddit", inherited_subreddit);

  const bool has_children = j.contains("children");
  const bool has_replies = j.contains("replies");
  if (has_children && has_replies) {
    throw ParseError("node " + n.id + " carries both 'children' and 'replies'");
  }
  if (has_children || has_replies) {
    for (const auto& child : j.at(has_children ? "children" : "replies")) {
      n.children.push_back(node_from_json(child, n.subreddit));
    }
  }
  return n;
}

void collect_ids(const ThreadNode& n, std::unordered_set<std::string>& ids) {
  if (!ids.insert(n.id).second) {
    throw StructuralError("duplicate node id '" + n.id + "'", n.id);
  }
  for (const auto& c : n.children) collect_ids(c, ids);
}

void flatten_into(const ThreadNode& n, int depth, const std::unordered_set<std::string>& ids,
                  std::vector<RawItem>& out) {
  if (depth == 0 && n.parent_id) {
    throw StructuralError("root post '" + n.id + "' carries a parent_id", n.id);
  }
  if (depth > 0) {
    if (!n.parent_id) throw StructuralError("node '" + n.id + "' has no parent_id", n.id);
    if (!ids.contains(*n.parent_id)) {
      throw StructuralError("node '" + n.id + "' references nonexistent parent '" + *n.parent_id + "'",
                            n.id);
    }
  }
  RawItem item;
  item.id = n.id;
  item.parent_id = n.parent_id;
  item.kind = depth == 0 ? ItemKind::Post : depth == 1 ? ItemKind::Comment : ItemKind::Reply;
  item.author = n.author;
  item.created_at = n.created_at;
  item.score = n.score;
  item.text = n.text;
  item.subreddit = n.subreddit;
  out.push_back(std::move(item));
  for (const auto& c : n.children) flatten_into(c, depth + 1, ids, out);
}

}  // namespace

ThreadTree thread_from_json(const json& j) { return node_from_json(j, {}); }

std::vector<RawItem> flatten_thread(const ThreadTree& tree) {
  std::unordered_set<std::string> ids;
  collect_ids(tree, ids);
  std::vector<RawItem> out;
  out.reserve(ids.size());
  flatten_into(tree, 0, ids, out);
  return out;
}

std::size_t node_count(const ThreadTree& tree) {
  std::size_t n = 1;
  for (const auto& c : tree.children) n += node_count(c);
  return n;
}

// --- filtering --------------------------------------------------------------

const char* to_string(FilterRule rule) noexcept {
  switch (rule) {
    case FilterRule::EmptyText: return "empty_text";
    case FilterRule::UrlOnly: return "url_only";
    case FilterRule::Bot: return "bot";
    case FilterRule::NonEnglish: return "non_english";
    case FilterRule::OutsideWindow: return "outside_window";
    case FilterRule::DeletedAuthor: return "deleted_author";
  }
  return "unknown";
}

std::vector<std::string> FilterConfig::default_bot_authors() {
  return {"AutoModerator", "B0tRank", "SaveVideo", "WikiSummarizer", "RemindMeBot"};
}

namespace {

constexpr std::array<std::string_view, 200> kStopwords = {
    "a",       "about",    "above",   "after",   "again",   "against",  "all",     "also",
    "am",      "an",       "and",     "any",     "are",     "aren't",   "around",  "as",
    "at",      "back",     "be",      "because", "been",    "before",   "being",   "below",
    "between", "both",     "but",     "by",      "can",     "can't",    "cannot",  "come",
    "could",   "couldn't", "day",     "did",     "didn't",  "do",       "does",    "doesn't",
    "doing",   "don't",    "down",    "during",  "each",    "even",     "ever",    "every",
    "feel",    "few",      "first",   "for",     "from",    "further",  "get",     "got",
    "had",     "hadn't",   "has",     "hasn't",  "have",    "haven't",  "having",  "he",
    "her",     "here",     "hers",    "herself", "him",     "himself",  "his",     "how",
    "i",       "i'd",      "i'll",    "i'm",     "i've",    "if",       "in",      "into",
    "is",      "isn't",    "it",      "it's",    "its",     "itself",   "just",    "know",
    "last",    "like",     "little",  "lot",     "made",    "make",     "many",    "may",
    "me",      "might",    "more",    "most",    "much",    "must",     "my",      "myself",
    "never",   "new",      "no",      "nor",     "not",     "now",      "of",      "off",
    "on",      "once",     "one",     "only",    "or",      "other",    "our",     "ours",
    "out",     "over",     "own",     "really",  "same",    "say",      "she",     "should",
    "since",   "so",       "some",    "still",   "such",    "take",     "than",    "that",
    "that's",  "the",      "their",   "theirs",  "them",    "then",     "there",   "these",
    "they",    "thing",    "think",   "this",    "those",   "though",   "through", "time",
    "to",      "too",      "two",     "under",   "until",   "up",       "us",      "very",
    "want",    "was",      "wasn't",  "way",     "we",      "week",     "well",    "went",
    "were",    "what",     "when",    "where",   "which",   "while",    "who",     "why",
    "will",    "with",     "without", "won't",   "would",   "year",     "yet",     "you",
    "your",    "yours",    "yourself", "already", "going",  "good",     "another", "actually",
    "better",  "almost",   "always",  "anything", "away",  "bit",      "dose",    "eat",
};

// strips punctuation around a token; keeps inner apostrophes
std::string normalize_token(std::string_view tok) {
  auto is_word = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80;
  };
  std::size_t b = 0, e = tok.size();
  while (b < e && !is_word(tok[b])) ++b;
  while (e > b && !is_word(tok[e - 1])) --e;
  std::string out = to_lower(tok.substr(b, e - b));
  // typographic apostrophe
  for (std::size_t p; (p = out.find("\xE2\x80\x99")) != std::string::npos;) out.replace(p, 3, "'");
  return out;
}

const std::set<std::string_view>& stopword_set() {
  static const std::set<std::string_view> s(kStopwords.begin(), kStopwords.end());
  return s;
}

const std::regex& url_regex() {
  static const std::regex re(R"((?:https?://|www\.)[^\s]+)", std::regex::icase);
  return re;
}

}  // namespace

std::span<const std::string_view> english_stopwords() noexcept { return kStopwords; }

bool looks_english(std::string_view text, double min_ratio, std::size_t min_tokens) {
  const auto tokens = split_whitespace(text);
  if (tokens.size() < min_tokens) return true;
  const auto& words = stopword_set();
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    if (words.contains(normalize_token(t))) ++hits;
  }
  return static_cast<double>(hits) >= min_ratio * static_cast<double>(tokens.size());
}

bool is_url_only(std::string_view text) {
  const auto tokens = split_whitespace(text);
  if (tokens.empty()) return false;
  return std::all_of(tokens.begin(), tokens.end(),
                     [](const std::string& t) { return std::regex_match(t, url_regex()); });
}

bool is_bot(const RawItem& item, std::span<const std::string> bot_authors) {
  if (ends_with_icase(item.author, "bot")) return true;
  for (const auto& b : bot_authors) {
    if (iequals(item.author, b)) return true;
  }
  return to_lower(item.text).find("i am a bot") != std::string::npos;
}

std::optional<FilterRule> failing_rule(const RawItem& item, const FilterConfig& config) {
  if (trim(item.text).empty()) return FilterRule::EmptyText;
  if (is_url_only(item.text)) return FilterRule::UrlOnly;
  if (is_bot(item, config.bot_authors)) return FilterRule::Bot;
  const bool english = config.is_english ? config.is_english(item.text) : looks_english(item.text);
  if (!english) return FilterRule::NonEnglish;
  if (config.window && !config.window->contains(item.created_at)) return FilterRule::OutsideWindow;
  if (!config.keep_deleted_authors && (item.author == "[deleted]" || item.author == "[removed]")) {
    return FilterRule::DeletedAuthor;
  }
  return std::nullopt;
}

FilterResult filter_items(std::span<const RawItem> items, const FilterConfig& config) {
  FilterResult result;
  for (const auto& item : items) {
    if (auto rule = failing_rule(item, config)) {
      log::info("ingest", "removed", {{"id", item.id}, {"rule", to_string(*rule)}});
      result.removed.push_back({item.id, *rule});
    } else {
      result.kept.push_back(item);
    }
  }
  return result;
}

// --- dumps ------------------------------------------------------------------

namespace {

template <typename F>
void for_each_json_line(const std::string& path, F&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(path + ": " + e.what(), lineno);
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what(), lineno);
    }
  }
}

}  // namespace

std::vector<RawItem> load_items_ndjson(const std::string& path) {
  std::vector<RawItem> items;
  for_each_json_line(path, [&](const json& j) { items.push_back(j.get<RawItem>()); });
  return items;
}

std::vector<ThreadTree> load_threads_ndjson(const std::string& path) {
  std::vector<ThreadTree> trees;
  for_each_json_line(path, [&](const json& j) { trees.push_back(thread_from_json(j)); });
  return trees;
}

void write_items_ndjson(std::ostream& out, std::span<const RawItem> items) {
  for (const auto& item : items) out << json(item).dump() << '\n';
}

// --- FAERS ------------------------------------------------------------------

std::optional<std::int64_t> FaersSummary::count_for(std::string_view preferred_term) const {
  for (const auto& r : rows) {
    if (r.preferred_term == preferred_term) return r.case_count;
  }
  return std::nullopt;
}

namespace {

std::int64_t parse_count(std::string_view field, std::size_t line, std::string_view what) {
  auto s = trim(field);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("non-integer " + std::string(what) + " '" + std::string(field) + "'", line);
  }
  if (v < 0) throw ParseError("negative " + std::string(what), line);
  return v;
}

}  // namespace

FaersSummary load_faers(std::istream& counts, std::istream& totals, std::string_view product) {
  FaersSummary summary;
  summary.product = std::string(trim(product));

  auto total_records = csv::read(totals);
  if (total_records.empty()) throw ParseError("FAERS totals file is empty");
  csv::Header th(total_records.front(), {"product", "total_reports", "as_of_quarter"});
  bool found = false;
  for (std::size_t i = 1; i < total_records.size(); ++i) {
    const auto& r = total_records[i];
    if (r.fields.size() != total_records.front().fields.size()) {
      throw ParseError("wrong field count in FAERS totals", r.line);
    }
    if (!iequals(trim(r.fields[th["product"]]), summary.product)) continue;
    if (found) throw ParseError("duplicate totals row for product " + summary.product, r.line);
    found = true;
    summary.product = std::string(trim(r.fields[th["product"]]));
    summary.total_reports = parse_count(r.fields[th["total_reports"]], r.line, "total_reports");
    summary.as_of_quarter = std::string(trim(r.fields[th["as_of_quarter"]]));
    if (summary.total_reports <= 0) throw ParseError("total_reports must be positive", r.line);
  }
  if (!found) throw ParseError("no FAERS totals row for product '" + summary.product + "'");

  auto records = csv::read(counts);
  if (records.empty()) throw ParseError("FAERS counts file is empty");
  csv::Header h(records.front(), {"product", "preferred_term", "case_count"});
  std::set<std::string> seen;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.fields.size() != records.front().fields.size()) {
      throw ParseError("wrong field count in FAERS counts", r.line);
    }
    if (!iequals(trim(r.fields[h["product"]]), summary.product)) continue;
    FaersRow row;
    row.preferred_term = std::string(trim(r.fields[h["preferred_term"]]));
    if (row.preferred_term.empty()) throw ParseError("empty preferred_term", r.line);
    row.case_count = parse_count(r.fields[h["case_count"]], r.line, "case_count");
    if (row.case_count > summary.total_reports) {
      throw ParseError("case_count " + std::to_string(row.case_count) + " exceeds total_reports " +
                           std::to_string(summary.total_reports),
                       r.line);
    }
    if (!seen.insert(row.preferred_term).second) {
      throw ParseError("duplicate preferred_term '" + row.preferred_term + "'", r.line);
    }
    summary.rows.push_back(std::move(row));
  }
  if (summary.rows.empty()) {
    log::warn("ingest", "faers_empty", {{"product", summary.product}});
  }
  return summary;
}

FaersSummary load_faers(const std::string& counts_path, const std::string& totals_path,
                        std::string_view product) {
  std::ifstream counts(counts_path, std::ios::binary);
  if (!counts) throw ParseError("cannot open " + counts_path);
  std::ifstream totals(totals_path, std::ios::binary);
  if (!totals) throw ParseError("cannot open " + totals_path);
  return load_faers(counts, totals, product);
}

std::vector<std::string> faers_products(const std::string& totals_path) {
  auto records = csv::read_file(totals_path);
  if (records.empty()) throw ParseError("FAERS totals file is empty");
  csv::Header th(records.front(), {"product"});
  std::vector<std::string> out;
  for (std::size_t i = 1; i < records.size(); ++i) {
    out.emplace_back(trim(records[i].fields.at(th["product"])));
  }
  return out;
}

void write_faers(const FaersSummary& summary, std::ostream& counts, std::ostream& totals) {
  csv::write_row(counts, {"product", "preferred_term", "case_count"});
  for (const auto& r : summary.rows) {
    csv::write_row(counts, {summary.product, r.preferred_term, std::to_string(r.case_count)});
  }
  csv::write_row(totals, {"product", "total_reports", "as_of_quarter"});
  csv::write_row(totals,
                 {summary.product, std::to_string(summary.total_reports), summary.as_of_quarter});
}

}  // namespace sekg
