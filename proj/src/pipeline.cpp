#include "sekg/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sekg/csv.hpp"
#include "sekg/error.hpp"
#include "sekg/log.hpp"
#include "sekg/normalize.hpp"
#include "sekg/replay_cache.hpp"
#include "sekg/stats.hpp"
#include "sekg/text.hpp"

namespace sekg {

using nlohmann::json;

const std::map<std::string, std::string>& config_defaults() {
  static const std::map<std::string, std::string> defaults = {
      {"input.threads", ""},
      {"input.threads_format", "threads"},
      {"input.faers_counts", ""},
      {"input.faers_totals", ""},
      {"input.overrides", ""},
      {"input.matchmap", ""},
      {"input.annotations", ""},
      {"ingest.window_start", ""},
      {"ingest.window_end", ""},
      {"ingest.keep_deleted_authors", "true"},
      {"ingest.bot_authors", ""},
      {"extract.endpoint", ""},
      {"extract.api_key_env", "LLM_API_KEY"},
      {"extract.model", "gpt-4o-mini"},
      {"extract.prompt", ""},
      {"extract.max_in_flight", "4"},
      {"extract.timeout_ms", "60000"},
      {"normalize.endpoint", ""},
      {"normalize.api_key_env", "EMBED_API_KEY"},
      {"normalize.model", "all-MiniLM-L6-v2"},
      {"normalize.batch_size", "64"},
      {"normalize.theta", "0.9"},
      {"normalize.cluster_model", "gpt-4o-mini"},
      {"normalize.cluster_prompt", ""},
      {"normalize.timeout_ms", "60000"},
      {"retry.attempts", "3"},
      {"retry.initial_backoff_ms", "1000"},
      {"retry.multiplier", "2"},
      {"graph.base_size", "6"},
      {"graph.base_thickness", "1.5"},
      {"graph.max_examples", "5"},
      {"stats.brands", "Ozempic,Wegovy,Rybelsus,Unspecified Brands"},
      {"eval.fraction", "0.05"},
      {"eval.seed", "0"},
      {"eval.annotators", "3"},
      {"paths.cache_dir", "cache"},
      {"paths.output_dir", "out"},
  };
  return defaults;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto s = trim(text);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string s(trim(text));
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a real number, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto s = to_lower(trim(text));
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& part : split(text, ',')) {
    auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

fs::path existing_file(const fs::path& base, const std::string& key, const std::string& value) {
  const auto p = resolve(base, value);
  if (!fs::is_regular_file(p)) throw ConfigError(key + ": file not found: " + p.string());
  return p;
}

// An empty value selects the bundled asset; it stays empty in the hashed
// values so the config hash does not depend on the install location.
fs::path asset_or_file(const fs::path& base, const std::string& key, const std::string& value, const char* asset) {
  if (trim(value).empty()) return existing_file(fs::path(SEKG_ASSET_DIR), key, asset);
  return existing_file(base, key, value);
}

}  // namespace

EpochSeconds parse_timestamp(std::string_view text, bool end_of_day) {
  const std::string s(trim(text));
  const std::size_t digits_from = !s.empty() && s[0] == '-' ? 1 : 0;
  if (s.size() > digits_from && s.find_first_not_of("0123456789", digits_from) == std::string::npos) {
    return parse_number<EpochSeconds>("timestamp", s);
  }
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char tail = 0;
  bool has_time = false;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2dZ%c", &y, &mo, &d, &h, &mi, &se, &tail) == 6 &&
      s.size() == 20) {
    has_time = true;
  } else if (!(std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &y, &mo, &d, &tail) == 3 && s.size() == 10)) {
    throw ConfigError("unrecognized timestamp '" + s + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59) throw ConfigError("invalid date '" + s + "'");
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  EpochSeconds t = static_cast<EpochSeconds>(days) * 86400;
  if (has_time) {
    t += h * 3600 + mi * 60 + se;
  } else if (end_of_day) {
    t += 86399;
  }
  return t;
}

PipelineConfig make_config(std::map<std::string, std::string> values, const fs::path& base_dir) {
  const auto& defaults = config_defaults();
  for (const auto& [k, v] : values) {
    if (!defaults.contains(k)) throw ConfigError("unknown configuration key '" + k + "'");
  }
  for (const auto& [k, v] : defaults) values.try_emplace(k, v);
  auto get = [&](const char* key) -> const std::string& { return values.at(key); };

  PipelineConfig c;
  c.base_dir = base_dir;
  c.values = values;

  for (const char* key : {"input.threads", "input.faers_counts", "input.faers_totals"}) {
    if (trim(get(key)).empty()) throw ConfigError(std::string(key) + " is required");
  }
  c.threads = existing_file(base_dir, "input.threads", get("input.threads"));
  const auto format = to_lower(trim(get("input.threads_format")));
  if (format != "threads" && format != "items") {
    throw ConfigError("input.threads_format must be 'threads' or 'items'");
  }
  c.threads_are_trees = format == "threads";
  c.faers_counts = existing_file(base_dir, "input.faers_counts", get("input.faers_counts"));
  c.faers_totals = existing_file(base_dir, "input.faers_totals", get("input.faers_totals"));
  for (auto [key, field] : {std::pair{"input.overrides", &c.overrides}, std::pair{"input.matchmap", &c.matchmap},
                            std::pair{"input.annotations", &c.annotations}}) {
    if (!trim(get(key)).empty()) *field = existing_file(base_dir, key, get(key));
  }

  const bool has_start = !trim(get("ingest.window_start")).empty();
  const bool has_end = !trim(get("ingest.window_end")).empty();
  if (has_start != has_end) throw ConfigError("ingest.window_start and ingest.window_end must be set together");
  if (has_start) {
    TimeWindow w{parse_timestamp(get("ingest.window_start")), parse_timestamp(get("ingest.window_end"), true)};
    if (w.start > w.end) throw ConfigError("ingest.window_start is after ingest.window_end");
    c.window = w;
  }
  c.keep_deleted_authors = parse_bool("ingest.keep_deleted_authors", get("ingest.keep_deleted_authors"));
  c.bot_authors = parse_list(get("ingest.bot_authors"));
  if (c.bot_authors.empty()) c.bot_authors = FilterConfig::default_bot_authors();

  auto timeout = [&](const char* key) {
    const auto ms = parse_number<std::int64_t>(key, get(key));
    if (ms <= 0) throw ConfigError(std::string(key) + " must be positive");
    return std::chrono::milliseconds{ms};
  };
  c.llm = HttpEndpoint{std::string(trim(get("extract.endpoint"))), std::string(trim(get("extract.api_key_env"))),
                       timeout("extract.timeout_ms")};
  c.llm_model = std::string(trim(get("extract.model")));
  c.extraction_prompt = asset_or_file(base_dir, "extract.prompt", get("extract.prompt"), "extraction_prompt.txt");
  c.max_in_flight = parse_number<std::size_t>("extract.max_in_flight", get("extract.max_in_flight"));
  if (c.max_in_flight == 0) throw ConfigError("extract.max_in_flight must be at least 1");

  c.embedder = HttpEndpoint{std::string(trim(get("normalize.endpoint"))),
                            std::string(trim(get("normalize.api_key_env"))), timeout("normalize.timeout_ms")};
  c.embed_model = std::string(trim(get("normalize.model")));
  c.embed_batch = parse_number<std::size_t>("normalize.batch_size", get("normalize.batch_size"));
  if (c.embed_batch == 0) throw ConfigError("normalize.batch_size must be at least 1");
  c.theta = parse_real("normalize.theta", get("normalize.theta"));
  if (!(c.theta > 0.0 && c.theta <= 1.0)) throw ConfigError("normalize.theta must lie in (0, 1]");
  c.cluster_model = std::string(trim(get("normalize.cluster_model")));
  c.cluster_prompt =
      asset_or_file(base_dir, "normalize.cluster_prompt", get("normalize.cluster_prompt"), "cluster_prompt.txt");

  c.retry.attempts = parse_number<int>("retry.attempts", get("retry.attempts"));
  if (c.retry.attempts < 1) throw ConfigError("retry.attempts must be at least 1");
  c.retry.initial_backoff =
      std::chrono::milliseconds{parse_number<std::int64_t>("retry.initial_backoff_ms", get("retry.initial_backoff_ms"))};
  c.retry.multiplier = parse_real("retry.multiplier", get("retry.multiplier"));
  if (c.retry.initial_backoff.count() < 0 || c.retry.multiplier < 1.0) {
    throw ConfigError("retry backoff must be non-negative with multiplier >= 1");
  }

  c.render.base_size = parse_real("graph.base_size", get("graph.base_size"));
  c.render.base_thickness = parse_real("graph.base_thickness", get("graph.base_thickness"));
  try {
    c.render.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("graph: ") + e.what());
  }
  c.max_examples = parse_number<std::size_t>("graph.max_examples", get("graph.max_examples"));

  for (const auto& name : parse_list(get("stats.brands"))) {
    try {
      c.brands.push_back(brand_from_string(name));
    } catch (const ParseError&) {
      throw ConfigError("stats.brands: unknown brand '" + name + "'");
    }
  }

  c.eval_fraction = parse_real("eval.fraction", get("eval.fraction"));
  if (!(c.eval_fraction > 0.0 && c.eval_fraction <= 1.0)) throw ConfigError("eval.fraction must lie in (0, 1]");
  c.eval_seed = parse_number<std::uint64_t>("eval.seed", get("eval.seed"));
  c.annotators = parse_number<std::size_t>("eval.annotators", get("eval.annotators"));

  c.cache_dir = resolve(base_dir, get("paths.cache_dir"));
  c.output_dir = resolve(base_dir, get("paths.output_dir"));
  return c;
}

PipelineConfig load_config(const fs::path& file, std::span<const std::string> overrides) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(file.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  std::map<std::string, std::string> values;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' is outside any section");
    for (const auto& [key, leaf] : body) values[section + "." + key] = std::string(trim(leaf.data()));
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be section.key=value, got '" + o + "'");
    values[std::string(trim(std::string_view(o).substr(0, eq)))] = std::string(trim(std::string_view(o).substr(eq + 1)));
  }
  return make_config(std::move(values), fs::absolute(file).parent_path());
}

std::string config_hash(const PipelineConfig& config) {
  std::string text;
  for (const auto& [k, v] : config.values) text += k + "=" + v + "\n";
  return sha256_hex(text);
}

// --- stages -----------------------------------------------------------------

namespace {

// Prefixes the stage name while keeping the concrete type, so callers can
// still catch ConfigError and friends.
[[noreturn]] void rethrow_in_stage(const char* stage, const Error& e) {
  const std::string what = std::string(stage) + ": " + e.what();
  if (const auto* p = dynamic_cast<const ParseError*>(&e)) throw ParseError(what, 0, p->offending_text());
  if (const auto* s = dynamic_cast<const StructuralError*>(&e)) throw StructuralError(what, s->offending_id());
  if (const auto* p = dynamic_cast<const ProviderError*>(&e)) throw ProviderError(what, p->retryable());
  switch (e.kind()) {
    case ErrorKind::Config: throw ConfigError(what);
    case ErrorKind::Domain: throw DomainError(what);
    case ErrorKind::Argument: throw ArgumentError(what);
    default: throw Error(e.kind(), what);
  }
}

}  // namespace

const char* to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::Ingest: return "ingest";
    case Stage::Extract: return "extract";
    case Stage::Normalize: return "normalize";
    case Stage::Graph: return "graph";
    case Stage::Stats: return "stats";
  }
  return "ingest";
}

std::span<const Stage> all_stages() noexcept {
  static constexpr Stage stages[] = {Stage::Ingest, Stage::Extract, Stage::Normalize, Stage::Graph, Stage::Stats};
  return stages;
}

std::string brand_slug(Brand b) {
  std::string s = to_lower(to_string(b));
  std::replace(s.begin(), s.end(), ' ', '_');
  return s;
}

std::vector<std::string> stage_artifacts(Stage stage, const PipelineConfig& config) {
  switch (stage) {
    case Stage::Ingest: return {"items.ndjson", "ingest_removed.csv"};
    case Stage::Extract: return {"records.ndjson", "relations.ndjson", "rejects.ndjson"};
    case Stage::Normalize: return {"canonical_map.csv", "records_normalized.ndjson"};
    case Stage::Graph: return {"graph.json"};
    case Stage::Stats: {
      std::vector<std::string> out{"comparison_all.csv"};
      for (Brand b : config.brands) out.push_back("comparison_" + brand_slug(b) + ".csv");
      out.push_back("unmatched.csv");
      return out;
    }
  }
  return {};
}

std::size_t artifact_rows(const fs::path& path) {
  const auto text = read_file(path.string());
  if (path.extension() == ".csv") {
    std::istringstream in(text);
    const auto records = csv::read(in);
    return records.empty() ? 0 : records.size() - 1;
  }
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

namespace {

template <typename T>
std::string ndjson(std::span<const T> rows) {
  std::string out;
  for (const auto& r : rows) {
    out += json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<ExtractedRow> load_rows(const fs::path& path) {
  std::vector<ExtractedRow> rows;
  std::istringstream in(read_file(path.string()));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(json::parse(line).get<ExtractedRow>());
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), n);
    }
  }
  return rows;
}

std::vector<Relation> flatten(std::span<const ExtractedRow> rows) {
  std::vector<Relation> out;
  for (const auto& r : rows) out.insert(out.end(), r.relations.begin(), r.relations.end());
  return out;
}

std::string relation_id(const ExtractedRow& row, std::size_t index) {
  return row.item.id + "#" + std::to_string(index);
}

void require_artifact(const fs::path& p, Stage producer) {
  if (!fs::exists(p)) {
    throw ConfigError("missing artifact " + p.filename().string() + "; run the " + to_string(producer) +
                      " stage first");
  }
}

std::string timestamp_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)),
      owned_llm_(std::make_unique<HttpLLMProvider>(config_.llm)),
      owned_embedder_(std::make_unique<HttpEmbeddingProvider>(config_.embedder)),
      llm_(owned_llm_.get()),
      embedder_(owned_embedder_.get()) {}

Pipeline::Pipeline(PipelineConfig config, LLMProvider& llm, EmbeddingProvider& embedder)
    : config_(std::move(config)), llm_(&llm), embedder_(&embedder) {}

Pipeline::~Pipeline() = default;

void Pipeline::stage_ingest(json& counts) {
  std::vector<RawItem> items;
  if (config_.threads_are_trees) {
    for (const auto& tree : load_threads_ndjson(config_.threads.string())) {
      auto flat = flatten_thread(tree);
      items.insert(items.end(), flat.begin(), flat.end());
    }
  } else {
    items = load_items_ndjson(config_.threads.string());
  }

  FilterConfig fc;
  fc.bot_authors = config_.bot_authors;
  fc.window = config_.window;
  fc.keep_deleted_authors = config_.keep_deleted_authors;
  const auto result = filter_items(items, fc);

  std::ostringstream removed;
  csv::write_row(removed, {"id", "rule"});
  json by_rule = json::object();
  for (const auto& r : result.removed) {
    csv::write_row(removed, {r.id, to_string(r.rule)});
    by_rule[to_string(r.rule)] = by_rule.value(to_string(r.rule), 0) + 1;
  }
  write_file_atomic(artifact("items.ndjson").string(), ndjson<RawItem>(result.kept));
  write_file_atomic(artifact("ingest_removed.csv").string(), removed.str());

  counts = {{"input_items", items.size()},
            {"kept", result.kept.size()},
            {"removed", result.removed.size()},
            {"removed_by_rule", by_rule}};
}

void Pipeline::stage_extract(json& counts) {
  require_artifact(artifact("items.ndjson"), Stage::Ingest);
  const auto items = load_items_ndjson(artifact("items.ndjson").string());
  const auto tmpl = PromptTemplate::load(config_.extraction_prompt.string());
  ReplayCache cache(config_.cache_dir);
  ExtractOptions opts{config_.llm_model, config_.retry};

  auto corpus = extract_corpus(items, *llm_, cache, tmpl, opts, config_.max_in_flight);
  const std::size_t with_relations = static_cast<std::size_t>(
      std::count_if(corpus.rows.begin(), corpus.rows.end(), [](const auto& r) { return !r.relations.empty(); }));
  const auto records = dedupe_records(std::move(corpus.rows));
  const auto relations = flatten(records);
  log::info("extract", "cache", {{"hits", std::to_string(cache.hits())}, {"misses", std::to_string(cache.misses())}});

  write_file_atomic(artifact("records.ndjson").string(), ndjson<ExtractedRow>(records));
  write_file_atomic(artifact("relations.ndjson").string(), ndjson<Relation>(relations));
  write_file_atomic(artifact("rejects.ndjson").string(), ndjson<Reject>(corpus.rejects));

  counts = {{"items", items.size()},
            {"items_with_relations", with_relations},
            {"records", records.size()},
            {"relations", relations.size()},
            {"rejects", corpus.rejects.size()}};
}

void Pipeline::stage_normalize(json& counts) {
  require_artifact(artifact("records.ndjson"), Stage::Extract);
  auto rows = load_rows(artifact("records.ndjson"));
  const auto relations = flatten(rows);
  const auto freq = term_frequencies(relations);

  std::vector<std::string> terms;
  for (const auto& [t, n] : freq) terms.push_back(t);
  sort_by_frequency(terms, freq);

  ReplayCache cache(config_.cache_dir);
  OverrideFile overrides;
  if (config_.overrides) overrides = OverrideFile::load(config_.overrides->string());

  CanonicalMap map;
  std::size_t residual_count = 0;
  std::size_t llm_keys = 0;
  if (!terms.empty()) {
    const auto embeddings =
        embed_terms(terms, *embedder_, cache, EmbedOptions{config_.embed_model, config_.retry, config_.embed_batch});
    const auto grouping = group_by_threshold(embeddings, config_.theta, freq);
    residual_count = grouping.residual.size();
    const auto prompt = ClusterPrompt::load(config_.cluster_prompt.string());
    const auto keys = llm_cluster(grouping.residual, *llm_, cache, prompt,
                                  ClusterOptions{config_.cluster_model, config_.retry});
    std::set<std::string> distinct;
    for (const auto& [t, k] : keys) distinct.insert(k);
    llm_keys = distinct.size();
    map = build_canonical_map(grouping, keys);
  }

  std::set<std::string> canonical;
  for (auto& row : rows) {
    row.relations = apply_canonical_map(row.relations, map, overrides);
    for (const auto& r : row.relations) canonical.insert(r.side_effect);
  }

  const auto audit = effective_rows(map, overrides);
  std::ostringstream csv_out;
  write_canonical_csv(csv_out, audit);
  write_file_atomic(artifact("canonical_map.csv").string(), csv_out.str());
  write_file_atomic(artifact("records_normalized.ndjson").string(), ndjson<ExtractedRow>(rows));

  counts = {{"raw_terms", terms.size()},
            {"residual", residual_count},
            {"llm_keys", llm_keys},
            {"canonical_terms", canonical.size()},
            {"canonical_map_rows", audit.size()},
            {"records", rows.size()},
            {"relations", relations.size()}};
}

void Pipeline::stage_graph(json& counts) {
  require_artifact(artifact("records_normalized.ndjson"), Stage::Normalize);
  const auto relations = flatten(load_rows(artifact("records_normalized.ndjson")));
  const auto kg = build_graph(relations, config_.max_examples);
  check_invariants(kg);
  write_file_atomic(artifact("graph.json").string(), dump_document(export_viewer_document(kg, config_.render)));
  counts = {{"relations", kg.relation_count()},
            {"medication_nodes", kg.medications.size()},
            {"side_effect_nodes", kg.side_effects.size()},
            {"links", kg.edges.size()}};
}

void Pipeline::stage_stats(json& counts) {
  require_artifact(artifact("records_normalized.ndjson"), Stage::Normalize);
  const auto rows = load_rows(artifact("records_normalized.ndjson"));

  std::vector<FaersSummary> faers;
  for (const auto& product : faers_products(config_.faers_totals.string())) {
    faers.push_back(load_faers(config_.faers_counts.string(), config_.faers_totals.string(), product));
  }
  const MatchMap match = config_.matchmap ? MatchMap::load(config_.matchmap->string()) : MatchMap{};

  std::ostringstream unmatched;
  csv::write_row(unmatched, {"brand", "source", "term"});
  counts = json::object();

  auto run_one = [&](std::optional<Brand> brand, const std::string& file) {
    const std::string label = brand ? to_string(*brand) : "All";
    const auto reddit = reddit_counts(rows, brand);
    Comparison cmp;
    if (reddit.total == 0 && !match.pairs().empty()) {
      // without crowd posts no frequency is defined; the file keeps its header
      if (brand) {
        const char* product = faers_product(*brand);
        if (std::none_of(faers.begin(), faers.end(), [&](const auto& s) { return iequals(s.product, product); })) {
          throw ConfigError(std::string("no FAERS data for product '") + product + "'");
        }
      }
      log::warn("stats", "no_posts", {{"brand", label}});
    } else {
      cmp = compare(reddit, faers, match, brand);
    }
    std::ostringstream out;
    write_comparison_csv(out, cmp.rows);
    write_file_atomic(artifact(file).string(), out.str());
    for (const auto& t : cmp.unmatched_reddit) csv::write_row(unmatched, {label, "reddit", t});
    for (const auto& t : cmp.unmatched_fda) csv::write_row(unmatched, {label, "fda", t});
    counts[file] = {{"rows", cmp.rows.size()},
                    {"posts", reddit.total},
                    {"unmatched_reddit", cmp.unmatched_reddit.size()},
                    {"unmatched_fda", cmp.unmatched_fda.size()}};
  };

  run_one(std::nullopt, "comparison_all.csv");
  for (Brand b : config_.brands) run_one(b, "comparison_" + brand_slug(b) + ".csv");
  write_file_atomic(artifact("unmatched.csv").string(), unmatched.str());
}

json Pipeline::read_manifest() const {
  const auto p = artifact("manifest.json");
  if (!fs::exists(p)) return json::object();
  try {
    return json::parse(read_file(p.string()));
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest.json: ") + e.what());
  }
}

void Pipeline::record_stage(Stage stage, json counts, double seconds) {
  const auto hash = config_hash(config_);
  json manifest = read_manifest();
  if (manifest.value("config_hash", hash) != hash) {
    log::warn(to_string(stage), "manifest_reset", {{"reason", "config changed"}});
    manifest = json::object();
  }
  manifest["config_hash"] = hash;

  json artifacts = json::object();
  for (const auto& name : stage_artifacts(stage, config_)) {
    const auto p = artifact(name);
    json entry = {{"sha256", sha256_hex(read_file(p.string()))}};
    if (p.extension() != ".json") entry["rows"] = artifact_rows(p);
    artifacts[name] = std::move(entry);
  }
  manifest["stages"][to_string(stage)] = {{"counts", std::move(counts)}, {"artifacts", std::move(artifacts)}};
  write_file_atomic(artifact("manifest.json").string(), manifest.dump(2) + "\n");

  // wall-clock data lives apart from the manifest so that bundles stay byte-stable
  json times = json::object();
  const auto tp = artifact("run_times.json");
  if (fs::exists(tp)) {
    try {
      times = json::parse(read_file(tp.string()));
    } catch (const json::exception&) {
      times = json::object();
    }
  }
  times[to_string(stage)] = {{"finished_at", timestamp_now()}, {"seconds", seconds}};
  write_file_atomic(tp.string(), times.dump(2) + "\n");
}

void Pipeline::run_stage(Stage stage) {
  const char* name = to_string(stage);
  log::info(name, "start");
  const auto t0 = std::chrono::steady_clock::now();
  json counts;
  try {
    fs::create_directories(config_.output_dir);
    switch (stage) {
      case Stage::Ingest: stage_ingest(counts); break;
      case Stage::Extract: stage_extract(counts); break;
      case Stage::Normalize: stage_normalize(counts); break;
      case Stage::Graph: stage_graph(counts); break;
      case Stage::Stats: stage_stats(counts); break;
    }
  } catch (const Error& e) {
    log::event(spdlog::level::err, name, "failed", {{"kind", to_string(e.kind())}, {"error", e.what()}});
    rethrow_in_stage(name, e);
  } catch (const fs::filesystem_error& e) {
    throw ConfigError(std::string(name) + ": " + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  record_stage(stage, std::move(counts), secs);
  log::info(name, "done", {{"seconds", std::to_string(secs)}});
}

ArtifactBundle Pipeline::run(bool resume) {
  ArtifactBundle bundle;
  bundle.output_dir = config_.output_dir;
  bool skipping = resume;
  if (resume) {
    const auto manifest = read_manifest();
    if (manifest.contains("config_hash") && manifest["config_hash"] != config_hash(config_)) {
      throw ConfigError("--resume: existing artifacts were produced by a different configuration");
    }
  } else if (fs::exists(artifact("manifest.json"))) {
    fs::remove(artifact("manifest.json"));
  }
  for (Stage s : all_stages()) {
    if (skipping) {
      const auto names = stage_artifacts(s, config_);
      const bool complete = std::all_of(names.begin(), names.end(),
                                        [&](const std::string& n) { return fs::exists(artifact(n)); }) &&
                            read_manifest().contains("stages") && read_manifest()["stages"].contains(to_string(s));
      if (complete) {
        log::info(to_string(s), "skipped", {{"reason", "resume"}});
        bundle.skipped.push_back(s);
        continue;
      }
      skipping = false;
    }
    run_stage(s);
    bundle.executed.push_back(s);
  }
  bundle.manifest = read_manifest();
  return bundle;
}

std::size_t Pipeline::sample_eval() {
  require_artifact(artifact("records.ndjson"), Stage::Extract);
  const auto rows = load_rows(artifact("records.ndjson"));
  const auto sample = sample_for_eval<ExtractedRow>(rows, config_.eval_fraction, config_.eval_seed);

  std::ostringstream out;
  csv::write_row(out, {"relation_id", "source_id", "medication", "side_effect", "severity", "duration", "dosage",
                       "description", "text"});
  for (const auto& row : sample) {
    for (std::size_t i = 0; i < row.relations.size(); ++i) {
      const auto& r = row.relations[i];
      csv::write_row(out, {relation_id(row, i), row.item.id, to_string(r.medication), r.side_effect,
                           r.severity.value_or(""), r.duration.value_or(""), r.dosage.value_or(""), r.description,
                           row.item.text});
    }
  }
  fs::create_directories(config_.output_dir);
  write_file_atomic(artifact("eval_sample.csv").string(), out.str());
  log::info("eval", "sampled", {{"records", std::to_string(sample.size())}, {"of", std::to_string(rows.size())}});
  return sample.size();
}

EvalScores Pipeline::score_eval() {
  if (!config_.annotations) throw ConfigError("input.annotations is not configured");
  const auto table = load_annotations(config_.annotations->string());
  if (table.annotators != config_.annotators) {
    log::warn("eval", "annotator_count", {{"configured", std::to_string(config_.annotators)},
                                          {"found", std::to_string(table.annotators)}});
  }
  const auto se = score_annotations(table.side_effect, config_.annotators);
  const auto sev = score_annotations(table.severity, config_.annotators);
  EvalScores scores{config_.annotators, table.side_effect.size(), se.accuracy, sev.accuracy};

  const json doc = {{"annotators", scores.annotators},
                    {"relations", scores.relations},
                    {"side_effect_accuracy", scores.side_effect_accuracy},
                    {"severity_accuracy", scores.severity_accuracy}};
  fs::create_directories(config_.output_dir);
  write_file_atomic(artifact("eval_scores.json").string(), doc.dump(2) + "\n");
  return scores;
}

}  // namespace sekg
