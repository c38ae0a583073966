#include "sekg/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

#include "sekg/error.hpp"

namespace sekg::log {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static auto instance = [] {
    auto l = spdlog::stderr_logger_mt("sekg");
    l->set_pattern("%L %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return instance;
}

void append_value(std::string& out, std::string_view v) {
  bool quote = v.empty() || v.find_first_of(" \t\n=\"") != std::string_view::npos;
  if (!quote) {
    out += v;
    return;
  }
  out.push_back('"');
  for (char c : v) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
}

}  // namespace

std::string format_event(std::string_view stage, std::string_view event,
                         std::initializer_list<Field> fields) {
  std::string out = "stage=";
  out += stage;
  out += " event=";
  out += event;
  for (const auto& [k, v] : fields) {
    out.push_back(' ');
    out += k;
    out.push_back('=');
    append_value(out, v);
  }
  return out;
}

void event(spdlog::level::level_enum level, std::string_view stage, std::string_view ev,
           std::initializer_list<Field> fields) {
  auto l = logger();
  if (!l->should_log(level)) return;
  l->log(level, "{}", format_event(stage, ev, fields));
}

void configure(std::string_view level) {
  auto parsed = spdlog::level::from_str(std::string(level));
  if (parsed == spdlog::level::off && level != "off") {
    throw ConfigError("unknown log level '" + std::string(level) + "'");
  }
  logger()->set_level(parsed);
}

}  // namespace sekg::log
