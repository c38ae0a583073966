#pragma once

#include <spdlog/spdlog.h>

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace sekg::log {

using Field = std::pair<std::string_view, std::string>;

/// Structured line: `stage=<stage> event=<event> k=v ...`. Values containing
/// whitespace or '=' are double-quoted.
std::string format_event(std::string_view stage, std::string_view event,
                         std::initializer_list<Field> fields);

void event(spdlog::level::level_enum level, std::string_view stage, std::string_view event,
           std::initializer_list<Field> fields = {});

inline void info(std::string_view stage, std::string_view ev, std::initializer_list<Field> f = {}) {
  event(spdlog::level::info, stage, ev, f);
}
inline void warn(std::string_view stage, std::string_view ev, std::initializer_list<Field> f = {}) {
  event(spdlog::level::warn, stage, ev, f);
}
inline void debug(std::string_view stage, std::string_view ev, std::initializer_list<Field> f = {}) {
  event(spdlog::level::debug, stage, ev, f);
}

/// Routes all sekg logging to stderr at the given level ("debug", "info",
/// "warn", "error", "off").
void configure(std::string_view level);

}  // namespace sekg::log
