#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

namespace sekg {

/// Content-addressed store of provider responses, one file per request:
/// `<dir>/<sha256(model_id + '\0' + request)>.txt` holding the raw response
/// bytes. Entries are immutable once written. Concurrent readers, serialized
/// writers.
class ReplayCache {
 public:
  explicit ReplayCache(std::filesystem::path dir);

  static std::string key(std::string_view model_id, std::string_view request);

  std::optional<std::string> get(std::string_view model_id, std::string_view request) const;

  /// Stores the response unless an entry already exists; an existing entry is
  /// never overwritten. Returns the stored bytes.
  std::string put(std::string_view model_id, std::string_view request, std::string_view response);

  std::filesystem::path path_for(std::string_view model_id, std::string_view request) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::size_t hits() const noexcept { return hits_; }
  std::size_t misses() const noexcept { return misses_; }

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

}  // namespace sekg
