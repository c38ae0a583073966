#include "sekg/replay_cache.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include "sekg/error.hpp"
#include "sekg/text.hpp"

namespace sekg {

ReplayCache::ReplayCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string ReplayCache::key(std::string_view model_id, std::string_view request) {
  std::string buf;
  buf.reserve(model_id.size() + 1 + request.size());
  buf.append(model_id);
  buf.push_back('\0');
  buf.append(request);
  return sha256_hex(buf);
}

std::filesystem::path ReplayCache::path_for(std::string_view model_id,
                                            std::string_view request) const {
  return dir_ / (key(model_id, request) + ".txt");
}

std::optional<std::string> ReplayCache::get(std::string_view model_id,
                                            std::string_view request) const {
  const auto path = path_for(model_id, request);
  std::shared_lock lock(mutex_);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ++misses_;
    return std::nullopt;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  ++hits_;
  return ss.str();
}

std::string ReplayCache::put(std::string_view model_id, std::string_view request,
                             std::string_view response) {
  const auto path = path_for(model_id, request);
  std::unique_lock lock(mutex_);
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create cache dir " + dir_.string() + ": " + ec.message());
  write_file_atomic(path.string(), response);
  return std::string(response);
}

}  // namespace sekg
