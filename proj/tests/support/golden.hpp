#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "sekg/text.hpp"

namespace sekg::testing {

namespace fs = std::filesystem;

/// Copies the fixture inputs (config, data files and replay cache) into `dst`.
inline void copy_fixture_inputs(const fs::path& fixture, const fs::path& dst) {
  for (const auto& entry : fs::directory_iterator(fixture)) {
    const auto name = entry.path().filename().string();
    if (name == "golden" || name == "generate.py" || name == "out") continue;
    fs::copy(entry.path(), dst / name, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  }
}

/// Files that differ between `out` and `golden`, including files present on
/// only one side. Wall-clock timings are not part of the golden set.
inline std::vector<std::string> golden_mismatches(const fs::path& out, const fs::path& golden) {
  std::set<std::string> names;
  for (const auto& dir : {out, golden}) {
    for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
  }
  names.erase("run_times.json");
  std::vector<std::string> bad;
  for (const auto& n : names) {
    if (!fs::exists(out / n) || !fs::exists(golden / n) ||
        read_file((out / n).string()) != read_file((golden / n).string())) {
      bad.push_back(n);
    }
  }
  return bad;
}

}  // namespace sekg::testing
