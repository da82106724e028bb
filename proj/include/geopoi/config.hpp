#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geopoi/checkin.hpp"
#include "geopoi/recommender.hpp"
#include "geopoi/transition.hpp"

namespace geopoi {

/// Every tunable default in one place. Text form is one `key = value` per
/// line; `#` starts a comment.
struct Settings {
  int min_checkins = 10;
  double session_gap_hours = 24.0;
  SplitRatios split;
  SgnsConfig sgns;
  int transition_window = 1;
  ModelConfig model;
  TrainConfig train;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  void read(std::istream& in);
  void read_file(const std::filesystem::path& path);

  /// All keys with their current values, in a stable order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  void write(std::ostream& out) const;

  /// Copies with `seed` applied to the per-run configs.
  TrainConfig train_config() const;
  SgnsConfig sgns_config() const;
};

}  // namespace geopoi
