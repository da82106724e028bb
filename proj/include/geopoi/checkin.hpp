#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace geopoi {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// One visit event: user `user_id` checked in at `poi_id` at `timestamp`.
struct CheckIn {
  std::string user_id;
  std::string poi_id;
  std::string category;
  double lat = 0.0;
  double lon = 0.0;
  Timestamp timestamp = 0;

  bool operator==(const CheckIn&) const = default;
};

enum class InputFormat { canonical, foursquare_raw };

InputFormat parse_input_format(std::string_view name);

struct ParseResult {
  std::vector<CheckIn> checkins;
  std::size_t skipped = 0;
};

/// Parses "YYYY-MM-DDTHH:MM:SSZ" (a trailing "Z" or "+00:00" is accepted).
std::optional<Timestamp> parse_iso8601_utc(std::string_view text);
std::string format_iso8601_utc(Timestamp ts);

/// Parses the Foursquare dump layout "Tue Apr 03 18:00:09 +0000 2012".
std::optional<Timestamp> parse_foursquare_time(std::string_view text);

/// Reads check-ins in file order. Malformed rows and rows with out-of-range
/// coordinates are skipped with a warning and counted. Throws
/// std::runtime_error when the file cannot be opened.
ParseResult parse_checkins(const std::filesystem::path& path, InputFormat format);
ParseResult parse_checkins(std::istream& in, InputFormat format);

/// Writes the canonical tab-separated layout, header included.
void write_checkins(std::ostream& out, std::span<const CheckIn> checkins);

/// Removes check-ins of users and POIs with fewer than `min_count`
/// occurrences, repeating until nothing else drops out. Order is preserved.
std::vector<CheckIn> filter_sparse(std::span<const CheckIn> checkins, int min_count = 10);

/// Chronological visits of one user. `session_starts` holds every index
/// i > 0 at which a new session begins.
struct Trajectory {
  std::string user_id;
  std::vector<CheckIn> events;
  std::vector<std::size_t> session_starts;

  /// Half-open [begin, end) event ranges, one per session.
  std::vector<std::pair<std::size_t, std::size_t>> sessions() const;
};

/// Groups by user (trajectories ordered by user id), sorts each group by
/// timestamp (stable with respect to input order) and splits sessions at
/// gaps strictly longer than `session_gap_hours`.
std::vector<Trajectory> build_trajectories(std::span<const CheckIn> checkins,
                                           double session_gap_hours = 24.0);

/// Bidirectional id <-> dense index map.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t index) const { return ids_.at(index); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t index(std::string_view id) const;  // throws if absent
  bool contains(std::string_view id) const { return find(id).has_value(); }

  /// FNV-1a over the ordered ids; used to detect vocabulary drift.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct PoiInfo {
  std::string category;
  double lat = 0.0;
  double lon = 0.0;
};

/// One prediction task: the events of `trajectory` before `target` predict
/// the event at `target`.
struct Sample {
  std::string sample_id;
  std::size_t trajectory = 0;
  std::size_t target = 0;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
};

class DatasetSplit {
 public:
  std::vector<Trajectory> trajectories;
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
  Vocabulary pois;
  Vocabulary categories;
  Vocabulary users;
  /// Indexed like `pois`; coordinates of the first observed check-in.
  std::vector<PoiInfo> poi_info;
  double session_gap_hours = 24.0;

  std::span<const CheckIn> prefix(const Sample& s) const;
  const CheckIn& target(const Sample& s) const;
  std::size_t target_index(const Sample& s) const;

  /// Trajectories cut after the last training target, sessions kept.
  std::vector<Trajectory> train_trajectories() const;

  /// Persists as train.tsv / val.tsv / test.tsv plus vocab.json.
  void save(const std::filesystem::path& dir) const;
  static DatasetSplit load(const std::filesystem::path& dir);
};

/// Per-user chronological split. A trajectory with n events yields n - 1
/// samples; the first floor(train * m) go to train, the next
/// floor(val * m) to validation, the rest to test. Users with fewer than
/// three samples go entirely to train.
DatasetSplit split_chronological(std::vector<Trajectory> trajectories,
                                 SplitRatios ratios = {});

/// Sample counts per split for a user with `samples` samples.
struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};
SplitCounts split_counts(std::size_t samples, SplitRatios ratios = {});

}  // namespace geopoi
