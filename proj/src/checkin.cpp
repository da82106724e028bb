#include "geopoi/checkin.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace geopoi {
namespace {

constexpr std::string_view kCanonicalHeader = "user_id\tpoi_id\tcategory\tlat\tlon\ttimestamp";
constexpr std::size_t kMaxRowWarnings = 20;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<Timestamp> civil_to_unix(int y, int mo, int d, int h, int mi, int s) {
  using namespace std::chrono;
  if (h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + h * 3600 + mi * 60 + s;
}

bool coordinates_valid(double lat, double lon) {
  return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

std::string trim_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::optional<CheckIn> parse_canonical_row(std::string_view line, std::string& why) {
  auto f = split_tabs(line);
  if (f.size() != 6) {
    why = fmt::format("expected 6 fields, got {}", f.size());
    return std::nullopt;
  }
  auto lat = parse_double(f[3]);
  auto lon = parse_double(f[4]);
  auto ts = parse_iso8601_utc(f[5]);
  if (f[0].empty() || f[1].empty() || !lat || !lon || !ts) {
    why = "unparseable field";
    return std::nullopt;
  }
  if (!coordinates_valid(*lat, *lon)) {
    why = fmt::format("coordinates out of range ({}, {})", *lat, *lon);
    return std::nullopt;
  }
  return CheckIn{std::string(f[0]), std::string(f[1]), std::string(f[2]), *lat, *lon, *ts};
}

// userID, venueID, venueCategoryID, venueCategory, lat, lon, tz offset (min), UTC time
std::optional<CheckIn> parse_foursquare_row(std::string_view line, std::string& why) {
  auto f = split_tabs(line);
  if (f.size() != 8) {
    why = fmt::format("expected 8 fields, got {}", f.size());
    return std::nullopt;
  }
  auto lat = parse_double(f[4]);
  auto lon = parse_double(f[5]);
  auto offset = parse_int<int>(f[6]);
  auto ts = parse_foursquare_time(f[7]);
  if (f[0].empty() || f[1].empty() || !lat || !lon || !offset || !ts) {
    why = "unparseable field";
    return std::nullopt;
  }
  if (!coordinates_valid(*lat, *lon)) {
    why = fmt::format("coordinates out of range ({}, {})", *lat, *lon);
    return std::nullopt;
  }
  return CheckIn{std::string(f[0]), std::string(f[1]), std::string(f[3]), *lat, *lon, *ts};
}

}  // namespace

InputFormat parse_input_format(std::string_view name) {
  if (name == "canonical") return InputFormat::canonical;
  if (name == "foursquare-raw") return InputFormat::foursquare_raw;
  throw std::invalid_argument(fmt::format("unknown input format '{}'", name));
}

std::optional<Timestamp> parse_iso8601_utc(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS followed by Z or +00:00
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':')
    return std::nullopt;
  auto rest = text.substr(19);
  if (!(rest.empty() || rest == "Z" || rest == "+00:00")) return std::nullopt;
  auto y = parse_int<int>(text.substr(0, 4));
  auto mo = parse_int<int>(text.substr(5, 2));
  auto d = parse_int<int>(text.substr(8, 2));
  auto h = parse_int<int>(text.substr(11, 2));
  auto mi = parse_int<int>(text.substr(14, 2));
  auto s = parse_int<int>(text.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !s) return std::nullopt;
  return civil_to_unix(*y, *mo, *d, *h, *mi, *s);
}

std::string format_iso8601_utc(Timestamp ts) {
  using namespace std::chrono;
  auto days = static_cast<int>(ts >= 0 ? ts / 86400 : (ts - 86399) / 86400);
  auto secs = ts - static_cast<Timestamp>(days) * 86400;
  year_month_day ymd{sys_days{std::chrono::days{days}}};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     secs / 3600, (secs / 60) % 60, secs % 60);
}

std::optional<Timestamp> parse_foursquare_time(std::string_view text) {
  static constexpr std::string_view kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                 "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find(' ', start);
    if (pos == std::string_view::npos) pos = text.size();
    if (pos > start) parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  // Www Mmm DD HH:MM:SS +zzzz YYYY
  if (parts.size() != 6 || parts[3].size() != 8 || parts[4].size() != 5) return std::nullopt;
  auto month_it = std::find(std::begin(kMonths), std::end(kMonths), parts[1]);
  if (month_it == std::end(kMonths)) return std::nullopt;
  auto d = parse_int<int>(parts[2]);
  auto h = parse_int<int>(parts[3].substr(0, 2));
  auto mi = parse_int<int>(parts[3].substr(3, 2));
  auto s = parse_int<int>(parts[3].substr(6, 2));
  auto zh = parse_int<int>(parts[4].substr(1, 2));
  auto zm = parse_int<int>(parts[4].substr(3, 2));
  auto y = parse_int<int>(parts[5]);
  if (!d || !h || !mi || !s || !zh || !zm || !y || (parts[4][0] != '+' && parts[4][0] != '-'))
    return std::nullopt;
  auto local = civil_to_unix(*y, static_cast<int>(month_it - std::begin(kMonths)) + 1, *d, *h, *mi, *s);
  if (!local) return std::nullopt;
  Timestamp zone = (*zh * 3600 + *zm * 60) * (parts[4][0] == '-' ? -1 : 1);
  return *local - zone;
}

ParseResult parse_checkins(const std::filesystem::path& path, InputFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open check-in file '{}'", path.string()));
  return parse_checkins(in, format);
}

ParseResult parse_checkins(std::istream& in, InputFormat format) {
  ParseResult result;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim_cr(std::move(raw));
    if (line.empty()) continue;
    if (line_no == 1 && format == InputFormat::canonical && line == kCanonicalHeader) continue;
    std::string why;
    auto row = format == InputFormat::canonical ? parse_canonical_row(line, why)
                                                : parse_foursquare_row(line, why);
    if (row) {
      result.checkins.push_back(std::move(*row));
    } else {
      ++result.skipped;
      if (result.skipped <= kMaxRowWarnings) spdlog::warn("skipping line {}: {}", line_no, why);
    }
  }
  if (result.skipped > kMaxRowWarnings)
    spdlog::warn("skipped {} malformed rows in total", result.skipped);
  return result;
}

void write_checkins(std::ostream& out, std::span<const CheckIn> checkins) {
  out << kCanonicalHeader << '\n';
  for (const auto& c : checkins)
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", c.user_id, c.poi_id, c.category, c.lat, c.lon,
                       format_iso8601_utc(c.timestamp));
}

std::vector<CheckIn> filter_sparse(std::span<const CheckIn> checkins, int min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
  std::vector<bool> alive(checkins.size(), true);
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string_view, int> per_user, per_poi;
    for (std::size_t i = 0; i < checkins.size(); ++i) {
      if (!alive[i]) continue;
      ++per_user[checkins[i].user_id];
      ++per_poi[checkins[i].poi_id];
    }
    for (std::size_t i = 0; i < checkins.size(); ++i) {
      if (alive[i] && (per_user[checkins[i].user_id] < min_count ||
                       per_poi[checkins[i].poi_id] < min_count)) {
        alive[i] = false;
        changed = true;
      }
    }
  }
  std::vector<CheckIn> out;
  for (std::size_t i = 0; i < checkins.size(); ++i)
    if (alive[i]) out.push_back(checkins[i]);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Trajectory::sessions() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (events.empty()) return out;
  std::size_t begin = 0;
  for (auto start : session_starts) {
    out.emplace_back(begin, start);
    begin = start;
  }
  out.emplace_back(begin, events.size());
  return out;
}

std::vector<Trajectory> build_trajectories(std::span<const CheckIn> checkins,
                                           double session_gap_hours) {
  std::map<std::string, std::vector<CheckIn>> by_user;
  for (const auto& c : checkins) by_user[c.user_id].push_back(c);

  const double gap_seconds = session_gap_hours * 3600.0;
  std::vector<Trajectory> out;
  out.reserve(by_user.size());
  for (auto& [user, events] : by_user) {
    std::stable_sort(events.begin(), events.end(),
                     [](const CheckIn& a, const CheckIn& b) { return a.timestamp < b.timestamp; });
    Trajectory t{user, std::move(events), {}};
    for (std::size_t i = 1; i < t.events.size(); ++i)
      if (static_cast<double>(t.events[i].timestamp - t.events[i - 1].timestamp) > gap_seconds)
        t.session_starts.push_back(i);
    out.push_back(std::move(t));
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> ids) : ids_(std::move(ids)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second)
      throw std::invalid_argument(fmt::format("duplicate vocabulary id '{}'", ids_[i]));
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw std::out_of_range(fmt::format("unknown vocabulary id '{}'", id));
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& id : ids_) {
    for (unsigned char c : id) mix(c);
    mix(0);
  }
  return h;
}

SplitCounts split_counts(std::size_t samples, SplitRatios ratios) {
  if (samples < 3) return {samples, 0, 0};
  auto train = static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(samples)));
  auto val = static_cast<std::size_t>(std::floor(ratios.val * static_cast<double>(samples)));
  train = std::min(train, samples);
  val = std::min(val, samples - train);
  return {train, val, samples - train - val};
}

std::span<const CheckIn> DatasetSplit::prefix(const Sample& s) const {
  const auto& events = trajectories.at(s.trajectory).events;
  return std::span<const CheckIn>(events).first(s.target);
}

const CheckIn& DatasetSplit::target(const Sample& s) const {
  return trajectories.at(s.trajectory).events.at(s.target);
}

std::size_t DatasetSplit::target_index(const Sample& s) const { return pois.index(target(s).poi_id); }

std::vector<Trajectory> DatasetSplit::train_trajectories() const {
  std::vector<std::size_t> end(trajectories.size(), 0);
  for (const auto& s : train) end[s.trajectory] = std::max(end[s.trajectory], s.target + 1);
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (end[i] == 0) continue;
    const auto& t = trajectories[i];
    Trajectory cut{t.user_id, {t.events.begin(), t.events.begin() + static_cast<std::ptrdiff_t>(end[i])}, {}};
    for (auto b : t.session_starts)
      if (b < end[i]) cut.session_starts.push_back(b);
    out.push_back(std::move(cut));
  }
  return out;
}

DatasetSplit split_chronological(std::vector<Trajectory> trajectories, SplitRatios ratios) {
  DatasetSplit split;
  std::map<std::string, PoiInfo> poi_seen;
  std::vector<std::string> categories, users;
  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    const auto& t = trajectories[ti];
    users.push_back(t.user_id);
    for (const auto& e : t.events) {
      poi_seen.try_emplace(e.poi_id, PoiInfo{e.category, e.lat, e.lon});
      categories.push_back(e.category);
    }
    std::size_t samples = t.events.size() > 0 ? t.events.size() - 1 : 0;
    auto counts = split_counts(samples, ratios);
    for (std::size_t k = 0; k < samples; ++k) {
      Sample s{fmt::format("{}:{}", t.user_id, k + 1), ti, k + 1};
      if (k < counts.train)
        split.train.push_back(std::move(s));
      else if (k < counts.train + counts.val)
        split.val.push_back(std::move(s));
      else
        split.test.push_back(std::move(s));
    }
  }
  std::sort(categories.begin(), categories.end());
  categories.erase(std::unique(categories.begin(), categories.end()), categories.end());
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());

  std::vector<std::string> poi_ids;
  for (auto& [id, info] : poi_seen) {
    poi_ids.push_back(id);
    split.poi_info.push_back(info);
  }
  split.pois = Vocabulary(std::move(poi_ids));
  split.categories = Vocabulary(std::move(categories));
  split.users = Vocabulary(std::move(users));
  split.trajectories = std::move(trajectories);
  return split;
}

void DatasetSplit::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto write_part = [&](const std::string& name, const std::vector<Sample>& samples, bool with_heads) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", (dir / name).string()));
    out << kCanonicalHeader << "\tsample_id\n";
    auto row = [&](const CheckIn& c, std::string_view sid) {
      out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", c.user_id, c.poi_id, c.category, c.lat, c.lon,
                         format_iso8601_utc(c.timestamp), sid);
    };
    // The first event of each trajectory is never a target; it travels with train.
    if (with_heads)
      for (const auto& t : trajectories)
        if (!t.events.empty()) row(t.events.front(), "-");
    for (const auto& s : samples) row(target(s), s.sample_id);
  };
  write_part("train.tsv", train, true);
  write_part("val.tsv", val, false);
  write_part("test.tsv", test, false);

  nlohmann::json vocab;
  vocab["session_gap_hours"] = session_gap_hours;
  vocab["users"] = users.ids();
  vocab["categories"] = categories.ids();
  auto& pois_json = vocab["pois"] = nlohmann::json::array();
  for (std::size_t i = 0; i < pois.size(); ++i)
    pois_json.push_back({{"index", i},
                         {"id", pois.id(i)},
                         {"category", poi_info[i].category},
                         {"lat", poi_info[i].lat},
                         {"lon", poi_info[i].lon}});
  std::ofstream out(dir / "vocab.json");
  out << vocab.dump(1) << '\n';
}

DatasetSplit DatasetSplit::load(const std::filesystem::path& dir) {
  struct Row {
    CheckIn checkin;
    std::string sample_id;
    int part;
  };
  std::vector<Row> rows;
  const char* names[] = {"train.tsv", "val.tsv", "test.tsv"};
  for (int part = 0; part < 3; ++part) {
    std::ifstream in(dir / names[part]);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", (dir / names[part]).string()));
    std::string line;
    std::getline(in, line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      line = trim_cr(std::move(line));
      if (line.empty()) continue;
      auto pos = line.rfind('\t');
      std::string why;
      auto c = pos == std::string::npos ? std::nullopt
                                        : parse_canonical_row(std::string_view(line).substr(0, pos), why);
      if (!c)
        throw std::runtime_error(fmt::format("{}:{}: malformed split row", names[part], line_no));
      rows.push_back({std::move(*c), line.substr(pos + 1), part});
    }
  }
  std::ifstream vin(dir / "vocab.json");
  if (!vin) throw std::runtime_error(fmt::format("cannot open '{}'", (dir / "vocab.json").string()));
  auto vocab = nlohmann::json::parse(vin);

  // Rows are per-user chronological within each file; a stable sort by
  // (user, time) over train+val+test rebuilds the trajectories.
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.checkin.user_id != b.checkin.user_id) return a.checkin.user_id < b.checkin.user_id;
    return a.checkin.timestamp < b.checkin.timestamp;
  });

  DatasetSplit split;
  split.session_gap_hours = vocab.at("session_gap_hours").get<double>();
  std::vector<CheckIn> all;
  all.reserve(rows.size());
  for (const auto& r : rows) all.push_back(r.checkin);
  split.trajectories = build_trajectories(all, split.session_gap_hours);

  std::size_t offset = 0;
  for (std::size_t ti = 0; ti < split.trajectories.size(); ++ti) {
    const auto& t = split.trajectories[ti];
    for (std::size_t k = 0; k < t.events.size(); ++k) {
      const auto& r = rows[offset + k];
      if (r.sample_id == "-") continue;
      Sample s{r.sample_id, ti, k};
      (r.part == 0 ? split.train : r.part == 1 ? split.val : split.test).push_back(std::move(s));
    }
    offset += t.events.size();
  }

  std::vector<std::string> poi_ids;
  for (const auto& p : vocab.at("pois")) {
    poi_ids.push_back(p.at("id").get<std::string>());
    split.poi_info.push_back(
        {p.at("category").get<std::string>(), p.at("lat").get<double>(), p.at("lon").get<double>()});
  }
  split.pois = Vocabulary(std::move(poi_ids));
  split.users = Vocabulary(vocab.at("users").get<std::vector<std::string>>());
  split.categories = Vocabulary(vocab.at("categories").get<std::vector<std::string>>());
  return split;
}

}  // namespace geopoi
