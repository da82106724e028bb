#include "geopoi/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace geopoi {
namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument(fmt::format("config: bad value '{}' for '{}'", text, key));
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument(fmt::format("config: bad boolean '{}' for '{}'", text, key));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Field {
  const char* key;
  std::function<void(Settings&, std::string_view)> set;
  std::function<std::string(const Settings&)> get;
};

template <typename T, typename Access>
Field number(const char* key, Access access) {
  return {key, [key, access](Settings& s, std::string_view v) { access(s) = parse_number<T>(key, v); },
          [access](const Settings& s) { return fmt::format("{}", access(const_cast<Settings&>(s))); }};
}

template <typename Access>
Field boolean(const char* key, Access access) {
  return {key, [key, access](Settings& s, std::string_view v) { access(s) = parse_bool(key, v); },
          [access](const Settings& s) { return std::string(access(const_cast<Settings&>(s)) ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      number<int>("ingest.min_checkins", [](Settings& s) -> int& { return s.min_checkins; }),
      number<double>("ingest.session_gap_hours", [](Settings& s) -> double& { return s.session_gap_hours; }),
      number<double>("split.train", [](Settings& s) -> double& { return s.split.train; }),
      number<double>("split.val", [](Settings& s) -> double& { return s.split.val; }),
      number<int>("gcim.level", [](Settings& s) -> int& { return s.model.gcim.level; }),
      number<int>("gcim.ngram", [](Settings& s) -> int& { return s.model.gcim.ngram; }),
      number<std::size_t>("gcim.gram_dim", [](Settings& s) -> std::size_t& { return s.model.gcim.gram_dim; }),
      number<std::size_t>("gcim.key_dim", [](Settings& s) -> std::size_t& { return s.model.gcim.key_dim; }),
      number<std::size_t>("gcim.fourier_dim", [](Settings& s) -> std::size_t& { return s.model.gcim.fourier_dim; }),
      number<double>("gcim.gamma", [](Settings& s) -> double& { return s.model.gcim.gamma; }),
      boolean("gcim.normalize_digits", [](Settings& s) -> bool& { return s.model.gcim.normalize_digits; }),
      number<std::size_t>("transition.dim", [](Settings& s) -> std::size_t& { return s.sgns.dim; }),
      number<int>("transition.negatives", [](Settings& s) -> int& { return s.sgns.negatives; }),
      number<int>("transition.epochs", [](Settings& s) -> int& { return s.sgns.epochs; }),
      number<double>("transition.lr", [](Settings& s) -> double& { return s.sgns.lr; }),
      number<int>("transition.window", [](Settings& s) -> int& { return s.transition_window; }),
      number<std::size_t>("model.dim", [](Settings& s) -> std::size_t& { return s.model.model_dim; }),
      number<std::size_t>("model.max_events", [](Settings& s) -> std::size_t& { return s.model.max_events; }),
      number<std::size_t>("model.blocks", [](Settings& s) -> std::size_t& { return s.model.blocks; }),
      number<double>("train.lr", [](Settings& s) -> double& { return s.train.adam.lr; }),
      number<double>("train.beta1", [](Settings& s) -> double& { return s.train.adam.beta1; }),
      number<double>("train.beta2", [](Settings& s) -> double& { return s.train.adam.beta2; }),
      number<double>("train.eps", [](Settings& s) -> double& { return s.train.adam.eps; }),
      number<std::size_t>("train.batch_size", [](Settings& s) -> std::size_t& { return s.train.batch_size; }),
      number<int>("train.max_epochs", [](Settings& s) -> int& { return s.train.max_epochs; }),
      number<int>("train.patience", [](Settings& s) -> int& { return s.train.patience; }),
      number<std::size_t>("train.threads", [](Settings& s) -> std::size_t& { return s.train.threads; }),
      number<std::uint64_t>("seed", [](Settings& s) -> std::uint64_t& { return s.seed; }),
  };
  return table;
}

}  // namespace

void Settings::set(std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw std::invalid_argument(fmt::format("config: unknown key '{}'", key));
}

void Settings::read(std::istream& in) {
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument(fmt::format("config line {}: expected key = value", lineno));
    set(trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
  }
}

void Settings::read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open config '{}'", path.string()));
  read(in);
}

std::vector<std::pair<std::string, std::string>> Settings::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

void Settings::write(std::ostream& out) const {
  for (const auto& [k, v] : entries()) out << k << " = " << v << '\n';
}

TrainConfig Settings::train_config() const {
  TrainConfig c = train;
  c.seed = seed;
  return c;
}

SgnsConfig Settings::sgns_config() const {
  SgnsConfig c = sgns;
  c.seed = seed;
  return c;
}

}  // namespace geopoi
