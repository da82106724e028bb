#include "geopoi/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace geopoi::geo {

std::vector<int> QuadKey::values() const {
  std::vector<int> out;
  out.reserve(digits.size());
  for (char c : digits) out.push_back(c - '0');
  return out;
}

GridPosition project(double lat, double lon, int level) {
  if (!std::isfinite(lat) || !std::isfinite(lon))
    throw std::invalid_argument(fmt::format("non-finite coordinate ({}, {})", lat, lon));
  if (level < 1 || level > kMaxLevel)
    throw std::invalid_argument(fmt::format("level {} outside [1, {}]", level, kMaxLevel));

  lat = std::clamp(lat, -kMaxMercatorLatitude, kMaxMercatorLatitude);
  if (lon < -180.0 || lon > 180.0) lon = std::fmod(std::fmod(lon + 180.0, 360.0) + 360.0, 360.0) - 180.0;

  const double map_size = std::ldexp(static_cast<double>(kTileSize), level);
  const double sin_lat = std::sin(lat * std::numbers::pi / 180.0);
  double x = (lon + 180.0) / 360.0 * map_size;
  double y = (0.5 - std::log((1.0 + sin_lat) / (1.0 - sin_lat)) / (4.0 * std::numbers::pi)) * map_size;
  x = std::clamp(x, 0.0, map_size - 1.0);
  y = std::clamp(y, 0.0, map_size - 1.0);

  GridPosition pos;
  pos.level = level;
  pos.x = x;
  pos.y = y;
  pos.tile_x = static_cast<std::int64_t>(std::floor(x / kTileSize));
  pos.tile_y = static_cast<std::int64_t>(std::floor(y / kTileSize));
  return pos;
}

QuadKey quadkey(const GridPosition& pos) {
  QuadKey key;
  key.digits.reserve(static_cast<std::size_t>(pos.level));
  for (int i = pos.level; i > 0; --i) {
    const std::int64_t mask = std::int64_t{1} << (i - 1);
    int digit = 0;
    if (pos.tile_x & mask) digit += 1;
    if (pos.tile_y & mask) digit += 2;
    key.digits.push_back(static_cast<char>('0' + digit));
  }
  return key;
}

std::vector<std::string> ngrams(const QuadKey& key, int n) {
  if (n < 1) throw std::invalid_argument("n-gram width must be >= 1");
  const auto width = static_cast<std::size_t>(n);
  const auto& s = key.digits;
  if (s.size() < width) {
    std::string padded = s;
    padded.resize(width, '0');
    return {padded};
  }
  std::vector<std::string> grams;
  grams.reserve(s.size() - width + 1);
  for (std::size_t i = 0; i + width <= s.size(); ++i) grams.push_back(s.substr(i, width));
  return grams;
}

std::size_t gram_index(const std::string& gram) {
  std::size_t v = 0;
  for (char c : gram) {
    if (c < '0' || c > '3') throw std::invalid_argument(fmt::format("invalid quadkey gram '{}'", gram));
    v = v * 4 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

double haversine_km(LatLon a, LatLon b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

}  // namespace geopoi::geo
