#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace geopoi::geo {

inline constexpr double kMaxMercatorLatitude = 85.05112878;
inline constexpr double kEarthRadiusKm = 6371.0088;
inline constexpr int kTileSize = 256;
inline constexpr int kMaxLevel = 30;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Web-Mercator pixel position at zoom `level`, plus the containing tile.
struct GridPosition {
  int level = 1;
  double x = 0.0;
  double y = 0.0;
  std::int64_t tile_x = 0;
  std::int64_t tile_y = 0;
};

/// Base-4 tile code, most significant (coarsest) digit first.
struct QuadKey {
  std::string digits;

  int level() const { return static_cast<int>(digits.size()); }
  /// Digits as integers 0..3 (the vector S).
  std::vector<int> values() const;
  bool operator==(const QuadKey&) const = default;
};

/// Latitude is clamped to the Mercator range and longitude outside
/// [-180, 180] is wrapped; lon = 180 lands in the last pixel column.
/// Throws std::invalid_argument for non-finite input or level outside
/// [1, 30].
GridPosition project(double lat, double lon, int level);

QuadKey quadkey(const GridPosition& pos);
inline QuadKey quadkey(double lat, double lon, int level) { return quadkey(project(lat, lon, level)); }

/// Overlapping windows of width n. Keys shorter than n yield a single gram
/// right-padded with '0'.
std::vector<std::string> ngrams(const QuadKey& key, int n = 3);

/// Parses a gram of base-4 digits into its integer value (row in a 4^n table).
std::size_t gram_index(const std::string& gram);

double haversine_km(LatLon a, LatLon b);

}  // namespace geopoi::geo
