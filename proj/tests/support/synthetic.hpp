#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geopoi/checkin.hpp"
#include "geopoi/geo.hpp"

namespace geopoi::fixtures {

struct CycleSpec {
  int pois = 20;
  int users = 50;
  int events = 200;
  int categories = 1;
  double step_hours = 2.0;
  /// Box the POIs are scattered over.
  geo::LatLon south_west{40.60, -74.10};
  geo::LatLon north_east{40.90, -73.80};
};

/// Every user walks the same fixed cycle of POIs from a random starting
/// point: after POI k comes POI k + 1 (mod the cycle length). POI
/// coordinates are random, so geography says nothing about the order.
std::vector<CheckIn> transition_cycle(const CycleSpec& spec, std::uint64_t seed);

struct ClusterSpec {
  int clusters = 6;
  int pois_per_cluster = 8;
  int users = 60;
  int events = 80;
  double cluster_radius_km = 1.0;
  geo::LatLon center{40.75, -73.95};
  double region_radius_km = 25.0;
  double step_hours = 2.0;
  std::string id_prefix = "p";
  std::string user_prefix = "u";
};

/// Users start at a random POI and always move to the nearest POI of the
/// current cluster they have not visited yet; when the cluster is exhausted
/// they jump to a random POI of another cluster. POI ids are shuffled and
/// categories are random, so only coordinates carry the rule.
std::vector<CheckIn> geo_clustered(const ClusterSpec& spec, std::uint64_t seed);

/// Canonical file contents for `rows`.
std::string to_canonical(const std::vector<CheckIn>& rows);

}  // namespace geopoi::fixtures
