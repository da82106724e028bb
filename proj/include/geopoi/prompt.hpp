#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "geopoi/checkin.hpp"
#include "geopoi/geo.hpp"

namespace geopoi {

inline constexpr std::size_t kTimeBuckets = 168;

/// Hour of the week, Monday 00:00 UTC = 0.
std::size_t hour_of_week(Timestamp ts);

/// Token ids: fixed template/special tokens, then 168 hour-of-week buckets,
/// then users, then categories.
class TokenVocab {
 public:
  enum Special : std::size_t {
    kAt = 0,        // "At [t], user [u] visited ..."
    kPoiSlot,       // <POI p>, replaced by the aligned POI vector
    kGpsSlot,       // <GPS g>, replaced by the coordinate encoding
    kQuery,         // terminal "next POI?" token
    kUnknownUser,
    kUnknownCategory,
    kSpecialCount
  };

  TokenVocab() = default;
  TokenVocab(Vocabulary users, Vocabulary categories);

  std::size_t size() const { return kSpecialCount + kTimeBuckets + users_.size() + categories_.size(); }
  std::size_t time_token(Timestamp ts) const { return kSpecialCount + hour_of_week(ts); }
  std::size_t user_token(std::string_view user) const;
  std::size_t category_token(std::string_view category) const;

  const Vocabulary& users() const { return users_; }
  const Vocabulary& categories() const { return categories_; }

 private:
  Vocabulary users_;
  Vocabulary categories_;
};

struct PromptSequence {
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> spatial_slots;  // positions of <GPS> tokens
  std::vector<geo::LatLon> slot_coords;    // one per spatial slot
  std::vector<std::size_t> poi_slots;      // positions of <POI> tokens
  std::vector<std::size_t> slot_pois;      // POI index per POI slot
  std::optional<std::size_t> target;       // POI index of the answer

  std::size_t length() const { return tokens.size(); }
  /// True when the target POI does not occur among the encoded events.
  bool target_absent() const;
};

inline constexpr std::size_t kTokensPerEvent = 6;

/// Encodes the most recent `max_events` events of `prefix` as
///   <at> time user <POI> category <GPS>
/// per event, followed by <query>. Throws if the prefix is empty or a POI is
/// not in `pois`.
PromptSequence build_prompt(std::span<const CheckIn> prefix, const CheckIn* target, const TokenVocab& vocab,
                            const Vocabulary& pois, std::size_t max_events = 32);

}  // namespace geopoi
