#include "geopoi/prompt.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace geopoi {

std::size_t hour_of_week(Timestamp ts) {
  // 1970-01-01 was a Thursday, 72 h after Monday 00:00.
  Timestamp hours = ts >= 0 ? ts / 3600 : (ts - 3599) / 3600;
  Timestamp bucket = (hours + 72) % static_cast<Timestamp>(kTimeBuckets);
  if (bucket < 0) bucket += static_cast<Timestamp>(kTimeBuckets);
  return static_cast<std::size_t>(bucket);
}

TokenVocab::TokenVocab(Vocabulary users, Vocabulary categories)
    : users_(std::move(users)), categories_(std::move(categories)) {}

std::size_t TokenVocab::user_token(std::string_view user) const {
  auto i = users_.find(user);
  return i ? kSpecialCount + kTimeBuckets + *i : kUnknownUser;
}

std::size_t TokenVocab::category_token(std::string_view category) const {
  auto i = categories_.find(category);
  return i ? kSpecialCount + kTimeBuckets + users_.size() + *i : kUnknownCategory;
}

bool PromptSequence::target_absent() const {
  if (!target) return false;
  return std::find(slot_pois.begin(), slot_pois.end(), *target) == slot_pois.end();
}

PromptSequence build_prompt(std::span<const CheckIn> prefix, const CheckIn* target, const TokenVocab& vocab,
                            const Vocabulary& pois, std::size_t max_events) {
  if (prefix.empty()) throw std::invalid_argument("build_prompt: empty prefix");
  if (max_events == 0) throw std::invalid_argument("build_prompt: max_events must be >= 1");
  if (prefix.size() > max_events) prefix = prefix.last(max_events);

  PromptSequence seq;
  seq.tokens.reserve(prefix.size() * kTokensPerEvent + 1);
  for (const auto& e : prefix) {
    auto poi = pois.find(e.poi_id);
    if (!poi) throw std::invalid_argument(fmt::format("build_prompt: POI '{}' not in vocabulary", e.poi_id));
    seq.tokens.push_back(TokenVocab::kAt);
    seq.tokens.push_back(vocab.time_token(e.timestamp));
    seq.tokens.push_back(vocab.user_token(e.user_id));
    seq.poi_slots.push_back(seq.tokens.size());
    seq.slot_pois.push_back(*poi);
    seq.tokens.push_back(TokenVocab::kPoiSlot);
    seq.tokens.push_back(vocab.category_token(e.category));
    seq.spatial_slots.push_back(seq.tokens.size());
    seq.slot_coords.push_back({e.lat, e.lon});
    seq.tokens.push_back(TokenVocab::kGpsSlot);
  }
  seq.tokens.push_back(TokenVocab::kQuery);
  if (target != nullptr) {
    auto t = pois.find(target->poi_id);
    if (!t) throw std::invalid_argument(fmt::format("build_prompt: target POI '{}' not in vocabulary", target->poi_id));
    seq.target = *t;
  }
  return seq;
}

}  // namespace geopoi
