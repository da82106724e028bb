#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "geopoi/autodiff.hpp"
#include "geopoi/checkin.hpp"

namespace geopoi {

struct TransitionPair {
  std::size_t center = 0;
  std::size_t context = 0;
  bool operator==(const TransitionPair&) const = default;
};

/// Both directions of every within-session pair of events at most `window`
/// steps apart, as POI indices into `pois`.
std::vector<TransitionPair> extract_transition_pairs(std::span<const Trajectory> trajectories,
                                                     const Vocabulary& pois, int window = 1);

/// |POI| x dim matrix of pre-trained POI vectors, rows ordered like `pois`.
struct PoiEmbeddingTable {
  Vocabulary pois;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return std::span<const double>(values).subspan(i * dim, dim); }
  /// Frozen tensor view of the matrix (copy).
  ad::Tensor to_tensor() const;
  /// Rows reordered to `target`; every target id must be present.
  PoiEmbeddingTable aligned_to(const Vocabulary& target) const;
  bool all_finite() const;
};

struct SgnsConfig {
  std::size_t dim = 128;
  int negatives = 5;
  int epochs = 5;
  double lr = 0.025;
  std::uint64_t seed = 1;
};

struct SgnsResult {
  PoiEmbeddingTable table;
  std::vector<double> epoch_loss;  // mean loss per pair, one entry per epoch
};

/// Skip-gram with negative sampling; negatives come from the context
/// unigram distribution raised to 0.75. Throws on empty `pairs`.
SgnsResult train_embeddings(std::span<const TransitionPair> pairs, const Vocabulary& pois,
                            const SgnsConfig& config = {});

/// Shared tensor-blob layout under the `poiemb.` prefix, plus `<stem>.ids`
/// listing one POI id per row.
void save_embeddings(const std::filesystem::path& stem, const PoiEmbeddingTable& table);
PoiEmbeddingTable load_embeddings(const std::filesystem::path& stem);

/// Where PAM's input vectors come from.
class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual PoiEmbeddingTable embeddings(const DatasetSplit& split) const = 0;
};

/// Trains skip-gram vectors on the split's training trajectories.
class SkipGramSource : public EmbeddingSource {
 public:
  SkipGramSource(SgnsConfig config, int window = 1) : config_(config), window_(window) {}
  PoiEmbeddingTable embeddings(const DatasetSplit& split) const override;

 private:
  SgnsConfig config_;
  int window_;
};

/// Reads an externally produced table (e.g. from another sequential model)
/// as is and reorders it to the split's POI vocabulary.
class FileSource : public EmbeddingSource {
 public:
  explicit FileSource(std::filesystem::path stem) : stem_(std::move(stem)) {}
  PoiEmbeddingTable embeddings(const DatasetSplit& split) const override;

 private:
  std::filesystem::path stem_;
};

}  // namespace geopoi
