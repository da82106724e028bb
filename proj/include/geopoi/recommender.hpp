#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geopoi/autodiff.hpp"
#include "geopoi/checkin.hpp"
#include "geopoi/checkpoint.hpp"
#include "geopoi/gcim.hpp"
#include "geopoi/nn.hpp"
#include "geopoi/optim.hpp"
#include "geopoi/pam.hpp"
#include "geopoi/prompt.hpp"
#include "geopoi/transition.hpp"

namespace geopoi {

/// Which of the injected modules feed the sequence model.
struct Variant {
  bool gcim = true;
  bool fourier = true;
  bool pam = true;

  static Variant full() { return {}; }
  static Variant no_gcim() { return {false, true, true}; }
  static Variant no_fourier() { return {true, false, true}; }
  static Variant no_pam() { return {true, true, false}; }
  /// "full", "no_gcim", "no_fourier", "no_pam"; throws otherwise.
  static Variant parse(std::string_view name);

  std::string name() const;
  bool operator==(const Variant&) const = default;
};

struct ModelConfig {
  std::size_t model_dim = 128;
  std::size_t max_events = 32;  // K
  std::size_t blocks = 2;
  GcimConfig gcim;  // gcim.model_dim is overridden by model_dim

  std::size_t max_tokens() const { return max_events * kTokensPerEvent + 1; }
  void validate() const;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  int max_epochs = 20;
  int patience = 3;  // epochs without a val Acc@1 gain before stopping
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // evaluation workers; 0 = hardware concurrency
};

/// Pre-LN causal self-attention block with a single head.
struct AttentionBlock {
  ad::Tensor ln1_gain, ln1_bias;
  ad::Tensor w_q, w_k, w_v, w_o;
  ad::Tensor ln2_gain, ln2_bias;
  nn::Linear ff_in, ff_out;

  static AttentionBlock init(std::size_t dim, nn::Rng& rng);
  ad::Tensor operator()(const ad::Tensor& x) const;
  /// Output row of the final position only (1 x dim); equal to the last row
  /// of operator().
  ad::Tensor last_row(const ad::Tensor& x) const;
  void append_parameters(NamedTensors& out, const std::string& prefix) const;
};

/// Next-POI surrogate: prompt tokens with spliced-in coordinate and POI
/// vectors, causal attention blocks, and a classification head read at the
/// final position.
class Recommender {
 public:
  /// `embeddings` must be aligned to `pois`. All parameters are drawn from
  /// `seed` in a fixed order regardless of variant.
  Recommender(ModelConfig config, Variant variant, TokenVocab tokens, Vocabulary pois,
              const PoiEmbeddingTable& embeddings, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Variant& variant() const { return variant_; }
  const TokenVocab& tokens() const { return tokens_; }
  const Vocabulary& pois() const { return pois_; }
  std::size_t embedding_dim() const { return embeddings_.shape()[1]; }

  PromptSequence prompt(std::span<const CheckIn> prefix, const CheckIn* target = nullptr) const;

  /// Token embeddings with slot rows substituted, plus positions (L x D).
  ad::Tensor embed(const PromptSequence& seq) const;
  /// Attention blocks and final norm over an L x D input.
  ad::Tensor encode(const ad::Tensor& x) const;
  /// Final-position row of encode(x), 1 x D, without computing the others.
  ad::Tensor encode_last(const ad::Tensor& x) const;
  /// Head over n x D hidden rows, n x |POI|.
  ad::Tensor head_logits(const ad::Tensor& hidden) const;
  /// Scores at the final position, shape (|POI|).
  ad::Tensor logits(const PromptSequence& seq) const;
  /// B x |POI|; coordinate and POI encodings are shared across the batch.
  ad::Tensor batch_logits(std::span<const PromptSequence* const> batch) const;

  /// All POI indices, descending logit, ties by ascending index.
  std::vector<std::size_t> rank(const PromptSequence& seq) const;

  /// Every parameter, including ones the variant leaves unused.
  NamedTensors parameters() const;
  /// Parameters the variant actually reads.
  NamedTensors trainable() const;

  void save(const std::filesystem::path& dir) const;
  static Recommender load(const std::filesystem::path& dir);

  Gcim gcim;
  Pam pam;
  ad::Tensor token_table;     // |tokens| x D
  ad::Tensor position_table;  // max_tokens x D
  ad::Tensor poi_table;       // |POI| x D, POI slots when PAM is off
  std::vector<AttentionBlock> blocks;
  ad::Tensor final_gain, final_bias;
  nn::Linear head;  // D -> |POI|

 private:
  Recommender(ModelConfig config, Variant variant, TokenVocab tokens, Vocabulary pois,
              const PoiEmbeddingTable& embeddings, nn::Rng&& rng);

  ad::Tensor embed_with(const PromptSequence& seq, const ad::Tensor& spatial, std::span<const std::size_t> spatial_rows,
                        const ad::Tensor& poi_rows, std::span<const std::size_t> poi_index) const;

  ModelConfig config_;
  Variant variant_;
  TokenVocab tokens_;
  Vocabulary pois_;
  ad::Tensor embeddings_;  // frozen |POI| x d
};

/// Orders POI indices by descending score, ties by ascending index.
std::vector<std::size_t> rank_scores(std::span<const double> scores);

struct TrainResult {
  std::vector<double> epoch_loss;     // mean training cross-entropy per epoch
  std::vector<double> val_accuracy;   // val Acc@1 per epoch (empty without val)
  int best_epoch = 0;                 // 1-based epoch whose weights were kept
};

/// Prompts for every sample, built with the model's vocabularies.
std::vector<PromptSequence> build_prompts(const Recommender& model, const DatasetSplit& split,
                                          std::span<const Sample> samples);

/// Adam on `params` with mean cross-entropy per batch; stops early on
/// validation Acc@1 and restores the best epoch's weights. Data order is
/// drawn from `config.seed` only, so it is the same for every variant.
TrainResult fit(Recommender& model, const DatasetSplit& split, const NamedTensors& params, const TrainConfig& config);

/// Builds a model for `split` and trains its variant parameters.
Recommender train(const DatasetSplit& split, const PoiEmbeddingTable& embeddings, const ModelConfig& model_config,
                  Variant variant, const TrainConfig& config, TrainResult* result = nullptr);

/// Acc@1 of `model` over pre-built prompts (all must carry a target).
double accuracy(const Recommender& model, std::span<const PromptSequence> prompts, std::size_t threads = 1);

}  // namespace geopoi
