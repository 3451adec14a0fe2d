#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "notevec/corpus.h"
#include "notevec/matrix.h"

namespace notevec::embedding {

/// Retained words with their corpus counts. Index order is descending count,
/// ties broken lexicographically; indices are dense 0..size()-1.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Keeps the entries with count >= min_count and orders them.
  static Vocabulary from_counts(const std::unordered_map<std::string, std::uint64_t>& counts,
                                std::uint64_t min_count);
  /// Uses the given order as-is, with unknown (zero) counts. Rejects duplicates.
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::string& word(std::size_t index) const { return words_[index]; }
  std::uint64_t count(std::size_t index) const { return counts_[index]; }
  std::optional<std::size_t> index_of(const std::string& word) const;
  bool contains(const std::string& word) const { return index_.count(word) > 0; }

  const std::vector<std::string>& words() const { return words_; }
  /// Sum of the retained words' counts.
  std::uint64_t total_tokens() const { return total_tokens_; }
  std::uint64_t min_count() const { return min_count_; }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t total_tokens_ = 0;
  std::uint64_t min_count_ = 0;
};

/// Counts every token of the stream. Throws ErrorCategory::empty_vocabulary
/// when no word reaches min_count.
Vocabulary build_vocab(const corpus::SentenceStream& sentences, std::uint64_t min_count);

struct TrainConfig {
  std::size_t dim = 500;
  std::size_t window = 10;
  std::uint64_t min_count = 100;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double initial_lr = 0.025;
  std::uint64_t rng_seed = 1;
  std::size_t workers = 1;
  /// Frequent-word downsampling threshold; 0 disables.
  double subsample_threshold = 0.0;

  /// Throws a parameter error for out-of-range values.
  void validate() const;
};

struct EmbeddingModel {
  Vocabulary vocab;
  /// Word vectors; the only matrix persisted and served to consumers.
  Matrix input_vectors;
  /// Context weights used only during training.
  Matrix output_vectors;

  std::size_t dim() const { return input_vectors.cols(); }
  std::span<const double> vector_of(const std::string& word) const;
};

/// Input rows uniform in [-0.5/dim, 0.5/dim] from config.rng_seed; output rows zero.
EmbeddingModel init_model(const Vocabulary& vocab, const TrainConfig& config);

struct RowGradient {
  std::size_t row;
  std::vector<double> grad;
};

struct PairLoss {
  double loss = 0.0;
  /// d loss / d input_vectors[center]
  std::vector<double> center_grad;
  /// d loss / d output_vectors[row], one entry per distinct touched row.
  std::vector<RowGradient> output_grads;
};

/// Negative-sampling loss of one (center, context) pair:
///   -log s(u_ctx . v) - sum_neg log s(-u_neg . v)
/// with v the center's input row, u output rows and s the logistic function.
PairLoss sgns_pair_loss_and_grads(const EmbeddingModel& model, std::size_t center,
                                  std::size_t context, std::span<const std::size_t> negatives);

/// One simultaneous gradient-descent step on the pair loss with step size lr.
void sgd_pair_step(EmbeddingModel& model, std::size_t center, std::size_t context,
                   std::span<const std::size_t> negatives, double lr);

/// Draws word indices with probability proportional to count^power.
class NegativeSampler {
 public:
  explicit NegativeSampler(const Vocabulary& vocab, double power = 0.75);

  std::size_t draw(std::mt19937_64& rng) const;
  double probability(std::size_t index) const;
  std::size_t size() const { return cumulative_.size(); }

 private:
  std::vector<double> cumulative_;
};

struct TrainStats {
  std::uint64_t words_processed = 0;
  std::uint64_t pairs = 0;
  double final_lr = 0.0;
};

/// Skip-gram with negative sampling over `epochs` passes of the stream.
/// Tokens missing from the vocabulary are skipped. With workers == 1 the
/// result is a pure function of the inputs and rng_seed; with more workers
/// the shards update the shared matrices without locks.
TrainStats train(EmbeddingModel& model, const corpus::SentenceStream& sentences,
                 const TrainConfig& config);

/// word2vec text format: "V D" header, then "word v1 ... vD" per row.
void save_model(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_model(const std::filesystem::path& path);

}  // namespace notevec::embedding
