#include "notevec/embedding.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "notevec/csv.h"
#include "notevec/error.h"

namespace notevec::embedding {

namespace fs = std::filesystem;

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

void check_index(const EmbeddingModel& model, std::size_t index) {
  if (index >= model.vocab.size()) {
    throw Error(ErrorCategory::parameter, "word index " + std::to_string(index) +
                                              " out of range for vocabulary of " +
                                              std::to_string(model.vocab.size()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::from_counts(const std::unordered_map<std::string, std::uint64_t>& counts,
                                   std::uint64_t min_count) {
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [word, count] : counts) {
    if (count >= min_count) kept.emplace_back(word, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  vocab.min_count_ = min_count;
  vocab.words_.reserve(kept.size());
  vocab.counts_.reserve(kept.size());
  for (auto& [word, count] : kept) {
    vocab.index_.emplace(word, vocab.words_.size());
    vocab.words_.push_back(std::move(word));
    vocab.counts_.push_back(count);
    vocab.total_tokens_ += count;
  }
  return vocab;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  Vocabulary vocab;
  vocab.counts_.assign(words.size(), 0);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!vocab.index_.emplace(words[i], i).second) {
      throw Error(ErrorCategory::format, "duplicate vocabulary word '" + words[i] + "'");
    }
  }
  vocab.words_ = std::move(words);
  return vocab;
}

std::optional<std::size_t> Vocabulary::index_of(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocab(const corpus::SentenceStream& sentences, std::uint64_t min_count) {
  std::unordered_map<std::string, std::uint64_t> counts;
  sentences.for_each([&](const corpus::Sentence& sentence) {
    for (const auto& token : sentence) ++counts[token];
  });
  auto vocab = Vocabulary::from_counts(counts, min_count);
  if (vocab.empty()) {
    throw Error(ErrorCategory::empty_vocabulary,
                "empty vocabulary: no word occurs at least " + std::to_string(min_count) +
                    " times (" + std::to_string(counts.size()) + " distinct words seen)");
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// Config and model

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCategory::parameter, what); };
  if (dim < 1) fail("train.dim must be >= 1");
  if (window < 1) fail("train.window must be >= 1");
  if (negatives < 1) fail("train.negatives must be >= 1");
  if (epochs < 1) fail("train.epochs must be >= 1");
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) fail("train.lr must be > 0");
  if (workers < 1) fail("train.workers must be >= 1");
  if (!(subsample_threshold >= 0.0)) fail("train.subsample must be >= 0");
}

std::span<const double> EmbeddingModel::vector_of(const std::string& word) const {
  auto index = vocab.index_of(word);
  if (!index) throw Error(ErrorCategory::lookup, "word not in vocabulary: '" + word + "'");
  return input_vectors.row(*index);
}

EmbeddingModel init_model(const Vocabulary& vocab, const TrainConfig& config) {
  if (vocab.empty()) throw Error(ErrorCategory::empty_vocabulary, "cannot initialise an empty vocabulary");
  if (config.dim < 1) throw Error(ErrorCategory::parameter, "train.dim must be >= 1");
  EmbeddingModel model{vocab, Matrix(vocab.size(), config.dim), Matrix(vocab.size(), config.dim)};
  const double half_width = 0.5 / static_cast<double>(config.dim);
  std::mt19937_64 rng(config.rng_seed);
  std::uniform_real_distribution<double> uniform(-half_width, half_width);
  for (double& entry : model.input_vectors.data()) entry = uniform(rng);
  return model;
}

// ---------------------------------------------------------------------------
// Loss

PairLoss sgns_pair_loss_and_grads(const EmbeddingModel& model, std::size_t center,
                                  std::size_t context, std::span<const std::size_t> negatives) {
  check_index(model, center);
  check_index(model, context);
  for (auto n : negatives) check_index(model, n);

  const std::size_t dim = model.dim();
  const auto v = model.input_vectors.row(center);
  PairLoss result;
  result.center_grad.assign(dim, 0.0);

  auto accumulate = [&](std::size_t row, double coefficient) {
    auto it = std::find_if(result.output_grads.begin(), result.output_grads.end(),
                           [row](const RowGradient& g) { return g.row == row; });
    if (it == result.output_grads.end()) {
      result.output_grads.push_back({row, std::vector<double>(dim, 0.0)});
      it = std::prev(result.output_grads.end());
    }
    const auto u = model.output_vectors.row(row);
    for (std::size_t d = 0; d < dim; ++d) {
      it->grad[d] += coefficient * v[d];
      result.center_grad[d] += coefficient * u[d];
    }
  };

  // d/dx of -log s(x) is -(1 - s(x)); of -log s(-x) is s(x).
  const double positive_score = dot(v, model.output_vectors.row(context));
  result.loss += softplus(-positive_score);
  accumulate(context, -(1.0 - sigmoid(positive_score)));
  for (auto n : negatives) {
    const double score = dot(v, model.output_vectors.row(n));
    result.loss += softplus(score);
    accumulate(n, sigmoid(score));
  }
  return result;
}

namespace {

// Scratch-buffer version of the pair step used in the training loop.
// targets[0] is the positive context; labels are implicit (1 then 0s).
void apply_pair_step(Matrix& input, Matrix& output, std::size_t center,
                     std::span<const std::size_t> targets, double lr, std::vector<double>& coeff,
                     std::vector<double>& center_delta) {
  const std::size_t dim = input.cols();
  const auto v = input.row(center);
  coeff.resize(targets.size());
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const double label = j == 0 ? 1.0 : 0.0;
    coeff[j] = (label - sigmoid(dot(v, output.row(targets[j])))) * lr;
  }
  center_delta.assign(dim, 0.0);
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const auto u = output.row(targets[j]);
    for (std::size_t d = 0; d < dim; ++d) center_delta[d] += coeff[j] * u[d];
  }
  for (std::size_t j = 0; j < targets.size(); ++j) {
    auto u = output.row(targets[j]);
    for (std::size_t d = 0; d < dim; ++d) u[d] += coeff[j] * v[d];
  }
  for (std::size_t d = 0; d < dim; ++d) v[d] += center_delta[d];
}

}  // namespace

void sgd_pair_step(EmbeddingModel& model, std::size_t center, std::size_t context,
                   std::span<const std::size_t> negatives, double lr) {
  check_index(model, center);
  check_index(model, context);
  for (auto n : negatives) check_index(model, n);
  std::vector<std::size_t> targets;
  targets.reserve(negatives.size() + 1);
  targets.push_back(context);
  targets.insert(targets.end(), negatives.begin(), negatives.end());
  std::vector<double> coeff, delta;
  apply_pair_step(model.input_vectors, model.output_vectors, center, targets, lr, coeff, delta);
}

// ---------------------------------------------------------------------------
// Negative sampling

NegativeSampler::NegativeSampler(const Vocabulary& vocab, double power) {
  cumulative_.reserve(vocab.size());
  double total = 0.0;
  bool any_positive = false;
  for (std::size_t i = 0; i < vocab.size(); ++i) any_positive |= vocab.count(i) > 0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    // Loaded models carry no counts; fall back to uniform.
    const double weight =
        any_positive ? std::pow(static_cast<double>(vocab.count(i)), power) : 1.0;
    total += weight;
    cumulative_.push_back(total);
  }
  for (double& c : cumulative_) c /= total;
  if (!cumulative_.empty()) cumulative_.back() = 1.0;
}

std::size_t NegativeSampler::draw(std::mt19937_64& rng) const {
  const double u = std::generate_canonical<double, 64>(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  return static_cast<std::size_t>(it - cumulative_.begin());
}

double NegativeSampler::probability(std::size_t index) const {
  return index == 0 ? cumulative_[0] : cumulative_[index] - cumulative_[index - 1];
}

// ---------------------------------------------------------------------------
// Training

namespace {

using IndexSentence = std::vector<std::size_t>;

class TrainerShard {
 public:
  TrainerShard(EmbeddingModel& model, const TrainConfig& config, const NegativeSampler& sampler,
               std::atomic<std::uint64_t>& words_done, std::uint64_t total_words,
               std::uint64_t seed)
      : model_(model),
        config_(config),
        sampler_(sampler),
        words_done_(words_done),
        total_words_(total_words),
        rng_(seed) {}

  void process(const IndexSentence& raw) {
    kept_.clear();
    for (auto index : raw) {
      if (keep(index)) kept_.push_back(index);
    }
    words_done_.fetch_add(raw.size(), std::memory_order_relaxed);
    for (std::size_t pos = 0; pos < kept_.size(); ++pos) {
      const double lr = current_lr();
      std::uniform_int_distribution<std::size_t> radius_dist(1, config_.window);
      const std::size_t radius = radius_dist(rng_);
      const std::size_t lo = pos >= radius ? pos - radius : 0;
      const std::size_t hi = std::min(kept_.size() - 1, pos + radius);
      for (std::size_t c = lo; c <= hi; ++c) {
        if (c == pos) continue;
        train_pair(kept_[pos], kept_[c], lr);
      }
    }
  }

  double current_lr() const {
    const double progress = total_words_ == 0
                                ? 1.0
                                : static_cast<double>(words_done_.load(std::memory_order_relaxed)) /
                                      static_cast<double>(total_words_);
    return config_.initial_lr * std::max(1e-4, 1.0 - progress);
  }

  std::uint64_t pairs() const { return pairs_; }

 private:
  bool keep(std::size_t index) {
    if (config_.subsample_threshold <= 0.0) return true;
    const double freq = static_cast<double>(model_.vocab.count(index));
    const double scaled = config_.subsample_threshold * static_cast<double>(model_.vocab.total_tokens());
    if (freq <= 0.0 || scaled <= 0.0) return true;
    const double keep_probability = (std::sqrt(freq / scaled) + 1.0) * scaled / freq;
    return keep_probability >= 1.0 || std::generate_canonical<double, 64>(rng_) < keep_probability;
  }

  void train_pair(std::size_t center, std::size_t context, double lr) {
    targets_.clear();
    targets_.push_back(context);
    if (sampler_.size() > 1) {
      while (targets_.size() < config_.negatives + 1) {
        const auto negative = sampler_.draw(rng_);
        if (negative != context) targets_.push_back(negative);
      }
    }
    apply_pair_step(model_.input_vectors, model_.output_vectors, center, targets_, lr, coeff_,
                    delta_);
    ++pairs_;
  }

  EmbeddingModel& model_;
  const TrainConfig& config_;
  const NegativeSampler& sampler_;
  std::atomic<std::uint64_t>& words_done_;
  std::uint64_t total_words_;
  std::mt19937_64 rng_;
  IndexSentence kept_;
  std::vector<std::size_t> targets_;
  std::vector<double> coeff_, delta_;
  std::uint64_t pairs_ = 0;
};

// Bounded hand-off between the reader thread and the shards.
class BatchQueue {
 public:
  explicit BatchQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(std::vector<IndexSentence> batch) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return queue_.size() < capacity_; });
    queue_.push_back(std::move(batch));
    not_empty_.notify_one();
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
  }

  std::optional<std::vector<IndexSentence>> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    auto batch = std::move(queue_.front());
    queue_.pop_front();
    not_full_.notify_one();
    return batch;
  }

 private:
  std::size_t capacity_;
  std::deque<std::vector<IndexSentence>> queue_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_empty_, not_full_;
};

IndexSentence to_indices(const Vocabulary& vocab, const corpus::Sentence& sentence) {
  IndexSentence out;
  out.reserve(sentence.size());
  for (const auto& token : sentence) {
    if (auto index = vocab.index_of(token)) out.push_back(*index);
  }
  return out;
}

}  // namespace

TrainStats train(EmbeddingModel& model, const corpus::SentenceStream& sentences,
                 const TrainConfig& config) {
  if (config.epochs == 0) return {};
  config.validate();
  if (model.input_vectors.rows() != model.vocab.size() ||
      model.output_vectors.rows() != model.vocab.size() ||
      model.output_vectors.cols() != model.dim()) {
    throw Error(ErrorCategory::parameter, "model matrices do not match the vocabulary");
  }

  const NegativeSampler sampler(model.vocab);
  std::atomic<std::uint64_t> words_done{0};
  const std::uint64_t total_words = model.vocab.total_tokens() * config.epochs;
  TrainStats stats;

  if (config.workers == 1) {
    TrainerShard shard(model, config, sampler, words_done, total_words, config.rng_seed);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      sentences.for_each([&](const corpus::Sentence& sentence) {
        shard.process(to_indices(model.vocab, sentence));
      });
    }
    stats.pairs = shard.pairs();
    stats.final_lr = shard.current_lr();
  } else {
    constexpr std::size_t kBatchWords = 10000;
    std::vector<std::unique_ptr<TrainerShard>> shards;
    for (std::size_t w = 0; w < config.workers; ++w) {
      shards.push_back(std::make_unique<TrainerShard>(
          model, config, sampler, words_done, total_words,
          config.rng_seed + 0x9E3779B97F4A7C15ULL * (w + 1)));
    }
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      BatchQueue queue(2 * config.workers);
      std::vector<std::thread> threads;
      for (auto& shard : shards) {
        threads.emplace_back([&queue, s = shard.get()] {
          while (auto batch = queue.pop()) {
            for (const auto& sentence : *batch) s->process(sentence);
          }
        });
      }
      std::vector<IndexSentence> batch;
      std::size_t batch_words = 0;
      try {
        sentences.for_each([&](const corpus::Sentence& sentence) {
          batch.push_back(to_indices(model.vocab, sentence));
          batch_words += batch.back().size();
          if (batch_words >= kBatchWords) {
            queue.push(std::move(batch));
            batch.clear();
            batch_words = 0;
          }
        });
      } catch (...) {
        queue.close();
        for (auto& t : threads) t.join();
        throw;
      }
      if (!batch.empty()) queue.push(std::move(batch));
      queue.close();
      for (auto& t : threads) t.join();
    }
    for (const auto& shard : shards) stats.pairs += shard->pairs();
    stats.final_lr = shards.front()->current_lr();
  }
  stats.words_processed = words_done.load();
  return stats;
}

// ---------------------------------------------------------------------------
// Persistence

void save_model(const EmbeddingModel& model, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write model file " + path.string());
  out << model.vocab.size() << ' ' << model.dim() << '\n';
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    out << model.vocab.word(i);
    for (double value : model.input_vectors.row(i)) out << ' ' << csv::format_real(value);
    out << '\n';
  }
  if (!out) throw Error(ErrorCategory::io, "write failure on " + path.string());
}

EmbeddingModel load_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open model file " + path.string());
  auto fail = [&](std::size_t line, const std::string& what) {
    throw Error(ErrorCategory::format,
                path.string() + ":" + std::to_string(line) + ": " + what);
  };

  std::string line;
  if (!std::getline(in, line)) fail(1, "missing \"V D\" header");
  std::size_t rows = 0, dim = 0;
  {
    std::istringstream header(line);
    std::string a, b, extra;
    header >> a >> b;
    auto v = csv::parse_integer(a);
    auto d = csv::parse_integer(b);
    if (!v || !d || *v < 1 || *d < 1 || (header >> extra)) {
      fail(1, "malformed header, expected \"V D\" with positive integers");
    }
    rows = static_cast<std::size_t>(*v);
    dim = static_cast<std::size_t>(*d);
  }

  std::vector<std::string> words;
  words.reserve(rows);
  Matrix vectors;
  std::vector<double> values(dim);
  std::size_t line_number = 1;
  std::string token;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (words.size() == rows) {
      fail(line_number, "more rows than the " + std::to_string(rows) + " declared in the header");
    }
    std::istringstream row(line);
    std::string word;
    row >> word;
    std::size_t column = 0;
    while (row >> token) {
      if (column == dim) fail(line_number, "more than " + std::to_string(dim) + " vector columns");
      auto value = csv::parse_real(token);
      if (!value || !std::isfinite(*value)) fail(line_number, "non-numeric value '" + token + "'");
      values[column++] = *value;
    }
    if (column != dim) {
      fail(line_number, "expected " + std::to_string(dim) + " vector columns, found " +
                            std::to_string(column));
    }
    words.push_back(std::move(word));
    vectors.append_row(values);
  }
  if (words.size() != rows) {
    fail(line_number + 1, "expected " + std::to_string(rows) + " rows, found " +
                              std::to_string(words.size()));
  }
  EmbeddingModel model;
  try {
    model.vocab = Vocabulary::from_words(std::move(words));
  } catch (const Error& e) {
    throw Error(ErrorCategory::format, path.string() + ": " + e.what());
  }
  model.input_vectors = std::move(vectors);
  model.output_vectors = Matrix(rows, dim);
  return model;
}

}  // namespace notevec::embedding
