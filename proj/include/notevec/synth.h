#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "notevec/corpus.h"
#include "notevec/learn.h"

namespace notevec::synth {

struct TopicSpec {
  std::size_t n_topics = 2;
  std::size_t words_per_topic = 30;
  /// Ambient words shared by every topic.
  std::size_t shared_words = 20;
  std::size_t sentence_min = 6;
  std::size_t sentence_max = 12;
  /// Probability that a token comes from the sentence's topic rather than
  /// the shared words.
  double topic_purity = 0.8;
  std::size_t n_sentences = 5000;
  /// Every topic word is emitted at least this often.
  std::size_t min_count = 5;
  std::uint64_t rng_seed = 7;

  /// Throws a parameter error for an infeasible spec.
  void validate() const;
};

inline constexpr int kSharedTopic = -1;

struct TopicCorpus {
  std::vector<corpus::Sentence> sentences;
  /// Topic of each sentence.
  std::vector<std::size_t> sentence_topics;
  std::vector<std::vector<std::string>> topic_words;
  std::vector<std::string> shared_words;
  /// Ground truth: topic index, or kSharedTopic.
  std::unordered_map<std::string, int> topic_of;
};

/// Deterministic for a fixed seed.
TopicCorpus gen_topic_corpus(const TopicSpec& spec);

struct SynthEncounter {
  std::string encounter_id;
  std::vector<std::string> notes;
  int label = 0;
  std::optional<long long> readmit_lag;
  learn::Date discharge_date;
  double lace = 0.0;
  /// Realised share of topic-0 tokens across the encounter's notes.
  double topic_share = 0.0;
};

struct EncounterSpec {
  std::size_t n_encounters = 500;
  double cutoff_fraction = 0.5;
  /// Label probability is logistic(signal_beta * (topic_share - base_share)).
  double signal_beta = 12.0;
  double base_share = 0.5;
  learn::Date cutoff = learn::kDefaultCutoff;
};

struct SynthDataset {
  TopicCorpus corpus;
  std::vector<SynthEncounter> encounters;
  learn::Date cutoff;

  std::vector<corpus::RawNote> raw_notes() const;
  std::vector<learn::LabelRecord> label_records() const;
};

/// Topic corpus plus encounters whose notes mix the topics in random
/// proportions. The first round(cutoff_fraction * n) encounters are
/// discharged before the cutoff.
SynthDataset gen_labeled_encounters(const TopicSpec& spec, const EncounterSpec& encounters);

/// Renders a sentence as raw note text with capitals, stray punctuation and
/// numbers that the cleaning rules remove again.
std::string render_sentence(const corpus::Sentence& sentence, std::uint64_t salt);

}  // namespace notevec::synth
