#include "notevec/synth.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "notevec/error.h"

namespace notevec::synth {

using namespace std::chrono;

namespace {

// Bijective base-26 over a..z: 0 -> a, 25 -> z, 26 -> aa.
std::string letters(std::size_t n) {
  std::string out;
  ++n;
  while (n > 0) {
    --n;
    out.push_back(static_cast<char>('a' + n % 26));
    n /= 26;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::string topic_word(std::size_t topic, std::size_t j) { return "t" + letters(topic) + "w" + letters(j); }
std::string shared_word(std::size_t j) { return "s" + letters(j); }

double uniform01(std::mt19937_64& rng) { return std::generate_canonical<double, 64>(rng); }

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

corpus::Sentence draw_sentence(const TopicSpec& spec, const TopicCorpus& c, std::size_t topic,
                               std::mt19937_64& rng) {
  const std::size_t length =
      std::uniform_int_distribution<std::size_t>(spec.sentence_min, spec.sentence_max)(rng);
  corpus::Sentence sentence;
  sentence.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const bool ambient = !c.shared_words.empty() && uniform01(rng) >= spec.topic_purity;
    const auto& pool = ambient ? c.shared_words : c.topic_words[topic];
    sentence.push_back(pool[uniform_index(rng, pool.size())]);
  }
  return sentence;
}

TopicCorpus make_lexicon(const TopicSpec& spec) {
  TopicCorpus c;
  c.topic_words.resize(spec.n_topics);
  for (std::size_t t = 0; t < spec.n_topics; ++t) {
    for (std::size_t j = 0; j < spec.words_per_topic; ++j) {
      c.topic_words[t].push_back(topic_word(t, j));
      c.topic_of.emplace(c.topic_words[t].back(), static_cast<int>(t));
    }
  }
  for (std::size_t j = 0; j < spec.shared_words; ++j) {
    c.shared_words.push_back(shared_word(j));
    c.topic_of.emplace(c.shared_words.back(), kSharedTopic);
  }
  return c;
}

}  // namespace

void TopicSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCategory::parameter, what); };
  if (n_topics < 1) fail("synth.n_topics must be >= 1");
  if (words_per_topic < 1) fail("synth.words_per_topic must be >= 1");
  if (sentence_min < 1) fail("synth.sentence_min must be >= 1 (zero-length sentences are infeasible)");
  if (sentence_max < sentence_min) fail("synth.sentence_max must be >= synth.sentence_min");
  if (!(topic_purity > 0.0 && topic_purity <= 1.0)) fail("synth.purity must be in (0, 1]");
}

TopicCorpus gen_topic_corpus(const TopicSpec& spec) {
  spec.validate();
  TopicCorpus c = make_lexicon(spec);
  std::mt19937_64 rng(spec.rng_seed);
  std::unordered_map<std::string, std::size_t> counts;
  auto emit = [&](std::size_t topic) {
    auto sentence = draw_sentence(spec, c, topic, rng);
    for (const auto& w : sentence) ++counts[w];
    c.sentences.push_back(std::move(sentence));
    c.sentence_topics.push_back(topic);
  };
  for (std::size_t s = 0; s < spec.n_sentences; ++s) emit(uniform_index(rng, spec.n_topics));

  // Top up until every topic word reaches min_count.
  for (;;) {
    std::size_t starved_topic = spec.n_topics;
    for (std::size_t t = 0; t < spec.n_topics && starved_topic == spec.n_topics; ++t) {
      for (const auto& w : c.topic_words[t]) {
        if (counts[w] < spec.min_count) {
          starved_topic = t;
          break;
        }
      }
    }
    if (starved_topic == spec.n_topics) break;
    emit(starved_topic);
  }
  return c;
}

std::string render_sentence(const corpus::Sentence& sentence, std::uint64_t salt) {
  std::mt19937_64 rng(salt);
  static constexpr char kDelimiters[] = {'.', '.', '.', ';', '?', '!'};
  std::string out;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (i > 0) out.push_back(' ');
    std::string word = sentence[i];
    if (i == 0 || uniform01(rng) < 0.05) word[0] = static_cast<char>(word[0] - 'a' + 'A');
    out += word;
    const double r = uniform01(rng);
    if (r < 0.08) {
      out += ",";
    } else if (r < 0.12) {
      out += " " + std::to_string(uniform_index(rng, 200)) + "%";
    } else if (r < 0.14) {
      out += " (" + std::to_string(uniform_index(rng, 20)) + ")";
    }
  }
  out.push_back(kDelimiters[uniform_index(rng, std::size(kDelimiters))]);
  return out;
}

SynthDataset gen_labeled_encounters(const TopicSpec& spec, const EncounterSpec& enc) {
  if (enc.n_encounters < 20) throw Error(ErrorCategory::parameter, "synth.encounters must be >= 20");
  if (!(enc.cutoff_fraction > 0.0 && enc.cutoff_fraction < 1.0)) {
    throw Error(ErrorCategory::parameter, "synth.cutoff_fraction must be in (0, 1)");
  }
  if (!std::isfinite(enc.signal_beta)) throw Error(ErrorCategory::parameter, "synth.beta must be finite");

  SynthDataset data;
  data.corpus = gen_topic_corpus(spec);
  data.cutoff = enc.cutoff;
  std::mt19937_64 rng(spec.rng_seed ^ 0xA5A5A5A5DEADBEEFULL);

  const auto n_train = static_cast<std::size_t>(
      std::llround(enc.cutoff_fraction * static_cast<double>(enc.n_encounters)));
  const sys_days cutoff{enc.cutoff};
  const sys_days train_start{year{2012} / January / 1};
  const auto train_span = static_cast<std::size_t>((cutoff - train_start).count());
  constexpr std::size_t kTestSpan = 184;  // 2014-07-01 .. 2014-12-31
  std::normal_distribution<double> lace_noise(0.0, 3.0);

  for (std::size_t e = 0; e < enc.n_encounters; ++e) {
    SynthEncounter encounter;
    encounter.encounter_id = std::to_string(100000 + e);
    const double theta = uniform01(rng);
    std::size_t topic0_tokens = 0, total_tokens = 0;
    const std::size_t n_notes = 1 + uniform_index(rng, 3);
    for (std::size_t k = 0; k < n_notes; ++k) {
      std::string note;
      const std::size_t n_sentences = 2 + uniform_index(rng, 3);
      for (std::size_t s = 0; s < n_sentences; ++s) {
        std::size_t topic = 0;
        if (spec.n_topics > 1 && uniform01(rng) >= theta) topic = 1 + uniform_index(rng, spec.n_topics - 1);
        const auto sentence = draw_sentence(spec, data.corpus, topic, rng);
        for (const auto& w : sentence) {
          ++total_tokens;
          topic0_tokens += data.corpus.topic_of.at(w) == 0;
        }
        if (!note.empty()) note.push_back(' ');
        note += render_sentence(sentence, rng());
      }
      encounter.notes.push_back(std::move(note));
    }
    encounter.topic_share = static_cast<double>(topic0_tokens) / static_cast<double>(total_tokens);
    const double p = 1.0 / (1.0 + std::exp(-enc.signal_beta * (encounter.topic_share - enc.base_share)));
    encounter.label = uniform01(rng) < p ? 1 : 0;
    if (encounter.label == 1) {
      encounter.readmit_lag = 1 + static_cast<long long>(uniform_index(rng, 30));
    } else {
      const double r = uniform01(rng);
      if (r < 0.6) {
        encounter.readmit_lag = std::nullopt;
      } else if (r < 0.7) {
        encounter.readmit_lag = 0;
      } else {
        encounter.readmit_lag = 31 + static_cast<long long>(uniform_index(rng, 300));
      }
    }
    const sys_days date = e < n_train ? train_start + days{static_cast<int>(uniform_index(rng, train_span))}
                                      : cutoff + days{static_cast<int>(uniform_index(rng, kTestSpan))};
    encounter.discharge_date = year_month_day{date};
    encounter.lace = std::clamp(std::round(4.0 + 10.0 * encounter.topic_share + lace_noise(rng)), 0.0, 19.0);
    data.encounters.push_back(std::move(encounter));
  }
  return data;
}

std::vector<corpus::RawNote> SynthDataset::raw_notes() const {
  std::vector<corpus::RawNote> notes;
  for (const auto& e : encounters) {
    for (const auto& text : e.notes) notes.push_back({e.encounter_id, text});
  }
  return notes;
}

std::vector<learn::LabelRecord> SynthDataset::label_records() const {
  std::vector<learn::LabelRecord> labels;
  for (const auto& e : encounters) labels.push_back({e.encounter_id, e.readmit_lag, e.discharge_date, e.lace});
  return labels;
}

}  // namespace notevec::synth
