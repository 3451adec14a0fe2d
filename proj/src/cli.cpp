#include "notevec/cli.h"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <unordered_set>

#include "CLI11.hpp"
#include "notevec/corpus.h"
#include "notevec/csv.h"
#include "notevec/error.h"
#include "notevec/features.h"

namespace notevec::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

const std::map<std::string, std::string>& Config::defaults() {
  static const std::map<std::string, std::string> kDefaults = {
      {"corpus_dir", "corpus"},
      {"clean_dir", "corpus_clean"},
      {"notes_csv", "notes.csv"},
      {"labels_csv", "labels.csv"},
      {"model_path", "model.txt"},
      {"seeds_file", "seeds.txt"},
      {"bags_dir", "bags"},
      {"clusters_csv", "wordclusters.csv"},
      {"sim_table_csv", "wordClusterSimilarity.csv"},
      {"features_dir", "features"},
      {"report_path", "report.txt"},
      {"clean.dedup", "false"},
      {"train.dim", "500"},
      {"train.window", "10"},
      {"train.min_count", "100"},
      {"train.negatives", "5"},
      {"train.epochs", "5"},
      {"train.lr", "0.025"},
      {"train.seed", "1"},
      {"train.workers", "1"},
      {"train.subsample", "0"},
      {"bags.topn", "200"},
      {"cluster.k", "150"},
      {"cluster.max_iter", "100"},
      {"cluster.tol", "1e-9"},
      {"cluster.seed", "84"},
      {"model.rounds", "100"},
      {"model.cutoff_date", "2014-07-01"},
      {"score.mode", "all"},
      {"score.strict_compat", "false"},
      {"synth.n_topics", "2"},
      {"synth.words_per_topic", "30"},
      {"synth.shared_words", "20"},
      {"synth.sentence_min", "6"},
      {"synth.sentence_max", "12"},
      {"synth.purity", "0.8"},
      {"synth.sentences", "5000"},
      {"synth.min_count", "5"},
      {"synth.encounters", "500"},
      {"synth.cutoff_fraction", "0.5"},
      {"synth.beta", "12"},
      {"synth.seed", "7"},
  };
  return kDefaults;
}

Config::Config() : values_(defaults()) {}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCategory::parameter, "unknown config key '" + key + "'");
  it->second = value;
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCategory::parameter, "unknown config key '" + key + "'");
  return it->second;
}

void Config::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot read config file " + path.string());
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string();
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
  };
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCategory::parameter,
                  path.string() + ":" + std::to_string(number) + ": expected `key = value`");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCategory::parameter, path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

fs::path Config::path(const std::string& key) const {
  fs::path p = get(key);
  return p.is_absolute() ? p : base_dir / p;
}

double Config::real(const std::string& key) const {
  auto value = csv::parse_real(get(key));
  if (!value) throw Error(ErrorCategory::parameter, key + " must be a number, got '" + get(key) + "'");
  return *value;
}

std::uint64_t Config::count(const std::string& key) const {
  auto value = csv::parse_integer(get(key));
  if (!value || *value < 0) {
    throw Error(ErrorCategory::parameter, key + " must be a non-negative integer, got '" + get(key) + "'");
  }
  return static_cast<std::uint64_t>(*value);
}

bool Config::flag(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCategory::parameter, key + " must be true or false, got '" + v + "'");
}

PipelineConfig PipelineConfig::from(const Config& c) {
  PipelineConfig p;
  p.corpus_dir = c.path("corpus_dir");
  p.clean_dir = c.path("clean_dir");
  p.notes_csv = c.path("notes_csv");
  p.labels_csv = c.path("labels_csv");
  p.model_path = c.path("model_path");
  p.seeds_file = c.path("seeds_file");
  p.bags_dir = c.path("bags_dir");
  p.clusters_csv = c.path("clusters_csv");
  p.sim_table_csv = c.path("sim_table_csv");
  p.features_dir = c.path("features_dir");
  p.report_path = c.path("report_path");
  p.dedup_notes = c.flag("clean.dedup");

  p.train.dim = c.count("train.dim");
  p.train.window = c.count("train.window");
  p.train.min_count = c.count("train.min_count");
  p.train.negatives = c.count("train.negatives");
  p.train.epochs = c.count("train.epochs");
  p.train.initial_lr = c.real("train.lr");
  p.train.rng_seed = c.count("train.seed");
  p.train.workers = c.count("train.workers");
  p.train.subsample_threshold = c.real("train.subsample");
  p.train.validate();

  p.bag_topn = c.count("bags.topn");
  if (p.bag_topn < 1) throw Error(ErrorCategory::parameter, "bags.topn must be >= 1");

  p.cluster.k = c.count("cluster.k");
  p.cluster.max_iter = c.count("cluster.max_iter");
  p.cluster.tol = c.real("cluster.tol");
  p.cluster.rng_seed = c.count("cluster.seed");
  if (p.cluster.k < 1) throw Error(ErrorCategory::parameter, "cluster.k must be >= 1");
  if (p.cluster.max_iter < 1) throw Error(ErrorCategory::parameter, "cluster.max_iter must be >= 1");

  p.rounds = c.count("model.rounds");
  if (p.rounds < 1) throw Error(ErrorCategory::parameter, "model.rounds must be >= 1");
  try {
    p.cutoff = learn::parse_date(c.get("model.cutoff_date"));
  } catch (const Error& e) {
    throw Error(ErrorCategory::parameter, std::string("model.cutoff_date: ") + e.what());
  }

  const auto& mode = c.get("score.mode");
  if (mode == "all") p.score_mode = ScoreMode::all;
  else if (mode == "bags") p.score_mode = ScoreMode::bags;
  else if (mode == "percentage") p.score_mode = ScoreMode::percentage;
  else if (mode == "affinity") p.score_mode = ScoreMode::affinity;
  else throw Error(ErrorCategory::parameter, "score.mode must be all, bags, percentage or affinity");
  p.strict_compat = c.flag("score.strict_compat");

  p.topics.n_topics = c.count("synth.n_topics");
  p.topics.words_per_topic = c.count("synth.words_per_topic");
  p.topics.shared_words = c.count("synth.shared_words");
  p.topics.sentence_min = c.count("synth.sentence_min");
  p.topics.sentence_max = c.count("synth.sentence_max");
  p.topics.topic_purity = c.real("synth.purity");
  p.topics.n_sentences = c.count("synth.sentences");
  p.topics.min_count = c.count("synth.min_count");
  p.topics.rng_seed = c.count("synth.seed");
  p.encounters.n_encounters = c.count("synth.encounters");
  p.encounters.cutoff_fraction = c.real("synth.cutoff_fraction");
  p.encounters.signal_beta = c.real("synth.beta");
  p.encounters.cutoff = p.cutoff;
  return p;
}

// ---------------------------------------------------------------------------
// Commands

void Log::info(const std::string& message) const {
  if (verbose_) out_ << "info: " << message << '\n';
}

void Log::warn(const std::string& message) const { out_ << "warning: " << message << '\n'; }

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create directory " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

std::ofstream open_output(const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  return out;
}

void require_exists(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw Error(ErrorCategory::io, what + " not found: " + path.string());
}

std::vector<std::string> read_seed_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot read seeds file " + path.string());
  std::vector<std::string> seeds;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    seeds.push_back(line.substr(first, line.find_last_not_of(" \t\r") - first + 1));
  }
  return seeds;
}

// Sorted `*.csv` files of a directory; empty if it does not exist.
std::vector<fs::path> csv_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<corpus::CleanNote> load_clean_notes(const fs::path& path) {
  std::vector<corpus::CleanNote> notes;
  for (const auto& raw : corpus::load_notes(path)) notes.push_back(corpus::clean_note(raw));
  return notes;
}

void report_empty(const features::FeatureBuild& build, bool dropped, const Log& log) {
  for (const auto& id : build.empty_encounters) {
    log.warn("encounter " + id + " has no usable tokens; " + (dropped ? "dropped" : "all-zero row"));
  }
}

}  // namespace

void cmd_clean(const PipelineConfig& config, const Log& log) {
  const auto files = corpus::list_corpus_files(config.corpus_dir);
  ensure_dir(config.clean_dir);
  std::unordered_set<std::string> seen;
  std::size_t lines = 0, sentences = 0, duplicates = 0;
  std::string line;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCategory::io, "cannot read corpus file " + file.string());
    auto out = open_output(config.clean_dir / file.filename());
    while (std::getline(in, line)) {
      ++lines;
      if (config.dedup_notes && !seen.insert(line).second) {
        ++duplicates;
        continue;
      }
      for (const auto& sentence : corpus::split_sentences(corpus::normalize_text(line))) {
        for (std::size_t i = 0; i < sentence.size(); ++i) out << (i ? " " : "") << sentence[i];
        out << '\n';
        ++sentences;
      }
    }
  }
  log.info("cleaned " + std::to_string(files.size()) + " files, " + std::to_string(lines) + " lines -> " +
           std::to_string(sentences) + " sentences" +
           (config.dedup_notes ? " (" + std::to_string(duplicates) + " duplicate lines skipped)" : ""));
}

void cmd_train(const PipelineConfig& config, const Log& log) {
  const corpus::CorpusStream stream(config.clean_dir);
  log.info("building vocabulary from " + config.clean_dir.string());
  const auto vocab = embedding::build_vocab(stream, config.train.min_count);
  log.info("vocabulary: " + std::to_string(vocab.size()) + " words, " +
           std::to_string(vocab.total_tokens()) + " retained tokens");
  auto model = embedding::init_model(vocab, config.train);
  const auto stats = embedding::train(model, stream, config.train);
  log.info("trained " + std::to_string(stats.pairs) + " pairs over " + std::to_string(config.train.epochs) +
           " epochs");
  ensure_parent(config.model_path);
  embedding::save_model(model, config.model_path);
}

void cmd_similar(const PipelineConfig& config, const std::string& word, std::size_t topn,
                 std::ostream& out) {
  const auto model = embedding::load_model(config.model_path);
  for (const auto& n : vecops::most_similar(model, word, topn)) {
    out << n.word << ',' << csv::format_fixed(n.score, 6) << '\n';
  }
}

void cmd_bags(const PipelineConfig& config, const Log& log) {
  const auto model = embedding::load_model(config.model_path);
  const auto seeds = read_seed_list(config.seeds_file);
  ensure_dir(config.bags_dir);
  std::unordered_set<std::string> done;
  std::size_t written = 0;
  for (const auto& seed : seeds) {
    if (!done.insert(seed).second) {
      log.warn("seed '" + seed + "' listed more than once; using the first");
      continue;
    }
    if (!model.vocab.contains(seed)) {
      log.warn("skipping seed '" + seed + "': not in vocabulary");
      continue;
    }
    vecops::write_seed_bag_csv(vecops::build_seed_bag(model, seed, config.bag_topn),
                               config.bags_dir / (seed + ".csv"));
    ++written;
  }
  log.info("wrote " + std::to_string(written) + " seed bags to " + config.bags_dir.string());
}

void cmd_cluster(const PipelineConfig& config, const Log& log) {
  const auto model = embedding::load_model(config.model_path);
  const auto clusters = vecops::spherical_kmeans(model.input_vectors, config.cluster);
  log.info("spherical k-means: k=" + std::to_string(clusters.k()) + ", " +
           std::to_string(clusters.iterations) + " iterations, objective " +
           csv::format_real(clusters.objective()) + (clusters.converged ? "" : " (max_iter reached)"));
  ensure_parent(config.clusters_csv);
  vecops::write_word_clusters_csv(vecops::word_clusters(model, clusters), config.clusters_csv);
  ensure_parent(config.sim_table_csv);
  vecops::write_sim_table_csv(vecops::build_sim_table(model, clusters), config.sim_table_csv);
}

void cmd_score(const PipelineConfig& config, const Log& log) {
  const auto notes = load_clean_notes(config.notes_csv);
  const features::FeatureOptions options{config.strict_compat};
  const bool any = config.score_mode == ScoreMode::all;
  std::size_t produced = 0;

  const auto bag_files = csv_files(config.bags_dir);
  if (config.score_mode == ScoreMode::bags || (any && !bag_files.empty())) {
    if (bag_files.empty()) throw Error(ErrorCategory::io, "no seed bags in " + config.bags_dir.string());
    std::vector<vecops::SeedBag> bags;
    for (const auto& file : bag_files) {
      bags.push_back(vecops::read_seed_bag_csv(file, file.stem().string(), config.bag_topn));
    }
    const auto build = features::build_bag_features(notes, bags, options);
    report_empty(build, false, log);
    const auto dir = config.features_dir / "bags";
    ensure_dir(dir);
    for (std::size_t c = 0; c < build.table.columns().size(); ++c) {
      features::write_feature_csv(build.table.select_column(c), dir / (build.table.columns()[c] + ".csv"));
    }
    ++produced;
  }

  const bool have_clusters = fs::exists(config.clusters_csv);
  const bool want_percentage = config.score_mode == ScoreMode::percentage || (any && have_clusters);
  const bool want_affinity = config.score_mode == ScoreMode::affinity ||
                             (any && have_clusters && fs::exists(config.sim_table_csv));
  if (want_percentage || want_affinity) {
    require_exists(config.clusters_csv, "word clusters");
    const auto clusters = vecops::read_word_clusters_csv(config.clusters_csv);
    ensure_dir(config.features_dir);
    if (want_percentage) {
      const auto build = features::build_cluster_features(notes, clusters, nullptr,
                                                          features::ClusterMode::percentage, options);
      report_empty(build, config.strict_compat, log);
      features::write_feature_csv(build.table, config.features_dir / "cluster_percentage.csv");
      ++produced;
    }
    if (want_affinity) {
      require_exists(config.sim_table_csv, "word-cluster similarity table");
      const auto sims = vecops::read_sim_table_csv(config.sim_table_csv);
      const auto build = features::build_cluster_features(notes, clusters, &sims,
                                                          features::ClusterMode::affinity, options);
      report_empty(build, config.strict_compat, log);
      features::write_feature_csv(build.table, config.features_dir / "cluster_affinity.csv");
      ++produced;
    }
  }
  if (produced == 0) {
    throw Error(ErrorCategory::io, "nothing to score: no seed bags in " + config.bags_dir.string() +
                                       " and no clusters at " + config.clusters_csv.string());
  }
  log.info("scored " + std::to_string(notes.size()) + " notes into " + std::to_string(produced) + " feature sets");
}

std::vector<learn::EvaluationResult> cmd_evaluate(const PipelineConfig& config, const Log& log,
                                                  std::ostream& out) {
  const auto labels = learn::read_labels_csv(config.labels_csv);
  std::vector<learn::EvaluationResult> results;

  if (std::any_of(labels.begin(), labels.end(), [](const auto& l) { return l.lace.has_value(); })) {
    results.push_back(learn::evaluate_baseline(labels, config.cutoff, config.rounds));
  }
  const auto bag_files = csv_files(config.features_dir / "bags");
  if (!bag_files.empty()) {
    features::FeatureTable merged;
    for (std::size_t i = 0; i < bag_files.size(); ++i) {
      auto table = features::read_feature_csv(bag_files[i]);
      merged = i == 0 ? std::move(table) : features::FeatureTable::outer_join(merged, table);
    }
    results.push_back(learn::evaluate_pipeline(merged, labels, config.cutoff, config.rounds, "bags"));
  }
  for (const char* name : {"cluster_percentage", "cluster_affinity"}) {
    const auto path = config.features_dir / (std::string(name) + ".csv");
    if (!fs::exists(path)) continue;
    results.push_back(
        learn::evaluate_pipeline(features::read_feature_csv(path), labels, config.cutoff, config.rounds, name));
  }
  if (results.empty()) {
    throw Error(ErrorCategory::io, "no feature sets in " + config.features_dir.string() + " and no LACE column");
  }

  auto report = open_output(config.report_path);
  for (const auto& r : results) {
    if (r.dropped_incomplete > 0) {
      log.warn(r.feature_set + ": dropped " + std::to_string(r.dropped_incomplete) +
               " training rows with missing features");
    }
    const std::string line = r.feature_set + " auc=" + csv::format_fixed(r.auc.auc, 4) +
                             " positives=" + std::to_string(r.auc.positives) +
                             " negatives=" + std::to_string(r.auc.negatives) +
                             " train_rows=" + std::to_string(r.train_rows) +
                             " test_rows=" + std::to_string(r.test_rows);
    out << line << '\n';
    report << line << '\n';
  }
  return results;
}

void cmd_synth(const PipelineConfig& config, const Log& log) {
  const auto data = synth::gen_labeled_encounters(config.topics, config.encounters);
  ensure_dir(config.corpus_dir);
  {
    auto out = open_output(config.corpus_dir / "synth_corpus.txt");
    constexpr std::size_t kSentencesPerLine = 4;
    const auto& sentences = data.corpus.sentences;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      out << synth::render_sentence(sentences[i], config.topics.rng_seed * 1000003ULL + i);
      out << ((i + 1) % kSentencesPerLine == 0 || i + 1 == sentences.size() ? "\n" : " ");
    }
  }
  ensure_parent(config.notes_csv);
  corpus::write_notes(config.notes_csv, data.raw_notes());
  ensure_parent(config.labels_csv);
  learn::write_labels_csv(data.label_records(), config.labels_csv);
  {
    auto out = open_output(config.seeds_file);
    for (const auto& words : data.corpus.topic_words) out << words.front() << '\n';
  }
  log.info("synthesised " + std::to_string(data.corpus.sentences.size()) + " corpus sentences and " +
           std::to_string(data.encounters.size()) + " encounters");
}

// ---------------------------------------------------------------------------
// Entry point

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Turn clinical note text into model features with word embeddings."};
  app.name(args.empty() ? "notevec" : args.front());
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> workers;
  bool verbose = false;
  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--seed", seed, "seed for training, clustering and synthesis");
  app.add_option("--workers", workers, "parallel embedding trainers");
  app.add_flag("--verbose,-v", verbose, "progress messages");

  std::map<std::string, std::optional<std::string>> overrides;
  for (const auto& [key, value] : Config::defaults()) {
    app.add_option("--" + key, overrides[key], "default: " + value)->group("Config overrides");
  }

  std::string word;
  std::size_t topn = 10;
  auto* clean = app.add_subcommand("clean", "clean the corpus directory into clean_dir");
  auto* train = app.add_subcommand("train", "build the vocabulary and train embeddings");
  auto* similar = app.add_subcommand("similar", "print the nearest words to WORD");
  similar->add_option("word", word, "query word")->required();
  similar->add_option("--topn", topn, "number of neighbours")->check(CLI::PositiveNumber);
  auto* bags = app.add_subcommand("bags", "write one seed-bag CSV per seed word");
  auto* cluster = app.add_subcommand("cluster", "spherical k-means over the word vectors");
  auto* score = app.add_subcommand("score", "turn notes into feature CSVs");
  auto* evaluate = app.add_subcommand("evaluate", "train AdaBoost per feature set and report test AUC");
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic corpus, notes and labels");

  std::vector<std::string> argv_tail(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(argv_tail.begin(), argv_tail.end());
  try {
    app.parse(argv_tail);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error:usage: " << e.what() << '\n';
    return 1;
  }

  const Log log(err, verbose);
  try {
    Config config;
    if (!config_path.empty()) {
      config.load_file(config_path);
      config.base_dir = fs::path(config_path).parent_path();
      if (config.base_dir.empty()) config.base_dir = ".";
    }
    for (const auto& [key, value] : overrides) {
      if (value) config.set(key, *value);
    }
    if (seed) {
      for (const char* key : {"train.seed", "cluster.seed", "synth.seed"}) config.set(key, std::to_string(*seed));
    }
    if (workers) config.set("train.workers", std::to_string(*workers));
    const auto pipeline = PipelineConfig::from(config);

    if (clean->parsed()) cmd_clean(pipeline, log);
    else if (train->parsed()) cmd_train(pipeline, log);
    else if (similar->parsed()) cmd_similar(pipeline, word, topn, out);
    else if (bags->parsed()) cmd_bags(pipeline, log);
    else if (cluster->parsed()) cmd_cluster(pipeline, log);
    else if (score->parsed()) cmd_score(pipeline, log);
    else if (evaluate->parsed()) cmd_evaluate(pipeline, log, out);
    else if (synth_cmd->parsed()) cmd_synth(pipeline, log);
    return 0;
  } catch (const Error& e) {
    err << "error:" << to_string(e.category()) << ": " << e.what() << '\n';
    return e.category() == ErrorCategory::lookup ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    err << "error:io: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error:internal: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace notevec::cli
