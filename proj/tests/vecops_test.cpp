#include "notevec/vecops.h"

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "notevec/error.h"
#include "oracles.h"
#include "test_util.h"

namespace notevec::vecops {
namespace {

using embedding::EmbeddingModel;
using embedding::Vocabulary;
using notevec::testing::TempDir;
using notevec::testing::write_text;

EmbeddingModel hand_model(const std::vector<std::string>& words, const std::vector<oracle::Vec>& rows) {
  Matrix in(0, rows.at(0).size());
  for (const auto& r : rows) in.append_row(r);
  return {Vocabulary::from_words(words), in, Matrix(rows.size(), rows[0].size())};
}

Matrix to_matrix(const std::vector<oracle::Vec>& rows) {
  Matrix m(0, rows.at(0).size());
  for (const auto& r : rows) m.append_row(r);
  return m;
}

std::vector<oracle::Vec> random_rows(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  std::vector<oracle::Vec> rows(n, oracle::Vec(d));
  for (auto& r : rows)
    for (double& x : r) x = g(rng);
  return rows;
}

ErrorCategory category_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCategory::io;
}

TEST(Cosine, HandExamples) {
  const std::vector<double> v = {0.3, -2.0, 5.0};
  EXPECT_DOUBLE_EQ(cosine_similarity(v, v), 1.0);
  EXPECT_EQ(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(cosine_similarity(std::vector<double>{1, 1}, std::vector<double>{1, 0}), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(category_of([] { cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 0}); }),
            ErrorCategory::domain);
  EXPECT_EQ(category_of([] { cosine_similarity(std::vector<double>{1}, std::vector<double>{1, 0}); }),
            ErrorCategory::domain);
}

TEST(Cosine, SymmetricScaleInvariantAndBounded) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 1000; ++trial) {
    auto rows = random_rows(rng, 2, 1 + trial % 12);
    const double c = cosine_similarity(rows[0], rows[1]);
    EXPECT_NEAR(c, cosine_similarity(rows[1], rows[0]), 1e-12);
    EXPECT_LE(std::abs(c), 1.0);
    const double a = scale(rng), b = scale(rng);
    for (double& x : rows[0]) x *= a;
    for (double& x : rows[1]) x *= b;
    EXPECT_NEAR(cosine_similarity(rows[0], rows[1]), c, 1e-9);
  }
}

TEST(MostSimilar, NearerWordFirst) {
  const auto mid = oracle::unit({0.9, 0.1});
  const auto m = hand_model({"q", "near", "far"}, {{1, 0}, mid, {0, 1}});
  const auto result = most_similar(m, "q", 2);
  ASSERT_EQ(result.size(), 2u);
  EXPECT_EQ(result[0].word, "near");
  EXPECT_EQ(result[1].word, "far");
  EXPECT_NEAR(result[0].score, mid[0], 1e-15);
}

TEST(MostSimilar, ExhaustsVocabularyAndRejectsBadInput) {
  std::mt19937_64 rng(3);
  const auto m = hand_model({"a", "b", "c", "d"}, random_rows(rng, 4, 3));
  EXPECT_EQ(most_similar(m, "a", 3).size(), 3u);
  EXPECT_EQ(most_similar(m, "a", 50).size(), 3u);
  EXPECT_EQ(category_of([&] { most_similar(m, "zzz", 3); }), ErrorCategory::lookup);
  EXPECT_EQ(category_of([&] { most_similar(m, "a", 0); }), ErrorCategory::parameter);
}

TEST(MostSimilar, MatchesBruteForceRankingAndIsScaleInvariant) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t v = 2 + rng() % 20;
    std::vector<std::string> words;
    for (std::size_t i = 0; i < v; ++i) words.push_back("w" + std::to_string(i));
    auto rows = random_rows(rng, v, 2 + rng() % 6);
    const auto m = hand_model(words, rows);
    const std::size_t q = rng() % v, topn = 1 + rng() % v;

    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < v; ++i)
      if (i != q) all.push_back({-oracle::cosine(rows[q], rows[i]), i});
    std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.first < b.first; });
    const auto got = most_similar(m, words[q], topn);
    ASSERT_EQ(got.size(), std::min(topn, v - 1));
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].word, words[all[i].second]);
      EXPECT_NEAR(got[i].score, -all[i].first, 1e-12);
    }

    auto scaled = m;
    for (double& x : scaled.input_vectors.data()) x *= 37.5;
    const auto again = most_similar(scaled, words[q], topn);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(again[i].word, got[i].word);
  }
}

TEST(MostSimilar, TiesKeepVocabularyOrder) {
  const auto m = hand_model({"q", "x", "y", "z"}, {{1, 0}, {0, 1}, {0, 2}, {0, -1}});
  const auto r = most_similar(m, "q", 3);
  EXPECT_EQ(r[0].word, "x");
  EXPECT_EQ(r[1].word, "y");
  EXPECT_EQ(r[2].word, "z");
}

TEST(SeedBag, SeedFirstThenNeighbours) {
  std::mt19937_64 rng(5);
  const auto m = hand_model({"a", "b", "c", "d", "e"}, random_rows(rng, 5, 3));
  for (std::size_t topn : {1u, 2u, 4u, 10u}) {
    const auto bag = build_seed_bag(m, "c", topn);
    ASSERT_EQ(bag.entries.size(), 1 + std::min<std::size_t>(topn, 4));
    EXPECT_EQ(bag.entries[0], (Neighbor{"c", 1.0}));
    for (std::size_t i = 2; i < bag.entries.size(); ++i)
      EXPECT_GE(bag.entries[i - 1].score, bag.entries[i].score);
    const auto ranked = most_similar(m, "c", topn);
    for (std::size_t i = 0; i < ranked.size(); ++i) EXPECT_EQ(bag.entries[i + 1], ranked[i]);
  }
  EXPECT_THROW(build_seed_bag(m, "nope"), Error);
}

TEST(SeedBag, CsvRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(6);
  std::vector<std::string> words;
  for (int i = 0; i < 30; ++i) words.push_back("w" + std::to_string(i));
  const auto m = hand_model(words, random_rows(rng, 30, 4));
  const auto bag = build_seed_bag(m, "w3", 20);
  write_seed_bag_csv(bag, dir / "w3.csv");
  const auto text = notevec::testing::read_text(dir / "w3.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 20);
  EXPECT_EQ(text.find("w3,"), std::string::npos);
  const auto back = read_seed_bag_csv(dir / "w3.csv", "w3");
  ASSERT_EQ(back.entries.size(), bag.entries.size());
  for (std::size_t i = 0; i < bag.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].word, bag.entries[i].word);
    EXPECT_EQ(back.entries[i].score, bag.entries[i].score);
  }
  EXPECT_EQ(read_seed_bag_csv(dir / "w3.csv", "w3", 5).entries.size(), 6u);
}

TEST(SeedBag, BadFiles) {
  TempDir dir;
  write_text(dir / "a.csv", "x,0.5,1\n");
  EXPECT_THROW(read_seed_bag_csv(dir / "a.csv", "s"), Error);
  write_text(dir / "b.csv", "x,abc\n");
  EXPECT_THROW(read_seed_bag_csv(dir / "b.csv", "s"), Error);
  write_text(dir / "c.csv", "x,0.5\nx,0.4\n");
  EXPECT_THROW(read_seed_bag_csv(dir / "c.csv", "s"), Error);
  EXPECT_THROW(read_seed_bag_csv(dir / "missing.csv", "s"), Error);
}

// --- spherical k-means ------------------------------------------------------

KMeansOptions opts(std::size_t k, std::uint64_t seed = 84) {
  KMeansOptions o;
  o.k = k;
  o.rng_seed = seed;
  return o;
}

void expect_argmax_assignment(const Matrix& vectors, const ClusterModel& model) {
  for (std::size_t i = 0; i < vectors.rows(); ++i) {
    const double own = cosine_similarity(vectors.row(i), model.prototypes.row(model.assignment[i]));
    for (std::size_t c = 0; c < model.k(); ++c)
      EXPECT_LE(cosine_similarity(vectors.row(i), model.prototypes.row(c)), own + 1e-12);
  }
}

TEST(SphericalKMeans, ThreePointExample) {
  const auto m = to_matrix({{1, 0}, oracle::unit({0.995, 0.0999}), {0, 1}});
  const auto model = spherical_kmeans(m, opts(2));
  EXPECT_EQ(model.assignment[0], model.assignment[1]);
  EXPECT_NE(model.assignment[0], model.assignment[2]);
}

TEST(SphericalKMeans, KEqualsVGivesSingletons) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t v = 1 + rng() % 10;
    const auto m = to_matrix(random_rows(rng, v, 3 + trial % 3));
    const auto model = spherical_kmeans(m, opts(v, trial));
    std::set<std::size_t> distinct(model.assignment.begin(), model.assignment.end());
    EXPECT_EQ(distinct.size(), v);
    EXPECT_NEAR(model.objective(), static_cast<double>(v), 1e-9);
  }
}

TEST(SphericalKMeans, SingleClusterIsNormalisedMean) {
  std::mt19937_64 rng(8);
  const auto rows = random_rows(rng, 15, 4);
  const auto model = spherical_kmeans(to_matrix(rows), opts(1));
  oracle::Vec mean(4, 0.0);
  for (const auto& r : rows) {
    const auto u = oracle::unit(r);
    for (std::size_t j = 0; j < 4; ++j) mean[j] += u[j];
  }
  mean = oracle::unit(mean);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(model.prototypes(0, j), mean[j], 1e-12);
}

TEST(SphericalKMeans, InvariantsOnRandomInstances) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t v = 5 + rng() % 60, k = 1 + rng() % std::min<std::size_t>(v, 8);
    const auto m = to_matrix(random_rows(rng, v, 2 + rng() % 6));
    const auto model = spherical_kmeans(m, opts(k, rng()));
    ASSERT_EQ(model.k(), k);
    ASSERT_EQ(model.assignment.size(), v);
    for (std::size_t c = 0; c < k; ++c) EXPECT_NEAR(norm(model.prototypes.row(c)), 1.0, 1e-9);
    for (std::size_t i = 1; i < model.objective_history.size(); ++i)
      EXPECT_GE(model.objective_history[i], model.objective_history[i - 1] - 1e-12);
    EXPECT_NEAR(model.objective(), clustering_objective(m, model.prototypes, model.assignment), 1e-9);
    std::set<std::size_t> used(model.assignment.begin(), model.assignment.end());
    EXPECT_EQ(used.size(), k);
    if (model.converged) expect_argmax_assignment(m, model);
  }
}

TEST(SphericalKMeans, NoImprovingSingleMoveAtConvergence) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rows = random_rows(rng, 12, 3);
    const auto m = to_matrix(rows);
    const std::size_t k = 3;
    const auto model = spherical_kmeans(m, opts(k, trial));
    ASSERT_TRUE(model.converged);
    // Objective with each cluster scored by its optimal (mean) prototype.
    auto score = [&](const std::vector<std::size_t>& a) {
      std::vector<oracle::Vec> sums(k, oracle::Vec(3, 0.0));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto u = oracle::unit(rows[i]);
        for (std::size_t j = 0; j < 3; ++j) sums[a[i]][j] += u[j];
      }
      double t = 0.0;
      for (auto& s : sums) t += std::sqrt(oracle::dot(s, s));
      return t;
    };
    const double base = score(model.assignment);
    EXPECT_NEAR(base, model.objective(), 1e-9);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        auto moved = model.assignment;
        moved[i] = c;
        EXPECT_LE(score(moved), base + 1e-9);
      }
    }
  }
}

TEST(SphericalKMeans, RecoversPlantedPartition) {
  std::mt19937_64 rng(11);
  int pure = 0;
  for (int run = 0; run < 40; ++run) {
    const auto inst = oracle::planted_instance(rng, 5, 10, 20, 60.0, 10.0);
    const auto model = spherical_kmeans(to_matrix(inst.rows), opts(5, 1000 + run));
    pure += oracle::pure_partition(model.assignment, inst.truth);
  }
  EXPECT_GE(pure, 38);
}

TEST(SphericalKMeans, MatchesExhaustivePartitionOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t v = 2 + rng() % 7, k = 1 + rng() % std::min<std::size_t>(v, 3);
    const auto rows = random_rows(rng, v, 2 + rng() % 3);
    double best = -1e300;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
      best = std::max(best, spherical_kmeans(to_matrix(rows), opts(k, seed)).objective());
    EXPECT_NEAR(best, oracle::best_partition_objective(rows, k), 1e-9) << "v=" << v << " k=" << k;
  }
}

TEST(SphericalKMeans, DeterministicForSeed) {
  std::mt19937_64 rng(13);
  const auto m = to_matrix(random_rows(rng, 40, 5));
  const auto a = spherical_kmeans(m, opts(4, 3));
  const auto b = spherical_kmeans(m, opts(4, 3));
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.prototypes, b.prototypes);
}

TEST(SphericalKMeans, Errors) {
  const auto m = to_matrix({{1, 0}, {0, 1}});
  EXPECT_EQ(category_of([&] { spherical_kmeans(m, opts(3)); }), ErrorCategory::parameter);
  EXPECT_EQ(category_of([&] { spherical_kmeans(m, opts(0)); }), ErrorCategory::parameter);
  EXPECT_EQ(category_of([&] { spherical_kmeans(to_matrix({{1, 0}, {0, 0}}), opts(1)); }),
            ErrorCategory::domain);
}

// --- cluster queries ----------------------------------------------------------

struct Fixture {
  EmbeddingModel model;
  ClusterModel clusters;
};

Fixture clustered(std::uint64_t seed, std::size_t v = 20, std::size_t k = 4) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < v; ++i) words.push_back("w" + std::to_string(i));
  auto model = hand_model(words, random_rows(rng, v, 4));
  auto clusters = spherical_kmeans(model.input_vectors, opts(k, seed));
  return {std::move(model), std::move(clusters)};
}

TEST(ClusterQueries, SimilarityMatchesCosine) {
  auto f = clustered(14);
  for (std::size_t c = 0; c < f.clusters.k(); ++c) {
    for (const auto& w : f.model.vocab.words()) {
      const double s = cluster_similarity(f.model, f.clusters, c, w);
      EXPECT_EQ(s, cosine_similarity(f.model.vector_of(w), f.clusters.prototypes.row(c)));
      auto flipped = f.clusters;
      for (double& x : flipped.prototypes.row(c)) x = -x;
      EXPECT_NEAR(cluster_similarity(f.model, flipped, c, w), -s, 1e-15);
    }
  }
  EXPECT_THROW(cluster_similarity(f.model, f.clusters, 99, "w1"), Error);
  EXPECT_THROW(cluster_similarity(f.model, f.clusters, 0, "zzz"), Error);
}

TEST(ClusterQueries, WordAtPrototypeScoresOne) {
  const auto m = hand_model({"a", "b"}, {{2, 0}, {0, 3}});
  const auto clusters = spherical_kmeans(m.input_vectors, opts(2));
  EXPECT_NEAR(cluster_similarity(m, clusters, clusters.assignment[0], "a"), 1.0, 1e-15);
  const auto table = build_sim_table(m, clusters);
  EXPECT_NEAR(table.find("b")->similarity, 1.0, 1e-15);
  const auto reps = cluster_representatives(m, clusters, clusters.assignment[1], 5);
  ASSERT_EQ(reps.size(), 1u);
  EXPECT_EQ(reps[0].word, "b");
}

TEST(ClusterQueries, RepresentativesMatchBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto f = clustered(seed);
    for (std::size_t c = 0; c < f.clusters.k(); ++c) {
      std::vector<std::pair<double, std::string>> members;
      for (std::size_t i = 0; i < f.model.vocab.size(); ++i) {
        if (f.clusters.assignment[i] == c)
          members.push_back({-cluster_similarity(f.model, f.clusters, c, f.model.vocab.word(i)), f.model.vocab.word(i)});
      }
      std::stable_sort(members.begin(), members.end(), [](auto& a, auto& b) { return a.first < b.first; });
      const auto reps = cluster_representatives(f.model, f.clusters, c, 3);
      ASSERT_EQ(reps.size(), std::min<std::size_t>(3, members.size()));
      for (std::size_t i = 0; i < reps.size(); ++i) {
        EXPECT_EQ(reps[i].word, members[i].second);
        EXPECT_EQ(reps[i].score, -members[i].first);
      }
    }
  }
}

TEST(ClusterQueries, SimTableAgreesWithAssignment) {
  auto f = clustered(15);
  const auto table = build_sim_table(f.model, f.clusters);
  const auto wc = word_clusters(f.model, f.clusters);
  ASSERT_EQ(table.size(), f.model.vocab.size());
  EXPECT_EQ(wc.k, f.clusters.k());
  for (std::size_t i = 0; i < f.model.vocab.size(); ++i) {
    const auto& w = f.model.vocab.word(i);
    const auto* e = table.find(w);
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->cluster, f.clusters.assignment[i]);
    EXPECT_EQ(*wc.find(w), f.clusters.assignment[i]);
    EXPECT_EQ(e->similarity, cluster_similarity(f.model, f.clusters, e->cluster, w));
    EXPECT_LE(std::abs(e->similarity), 1.0);
  }
}

TEST(ClusterFiles, RoundTrip) {
  TempDir dir;
  auto f = clustered(16);
  const auto wc = word_clusters(f.model, f.clusters);
  write_word_clusters_csv(wc, dir / "wc.csv");
  EXPECT_EQ(notevec::testing::read_text(dir / "wc.csv").substr(0, 13), "word,cluster\n");
  const auto wc_back = read_word_clusters_csv(dir / "wc.csv", wc.k);
  EXPECT_EQ(wc_back.words, wc.words);
  EXPECT_EQ(wc_back.cluster_of, wc.cluster_of);
  EXPECT_EQ(wc_back.k, wc.k);

  const auto table = build_sim_table(f.model, f.clusters);
  write_sim_table_csv(table, dir / "sim.csv");
  const auto back = read_sim_table_csv(dir / "sim.csv");
  EXPECT_EQ(back.words, table.words);
  for (const auto& w : table.words) {
    EXPECT_EQ(back.find(w)->cluster, table.find(w)->cluster);
    EXPECT_EQ(back.find(w)->similarity, table.find(w)->similarity);
  }
}

TEST(ClusterFiles, OneBasedIdsOnDisk) {
  TempDir dir;
  write_text(dir / "wc.csv", "word,cluster\nalpha,1\nbeta,3\n");
  const auto wc = read_word_clusters_csv(dir / "wc.csv");
  EXPECT_EQ(wc.k, 3u);
  EXPECT_EQ(*wc.find("alpha"), 0u);
  EXPECT_EQ(*wc.find("beta"), 2u);
  write_text(dir / "bad.csv", "word,cluster\nalpha,0\n");
  EXPECT_THROW(read_word_clusters_csv(dir / "bad.csv"), Error);
  write_text(dir / "bad2.csv", "word,group\nalpha,1\n");
  EXPECT_THROW(read_word_clusters_csv(dir / "bad2.csv"), Error);
}

TEST(ClusterFiles, SparseSimilarityLayout) {
  TempDir dir;
  write_text(dir / "sparse.csv",
             "\"\",\"word\",\"cluster1Sim\",\"cluster2Sim\"\n"
             "\"1\",\"alpha\",0,0.25\n"
             "\"2\",\"beta\",0.5,0\n"
             "\"3\",\"gamma\",0,0\n");
  const auto table = read_sim_table_csv(dir / "sparse.csv");
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table.find("alpha")->cluster, 1u);
  EXPECT_EQ(table.find("alpha")->similarity, 0.25);
  EXPECT_EQ(table.find("beta")->cluster, 0u);
  EXPECT_EQ(table.find("gamma"), nullptr);

  write_text(dir / "nolabel.csv", "word,cluster1Sim,cluster2Sim\nalpha,0.1,0\n");
  EXPECT_EQ(read_sim_table_csv(dir / "nolabel.csv").find("alpha")->cluster, 0u);
}

}  // namespace
}  // namespace notevec::vecops
