#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "hncr/data.hpp"
#include "hncr/error.hpp"
#include "hncr/evaluate.hpp"
#include "hncr/model.hpp"
#include "test_util.hpp"

namespace {

using namespace hncr::eval;
using hncr::Rng;
using hncr::data::Interaction;

std::vector<ScoredPair> pairs(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<ScoredPair> out;
  std::uint32_t item = 0;
  for (double s : pos) out.push_back({0, item++, s, 1});
  for (double s : neg) out.push_back({0, item++, s, 0});
  return out;
}

double brute_force_auc(const std::vector<ScoredPair>& scored) {
  double wins = 0.0;
  std::size_t n = 0;
  for (const auto& p : scored) {
    if (p.label != 1) continue;
    for (const auto& q : scored) {
      if (q.label != 0) continue;
      wins += p.score > q.score ? 1.0 : (p.score == q.score ? 0.5 : 0.0);
      ++n;
    }
  }
  return wins / static_cast<double>(n);
}

TEST(Evaluate, AucExamples) {
  EXPECT_EQ(*auc(pairs({0.9, 0.8}, {0.2, 0.1})), 1.0);
  EXPECT_EQ(*auc(pairs({0.5, 0.5}, {0.5, 0.5, 0.5})), 0.5);
  EXPECT_EQ(*auc(pairs({0.9, 0.4}, {0.6, 0.1})), 0.75);
  EXPECT_FALSE(auc(pairs({0.9, 0.4}, {})).has_value());
  EXPECT_FALSE(auc(pairs({}, {0.3})).has_value());
}

TEST(Evaluate, AucMatchesBruteForce) {
  Rng rng(31);
  std::uniform_int_distribution<int> coarse(0, 9);  // many ties
  std::uniform_real_distribution<double> fine(0.0, 1.0);
  std::bernoulli_distribution label(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredPair> s;
    for (std::uint32_t i = 0; i < 200; ++i) {
      const double score = trial % 2 ? coarse(rng) / 10.0 : fine(rng);
      s.push_back({i % 7, i, score, label(rng) ? 1 : 0});
    }
    const auto a = auc(s);
    ASSERT_TRUE(a.has_value());
    EXPECT_EQ(*a, brute_force_auc(s));
  }
}

TEST(Evaluate, Accuracy) {
  EXPECT_EQ(accuracy(pairs({0.9, 0.7}, {0.1, 0.49})), 1.0);
  std::vector<ScoredPair> half = {{0, 0, 0.6, 1}, {0, 1, 0.6, 0}};
  EXPECT_EQ(accuracy(half), 0.5);
  std::vector<ScoredPair> edge = {{0, 0, 0.5, 1}};
  EXPECT_EQ(accuracy(edge), 1.0);  // threshold is inclusive
  EXPECT_THROW(accuracy(std::vector<ScoredPair>{}), hncr::InputError);
}

TEST(Evaluate, PrecisionRecallAtK) {
  RankingTask t;
  t.positives = {5};
  t.positive_scores = {0.9};
  t.negatives = {1, 2, 3};
  t.negative_scores = {0.1, 0.2, 0.3};
  auto pr = precision_recall_at_k(t, 10);
  EXPECT_DOUBLE_EQ(pr.precision, 0.1);
  EXPECT_DOUBLE_EQ(pr.recall, 1.0);
  EXPECT_EQ(pr.hits, 1u);

  t.positive_scores = {0.05};
  pr = precision_recall_at_k(t, 2);
  EXPECT_EQ(pr.precision, 0.0);
  EXPECT_EQ(pr.recall, 0.0);

  // Ties broken by ascending item id: item 3 (negative) precedes item 5.
  t.positive_scores = {0.3};
  EXPECT_EQ(precision_recall_at_k(t, 1).hits, 0u);
  t.positives = {0};
  EXPECT_EQ(precision_recall_at_k(t, 1).hits, 1u);

  RankingTask two;
  two.positives = {1, 2};
  two.positive_scores = {0.1, 0.2};
  two.negatives = {3};
  two.negative_scores = {0.9};
  pr = precision_recall_at_k(two, 50);
  EXPECT_EQ(pr.hits, 2u);
  EXPECT_DOUBLE_EQ(pr.precision, 2.0 / 50.0);
  EXPECT_THROW(precision_recall_at_k(two, 0), hncr::InputError);
}

TEST(Evaluate, AveragesSkipUsersWithoutPositives) {
  RankingTask a;
  a.user = 0;
  a.positives = {1};
  a.positive_scores = {1.0};
  RankingTask empty;
  empty.user = 1;
  const std::vector<RankingTask> tasks = {a, empty};
  const std::vector<std::size_t> ks = {1, 2};
  const auto rows = average_precision_recall(tasks, ks);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].users, 1u);
  EXPECT_EQ(rows[0].precision, 1.0);
  EXPECT_EQ(rows[1].precision, 0.5);
  EXPECT_EQ(rows[1].recall, 1.0);
}

hncr::model::TowerTable line_table(const std::vector<double>& users, const std::vector<double>& items) {
  hncr::model::TowerTable t;
  t.geometry = {hncr::model::Backend::kHyperbolic, 1.0};
  t.dim = 1;
  t.users = users;
  t.items = items;
  return t;
}

TEST(Evaluate, RankingTasksExcludeKnownPositives) {
  std::vector<Interaction> all_pos;
  for (std::uint32_t u = 0; u < 6; ++u) {
    for (std::uint32_t i = 0; i < 30; ++i) {
      if ((u + i) % 4 == 0) all_pos.push_back({u, i});
    }
  }
  const auto all = hncr::data::build_interaction_matrix(all_pos, 6, 30);
  const std::vector<Interaction> test = {{0, 4}, {0, 8}, {3, 1}};
  Rng rng(1);
  const auto towers = line_table(hncr::testing::random_vector(rng, 6, -0.5, 0.5),
                                 hncr::testing::random_vector(rng, 30, -0.5, 0.5));
  const auto tasks = build_ranking_tasks(test, all, towers, 10, 7);
  ASSERT_EQ(tasks.size(), 2u);
  EXPECT_EQ(tasks[0].user, 0u);
  EXPECT_EQ(tasks[0].positives, (std::vector<std::uint32_t>{4, 8}));
  for (const auto& t : tasks) {
    EXPECT_EQ(t.negatives.size(), 10u);
    for (std::uint32_t i : t.negatives) EXPECT_FALSE(all.contains(t.user, i));
    for (std::size_t n = 0; n < t.negatives.size(); ++n) {
      EXPECT_DOUBLE_EQ(t.negative_scores[n], towers.score(t.user, t.negatives[n]));
    }
    for (std::size_t k : {1u, 3u, 5u}) {
      const auto pr = precision_recall_at_k(t, k);
      EXPECT_DOUBLE_EQ(pr.precision * static_cast<double>(k), static_cast<double>(pr.hits));
      EXPECT_DOUBLE_EQ(pr.recall * static_cast<double>(t.positives.size()), static_cast<double>(pr.hits));
    }
  }
  const auto again = build_ranking_tasks(test, all, towers, 10, 7, 3);
  for (std::size_t n = 0; n < tasks.size(); ++n) EXPECT_EQ(tasks[n].negatives, again[n].negatives);
}

TEST(Evaluate, SparsityBinsPartitionTestUsers) {
  // 40 users with train degree u % 10 + 1.
  std::vector<Interaction> train;
  for (std::uint32_t u = 0; u < 40; ++u) {
    for (std::uint32_t i = 0; i <= u % 10; ++i) train.push_back({u, i});
  }
  const auto y = hncr::data::build_interaction_matrix(train, 40, 20);
  std::vector<ScoredPair> scored;
  for (std::uint32_t u = 0; u < 40; ++u) {
    scored.push_back({u, 15, 0.8, 1});
    scored.push_back({u, 16, 0.3 + 0.01 * u, 0});
  }
  const auto bins = sparsity_bins(scored, y, 4);
  ASSERT_EQ(bins.size(), 4u);
  std::size_t users = 0, inter = 0, n_pairs = 0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    users += bins[b].users;
    inter += bins[b].interactions;
    n_pairs += bins[b].pairs;
    EXPECT_LT(bins[b].lo, bins[b].hi);
    if (b > 0) {
      EXPECT_GE(bins[b].lo + 1, bins[b - 1].hi);  // ascending [lo, hi) ranges
    }
  }
  EXPECT_EQ(users, 40u);
  EXPECT_EQ(inter, y.nnz());
  EXPECT_EQ(n_pairs, scored.size());
  // Mass-balanced: sparse bins hold more users than dense ones.
  EXPECT_GT(bins.front().users, bins.back().users);
  for (const auto& b : bins) {
    EXPECT_NEAR(static_cast<double>(b.interactions), y.nnz() / 4.0, 12.0);
    ASSERT_TRUE(b.auc.has_value());
    EXPECT_EQ(*b.auc, 1.0);
  }
}

TEST(Evaluate, SparsityBinsUniformDegrees) {
  std::vector<Interaction> train;
  for (std::uint32_t u = 0; u < 20; ++u) {
    for (std::uint32_t i = 0; i < 3; ++i) train.push_back({u, i});
  }
  const auto y = hncr::data::build_interaction_matrix(train, 20, 5);
  std::vector<ScoredPair> scored;
  for (std::uint32_t u = 0; u < 20; ++u) scored.push_back({u, 4, 0.5, 1});
  const auto bins = sparsity_bins(scored, y, 4);
  for (const auto& b : bins) {
    EXPECT_EQ(b.users, 5u);
    EXPECT_EQ(b.lo, 3u);
    EXPECT_EQ(b.hi, 4u);
    EXPECT_FALSE(b.auc.has_value());  // single class
  }
}

TEST(Evaluate, HierarchyBins) {
  // Users at distances growing with id, items likewise; degrees fall with distance.
  std::vector<Interaction> train;
  for (std::uint32_t u = 0; u < 5; ++u) {
    for (std::uint32_t i = 0; i < 5 - u; ++i) train.push_back({u, i});
  }
  const auto y = hncr::data::build_interaction_matrix(train, 5, 6);
  const auto towers = line_table({0.05, 0.2, 0.4, 0.6, 0.8}, {0.0, 0.1, 0.3, 0.5, 0.7, 0.9});
  const auto groups = hierarchy_bins(towers, y, 4);
  ASSERT_EQ(groups.size(), 4u);
  std::size_t total = 0, lo = 99, hi = 0;
  for (const auto& g : groups) {
    total += g.nodes;
    lo = std::min(lo, g.nodes);
    hi = std::max(hi, g.nodes);
    EXPECT_LE(g.min_distance, g.max_distance);
  }
  EXPECT_EQ(total, 11u);
  EXPECT_LE(hi - lo, 1u);
  EXPECT_EQ(groups[0].min_distance, 0.0);  // item 0 sits at the origin
  for (std::size_t g = 1; g < groups.size(); ++g) EXPECT_GE(groups[g].min_distance, groups[g - 1].max_distance);
  EXPECT_GE(groups.front().avg_degree, groups.back().avg_degree);
  EXPECT_THROW(hierarchy_bins(towers, y, 0), hncr::InputError);
}

TEST(Evaluate, EmbeddingScatter) {
  const auto towers = line_table({0.1, -0.2, 0.3}, {0.0, 0.5});
  const auto one = embedding_scatter(towers, 1, 3);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_FALSE(one[0].avg_dist_to_others.has_value());

  const auto rows = embedding_scatter(towers, 4, 3);
  ASSERT_EQ(rows.size(), 4u);
  std::set<std::pair<int, std::uint32_t>> seen;
  for (const auto& r : rows) {
    EXPECT_TRUE(seen.insert({static_cast<int>(r.side), r.node}).second);
    const auto p = r.side == hncr::data::Side::kUser ? towers.user(r.node) : towers.item(r.node);
    EXPECT_DOUBLE_EQ(r.dist_to_origin, 2.0 * std::atanh(std::abs(p[0])));
    // Exact average over the other sampled nodes.
    double sum = 0.0;
    for (const auto& o : rows) {
      if (&o == &r) continue;
      const auto q = o.side == hncr::data::Side::kUser ? towers.user(o.node) : towers.item(o.node);
      sum += hncr::model::point_distance(towers.geometry, p, q);
    }
    EXPECT_NEAR(*r.avg_dist_to_others, sum / 3.0, 1e-12);
  }
  const auto again = embedding_scatter(towers, 4, 3);
  for (std::size_t n = 0; n < rows.size(); ++n) EXPECT_EQ(rows[n].node, again[n].node);
  EXPECT_EQ(embedding_scatter(towers, 50, 1).size(), 5u);
}

TEST(Evaluate, CsvWriters) {
  hncr::testing::TempDir dir("csv");
  SparsityBin b;
  b.lo = 1;
  b.hi = 4;
  b.users = 2;
  b.interactions = 5;
  b.pairs = 4;
  b.auc = 0.75;
  b.accuracy = 0.5;
  write_sparsity_csv(dir / "s.csv", std::vector<SparsityBin>{b});
  EXPECT_EQ(hncr::testing::read_file(dir / "s.csv"),
            "bin,degree_range,users,train_interactions,pairs,auc,accuracy\n1,\"[1,4)\",2,5,4,0.75,0.5\n");

  ScatterRow r;
  r.node = 3;
  r.dist_to_origin = 0.5;
  write_scatter_csv(dir / "sc.csv", std::vector<ScatterRow>{r});
  EXPECT_EQ(hncr::testing::read_file(dir / "sc.csv"), "side,node,dist_to_origin,avg_dist_to_others\nuser,3,0.5,\n");
}

}  // namespace
