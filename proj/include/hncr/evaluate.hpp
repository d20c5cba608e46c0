#pragma once

// CTR metrics, sampled top-K ranking, and the sparsity / hierarchy analyses.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hncr/data.hpp"
#include "hncr/model.hpp"

namespace hncr::eval {

struct ScoredPair {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double score = 0.0;
  int label = 0;
};

/// Rank-sum AUC with midranks for ties. Empty when either class is missing.
std::optional<double> auc(std::span<const ScoredPair> scored);
/// Fraction of pairs with (score >= threshold) == label. Throws InputError when empty.
double accuracy(std::span<const ScoredPair> scored, double threshold = 0.5);

std::vector<ScoredPair> score_pairs(const model::TowerTable& towers, std::span<const data::LabeledPair> pairs);

struct RankingTask {
  std::uint32_t user = 0;
  std::vector<std::uint32_t> positives;
  std::vector<std::uint32_t> negatives;
  std::vector<double> positive_scores;
  std::vector<double> negative_scores;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t hits = 0;
};

/// Ranks positives and negatives by descending score, ties by ascending item id.
PrecisionRecall precision_recall_at_k(const RankingTask& task, std::size_t k);

/// One task per user with test positives; negatives are up to `num_negatives`
/// items the user never interacted with in `all`.
std::vector<RankingTask> build_ranking_tasks(std::span<const data::Interaction> test, const data::InteractionMatrix& all,
                                             const model::TowerTable& towers, std::size_t num_negatives,
                                             std::uint64_t seed, unsigned threads = 1);

struct TopKRow {
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t users = 0;
};
/// Per-K means over users that have positives.
std::vector<TopKRow> average_precision_recall(std::span<const RankingTask> tasks, std::span<const std::size_t> ks);

inline constexpr std::size_t kDefaultTopK[] = {2, 5, 10, 20, 50, 100};

struct SparsityBin {
  std::size_t lo = 0;  // train degree range [lo, hi)
  std::size_t hi = 0;
  std::size_t users = 0;
  std::size_t interactions = 0;  // train interactions of the bin's users
  std::size_t pairs = 0;
  std::optional<double> auc;
  std::optional<double> accuracy;
};

/// Test users sorted by train degree and cut into bins of similar total train
/// interactions. Users with equal degree may straddle a cut.
std::vector<SparsityBin> sparsity_bins(std::span<const ScoredPair> scored, const data::InteractionMatrix& train,
                                       std::size_t n_bins = 4);

struct HierarchyGroup {
  std::size_t nodes = 0;
  double min_distance = 0.0;
  double max_distance = 0.0;
  double avg_degree = 0.0;
};

/// Users and items together, sorted by the distance of their final representation
/// (u^L, v^L) to the origin and split into near-equal groups; reports each group's
/// mean train degree.
std::vector<HierarchyGroup> hierarchy_bins(const model::TowerTable& towers, const data::InteractionMatrix& train,
                                           std::size_t n_groups = 4);

struct ScatterRow {
  data::Side side = data::Side::kUser;
  std::uint32_t node = 0;
  double dist_to_origin = 0.0;
  std::optional<double> avg_dist_to_others;
};

/// `sample_n` distinct nodes drawn with the seed; the average runs over the sample.
std::vector<ScatterRow> embedding_scatter(const model::TowerTable& towers, std::size_t sample_n, std::uint64_t seed);

void write_sparsity_csv(const std::filesystem::path& path, std::span<const SparsityBin> bins);
void write_hierarchy_csv(const std::filesystem::path& path, std::span<const HierarchyGroup> groups);
void write_scatter_csv(const std::filesystem::path& path, std::span<const ScatterRow> rows);

}  // namespace hncr::eval
