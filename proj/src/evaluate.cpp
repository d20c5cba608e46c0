#include "hncr/evaluate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "hncr/error.hpp"
#include "hncr/parallel.hpp"
#include "hncr/random.hpp"

namespace hncr::eval {

std::optional<double> auc(std::span<const ScoredPair> scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scored[a].score < scored[b].score; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scored[order[j]].score == scored[order[i]].score) ++j;
    // 1-based ranks i+1 .. j share their mean.
    const double midrank = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (scored[order[k]].label == 1) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scored.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double accuracy(std::span<const ScoredPair> scored, double threshold) {
  if (scored.empty()) throw InputError("accuracy: no scored pairs");
  std::size_t correct = 0;
  for (const auto& s : scored) correct += ((s.score >= threshold) == (s.label == 1)) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(scored.size());
}

std::vector<ScoredPair> score_pairs(const model::TowerTable& towers, std::span<const data::LabeledPair> pairs) {
  std::vector<ScoredPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({p.pair.user, p.pair.item, towers.score(p.pair.user, p.pair.item), p.label});
  }
  return out;
}

PrecisionRecall precision_recall_at_k(const RankingTask& task, std::size_t k) {
  if (k == 0) throw InputError("precision_recall_at_k: K must be >= 1");
  if (task.positives.size() != task.positive_scores.size() || task.negatives.size() != task.negative_scores.size()) {
    throw InputError("precision_recall_at_k: scores do not match candidates");
  }
  struct Cand {
    double score;
    std::uint32_t item;
    bool positive;
  };
  std::vector<Cand> cands;
  cands.reserve(task.positives.size() + task.negatives.size());
  for (std::size_t i = 0; i < task.positives.size(); ++i) cands.push_back({task.positive_scores[i], task.positives[i], true});
  for (std::size_t i = 0; i < task.negatives.size(); ++i) cands.push_back({task.negative_scores[i], task.negatives[i], false});
  const std::size_t take = std::min(k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(),
                    [](const Cand& a, const Cand& b) { return a.score != b.score ? a.score > b.score : a.item < b.item; });
  PrecisionRecall pr;
  for (std::size_t i = 0; i < take; ++i) pr.hits += cands[i].positive ? 1 : 0;
  pr.precision = static_cast<double>(pr.hits) / static_cast<double>(k);
  pr.recall = task.positives.empty() ? 0.0
                                     : static_cast<double>(pr.hits) / static_cast<double>(task.positives.size());
  return pr;
}

std::vector<RankingTask> build_ranking_tasks(std::span<const data::Interaction> test, const data::InteractionMatrix& all,
                                             const model::TowerTable& towers, std::size_t num_negatives,
                                             std::uint64_t seed, unsigned threads) {
  // `test` is sorted by (user, item); group runs by user.
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < test.size();) {
    std::size_t j = i;
    while (j < test.size() && test[j].user == test[i].user) ++j;
    runs.emplace_back(i, j);
    i = j;
  }
  std::vector<RankingTask> tasks(runs.size());
  parallel_chunks(runs.size(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t r = begin; r < end; ++r) {
      RankingTask& task = tasks[r];
      task.user = test[runs[r].first].user;
      for (std::size_t i = runs[r].first; i < runs[r].second; ++i) {
        task.positives.push_back(test[i].item);
        task.positive_scores.push_back(towers.score(task.user, test[i].item));
      }
      task.negatives = data::sample_unrated(all.items_of(task.user), all.num_items(), num_negatives,
                                            derive_seed(seed, task.user));
      for (std::uint32_t item : task.negatives) task.negative_scores.push_back(towers.score(task.user, item));
    }
  });
  return tasks;
}

std::vector<TopKRow> average_precision_recall(std::span<const RankingTask> tasks, std::span<const std::size_t> ks) {
  std::vector<TopKRow> rows;
  for (std::size_t k : ks) {
    TopKRow row;
    row.k = k;
    for (const auto& task : tasks) {
      if (task.positives.empty()) continue;
      const auto pr = precision_recall_at_k(task, k);
      row.precision += pr.precision;
      row.recall += pr.recall;
      ++row.users;
    }
    if (row.users > 0) {
      row.precision /= static_cast<double>(row.users);
      row.recall /= static_cast<double>(row.users);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<SparsityBin> sparsity_bins(std::span<const ScoredPair> scored, const data::InteractionMatrix& train,
                                       std::size_t n_bins) {
  if (n_bins == 0) throw InputError("sparsity_bins: need at least one bin");
  std::vector<std::uint32_t> users;
  for (const auto& s : scored) users.push_back(s.user);
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());
  auto degree = [&](std::uint32_t u) -> std::size_t { return u < train.num_users() ? train.items_of(u).size() : 0; };
  std::sort(users.begin(), users.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto da = degree(a);
    const auto db = degree(b);
    return da != db ? da < db : a < b;
  });
  std::size_t total = 0;
  for (auto u : users) total += degree(u);

  // Greedy cuts at the interaction-mass quantiles.
  std::vector<std::size_t> bin_of(users.size(), 0);
  std::vector<SparsityBin> bins(n_bins);
  std::size_t cumulative = 0;
  std::size_t b = 0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    while (b + 1 < n_bins && static_cast<double>(cumulative) >=
                                 static_cast<double>(total) * static_cast<double>(b + 1) / static_cast<double>(n_bins) &&
           bins[b].users > 0) {
      ++b;
    }
    bin_of[i] = b;
    const std::size_t d = degree(users[i]);
    if (bins[b].users == 0) bins[b].lo = d;
    bins[b].hi = d + 1;
    ++bins[b].users;
    bins[b].interactions += d;
    cumulative += d;
  }
  std::vector<std::pair<std::uint32_t, std::size_t>> lookup;
  for (std::size_t i = 0; i < users.size(); ++i) lookup.emplace_back(users[i], bin_of[i]);
  std::sort(lookup.begin(), lookup.end());
  std::vector<std::vector<ScoredPair>> per_bin(n_bins);
  for (const auto& s : scored) {
    auto it = std::lower_bound(lookup.begin(), lookup.end(), std::make_pair(s.user, std::size_t{0}));
    per_bin[it->second].push_back(s);
  }
  for (std::size_t i = 0; i < n_bins; ++i) {
    bins[i].pairs = per_bin[i].size();
    if (!per_bin[i].empty()) {
      bins[i].auc = auc(per_bin[i]);
      bins[i].accuracy = accuracy(per_bin[i]);
    }
  }
  // Drop trailing bins that received no users (fewer users than bins).
  while (bins.size() > 1 && bins.back().users == 0) bins.pop_back();
  return bins;
}

std::vector<HierarchyGroup> hierarchy_bins(const model::TowerTable& towers, const data::InteractionMatrix& train,
                                           std::size_t n_groups) {
  if (n_groups == 0) throw InputError("hierarchy_bins: need at least one group");
  const auto& geo = towers.geometry;
  struct Node {
    double dist;
    std::size_t degree;
    std::size_t order;
  };
  std::vector<Node> nodes;
  for (std::size_t u = 0; u < towers.num_users(); ++u) {
    const std::size_t deg = u < train.num_users() ? train.items_of(static_cast<std::uint32_t>(u)).size() : 0;
    nodes.push_back({model::distance_to_origin(geo, towers.user(u)), deg, nodes.size()});
  }
  for (std::size_t i = 0; i < towers.num_items(); ++i) {
    const std::size_t deg = i < train.num_items() ? train.users_of(static_cast<std::uint32_t>(i)).size() : 0;
    nodes.push_back({model::distance_to_origin(geo, towers.item(i)), deg, nodes.size()});
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const Node& a, const Node& b) { return a.dist != b.dist ? a.dist < b.dist : a.order < b.order; });
  const std::size_t n = nodes.size();
  std::vector<HierarchyGroup> groups;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const std::size_t begin = n * g / n_groups;
    const std::size_t end = n * (g + 1) / n_groups;
    HierarchyGroup group;
    group.nodes = end - begin;
    if (begin < end) {
      group.min_distance = nodes[begin].dist;
      group.max_distance = nodes[end - 1].dist;
      double sum = 0.0;
      for (std::size_t i = begin; i < end; ++i) sum += static_cast<double>(nodes[i].degree);
      group.avg_degree = sum / static_cast<double>(end - begin);
    }
    groups.push_back(group);
  }
  return groups;
}

std::vector<ScatterRow> embedding_scatter(const model::TowerTable& towers, std::size_t sample_n, std::uint64_t seed) {
  const std::size_t num_users = towers.num_users();
  const std::size_t total = num_users + towers.num_items();
  std::vector<std::size_t> ids(total);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  sample_n = std::min(sample_n, total);
  // Partial Fisher-Yates: the first sample_n slots are the sample.
  for (std::size_t i = 0; i < sample_n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(sample_n);
  const auto& geo = towers.geometry;
  auto point = [&](std::size_t id) { return id < num_users ? towers.user(id) : towers.item(id - num_users); };
  std::vector<double> sums(sample_n, 0.0);
  for (std::size_t a = 0; a < sample_n; ++a) {
    for (std::size_t b = a + 1; b < sample_n; ++b) {
      const double d = model::point_distance(geo, point(ids[a]), point(ids[b]));
      sums[a] += d;
      sums[b] += d;
    }
  }
  std::vector<ScatterRow> rows;
  for (std::size_t a = 0; a < sample_n; ++a) {
    ScatterRow row;
    const bool user = ids[a] < num_users;
    row.side = user ? data::Side::kUser : data::Side::kItem;
    row.node = static_cast<std::uint32_t>(user ? ids[a] : ids[a] - num_users);
    row.dist_to_origin = model::distance_to_origin(geo, point(ids[a]));
    if (sample_n > 1) row.avg_dist_to_others = sums[a] / static_cast<double>(sample_n - 1);
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void write_sparsity_csv(const std::filesystem::path& path, std::span<const SparsityBin> bins) {
  auto out = open_csv(path);
  out << "bin,degree_range,users,train_interactions,pairs,auc,accuracy\n";
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto& b = bins[i];
    out << i + 1 << ",\"[" << b.lo << ',' << b.hi << ")\"," << b.users << ',' << b.interactions << ',' << b.pairs << ','
        << fmt(b.auc) << ',' << fmt(b.accuracy) << '\n';
  }
}

void write_hierarchy_csv(const std::filesystem::path& path, std::span<const HierarchyGroup> groups) {
  auto out = open_csv(path);
  out << "group,nodes,min_distance,max_distance,avg_degree\n";
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    out << i + 1 << ',' << g.nodes << ',' << fmt(g.min_distance) << ',' << fmt(g.max_distance) << ','
        << fmt(g.avg_degree) << '\n';
  }
}

void write_scatter_csv(const std::filesystem::path& path, std::span<const ScatterRow> rows) {
  auto out = open_csv(path);
  out << "side,node,dist_to_origin,avg_dist_to_others\n";
  for (const auto& r : rows) {
    out << data::to_string(r.side) << ',' << r.node << ',' << fmt(r.dist_to_origin) << ',' << fmt(r.avg_dist_to_others)
        << '\n';
  }
}

}  // namespace hncr::eval
