#pragma once

// Semantic-neighbor construction: weighted relational graphs over users (or
// items), a first-order LINE embedding of each graph, and k-nearest neighbors
// in the resulting latent space.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hncr/data.hpp"

namespace hncr::neighbors {

using data::Side;

enum class WeightMode {
  kPaper,   // heat kernel x inverse popularity of the shared counterparts
  kCommon,  // number of shared counterparts
  kNone,    // every edge weighs 1
};
std::string_view to_string(WeightMode m) noexcept;
WeightMode parse_weight_mode(std::string_view s);

/// Time parameter of the heat kernel.
inline constexpr double kHeatKernelTime = 100.0;

struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double weight = 0.0;
};

struct WeightedNeighbor {
  std::uint32_t node = 0;
  double weight = 0.0;
};

class RelationalGraph {
 public:
  RelationalGraph(std::size_t num_nodes, Side side, std::vector<Edge> edges);

  std::size_t num_nodes() const noexcept { return adjacency_.size(); }
  Side side() const noexcept { return side_; }
  /// Undirected edges with a < b, sorted by (a, b).
  std::span<const Edge> edges() const noexcept { return edges_; }
  /// Neighbors of a node sorted by id.
  std::span<const WeightedNeighbor> adjacent(std::uint32_t node) const { return adjacency_.at(node); }
  double weight(std::uint32_t a, std::uint32_t b) const;  // 0 when absent

 private:
  Side side_;
  std::vector<Edge> edges_;
  std::vector<std::vector<WeightedNeighbor>> adjacency_;
};

struct EdgeWeightParts {
  double heat = 0.0;        // exp(-|Y_a - Y_b|^2 / t)
  double popularity = 0.0;  // (2 / |C_ab|) sum_{v in C_ab} 1 / |I(v)|
  double weight() const noexcept { return heat * popularity; }
};

/// Weight between two distinct nodes of `side` under Y. Throws InputError when
/// they share no counterpart: such pairs have no edge at all.
EdgeWeightParts edge_weight(const data::InteractionMatrix& y, Side side, std::uint32_t a, std::uint32_t b,
                            double heat_time = kHeatKernelTime);

/// Edges join nodes that share at least one counterpart in Y.
RelationalGraph build_relational_graph(const data::InteractionMatrix& y, Side side, WeightMode mode,
                                       unsigned threads = 1);

/// Row-major node vectors.
struct LatentSpace {
  std::size_t num_nodes = 0;
  std::size_t dim = 0;
  std::vector<double> coords;

  std::span<const double> row(std::size_t node) const { return {coords.data() + node * dim, dim}; }
  std::span<double> row(std::size_t node) { return {coords.data() + node * dim, dim}; }
};

struct LineConfig {
  std::size_t dim = 64;
  std::size_t epochs = 50;  // total edge samples = epochs * |E|
  std::size_t negatives = 5;
  double initial_rate = 0.025;
  std::uint64_t seed = 0;
};

struct EmbedResult {
  LatentSpace latent;
  std::vector<std::string> warnings;
};

/// First-order LINE: weight-proportional edge sampling, degree^0.75 negative
/// sampling, sequential SGD with a linearly decaying rate. Deterministic per seed.
EmbedResult embed_relational_graph(const RelationalGraph& graph, const LineConfig& config);

struct NeighborSets {
  Side side = Side::kUser;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string weight_mode = "paper";
  std::vector<std::vector<std::uint32_t>> lists;  // nearest first

  std::size_t num_nodes() const noexcept { return lists.size(); }
  friend bool operator==(const NeighborSets&, const NeighborSets&) = default;
};

/// K nearest other nodes by Euclidean distance, ties by smaller id. Nodes with
/// `active[n] == false` get an empty list and are never candidates; an empty
/// mask means every node is active.
NeighborSets semantic_neighbors(const LatentSpace& latent, std::size_t k, const std::vector<bool>& active = {},
                                unsigned threads = 1);

/// K heaviest direct graph neighbors, ties by smaller id.
NeighborSets cooccurrence_neighbors(const RelationalGraph& graph, std::size_t k);

/// Nodes with at least one edge.
std::vector<bool> connected_mask(const RelationalGraph& graph);

void save_neighbor_sets(const std::filesystem::path& path, const NeighborSets& sets);
/// Throws InputError on a corrupt file and IncompatibleError when the node count
/// differs from `expected_nodes`.
NeighborSets load_neighbor_sets(const std::filesystem::path& path, std::size_t expected_nodes);

void save_latent_space(const std::filesystem::path& path, const LatentSpace& latent);

}  // namespace hncr::neighbors
