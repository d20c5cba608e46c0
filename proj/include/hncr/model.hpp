#pragma once

// The recommendation network: per-node towers that aggregate semantic neighbors
// and interaction history in the tangent space at the origin, a stack of
// gyro-linear layers, and a Fermi-Dirac decoder over the geometry's distance.
// One code path serves both the Poincare ball (HNCR) and Euclidean space (ENCR).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hncr/autodiff.hpp"
#include "hncr/data.hpp"
#include "hncr/neighbors.hpp"

namespace hncr::model {

using data::Side;

enum class Backend { kHyperbolic, kEuclidean };
std::string_view to_string(Backend b) noexcept;
Backend parse_backend(std::string_view s);

/// Vector operations of one geometry, recorded on a tape.
struct Geometry {
  Backend backend = Backend::kHyperbolic;
  double c = 1.0;

  ad::Var add(ad::Var x, ad::Var y) const;
  ad::Var matvec(ad::Var m, ad::Var x, std::size_t rows) const;
  ad::Var exp0(ad::Var v) const;
  ad::Var log0(ad::Var x) const;
  ad::Var distance(ad::Var x, ad::Var y) const;
  ad::Var activation(ad::Var x, double slope) const;
};

struct Ablation {
  bool no_semantic = false;        // drop semantic-neighbor aggregation
  bool no_history = false;         // drop interaction-history aggregation
  bool uniform_attention = false;  // replace attention by 1/n
  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct HyperParams {
  Backend backend = Backend::kHyperbolic;
  std::size_t dim = 64;
  std::size_t layers = 1;
  double tau = 0.1;
  double curvature = 1.0;
  double r = 2.0;
  double t = 1.0;
  double leaky_slope = 0.01;
  double learning_rate = 1e-3;
  std::size_t batch = 1024;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  Ablation ablation;

  Geometry geometry() const noexcept { return {backend, backend == Backend::kHyperbolic ? curvature : 0.0}; }
  /// Throws InputError on out-of-range values.
  void validate() const;
  /// Layer count defaults to 1 for the ball and 2 for Euclidean space.
  static HyperParams defaults(Backend backend);
  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// HNCR / ENCR plus ablation suffixes (-S, -H, -A).
std::string variant_name(const HyperParams& hp);

/// Parameter groups; the index inside a group is a row or a layer.
enum ParamGroup : std::uint32_t {
  kUserEmb = 0,
  kItemEmb = 1,
  kUserMap = 2,
  kItemMap = 3,
  kUserBias = 4,
  kItemBias = 5,
};

struct ModelParams {
  Backend backend = Backend::kHyperbolic;
  double curvature = 1.0;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t dim = 0;
  std::size_t layers = 0;
  std::vector<double> user_emb;  // num_users x dim
  std::vector<double> item_emb;  // num_items x dim
  std::vector<std::vector<double>> user_map;  // per layer, dim x dim row-major
  std::vector<std::vector<double>> item_map;
  std::vector<std::vector<double>> user_bias;  // per layer, dim
  std::vector<std::vector<double>> item_bias;

  Geometry geometry() const noexcept { return {backend, backend == Backend::kHyperbolic ? curvature : 0.0}; }
  std::size_t count(Side side) const noexcept { return side == Side::kUser ? num_users : num_items; }
  std::span<const double> embedding(Side side, std::size_t node) const;
  std::span<double> block(ad::ParamId id);
  std::span<const double> block(ad::ParamId id) const;
  /// Ball-valued blocks (embeddings and biases under the hyperbolic backend).
  bool is_ball(ad::ParamId id) const noexcept;
  std::vector<ad::ParamBlock> blocks();
  std::size_t parameter_count() const noexcept;
  /// True when every ball-valued block lies inside the ball margin.
  bool in_ball() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Ball blocks ~ U[-1e-3, 1e-3]; matrices ~ U[-1/sqrt(d), 1/sqrt(d)].
ModelParams init_params(std::size_t num_users, std::size_t num_items, const HyperParams& hp);

/// Training interactions and neighbor lists the towers read from.
struct GraphContext {
  const data::InteractionMatrix* train = nullptr;
  const neighbors::NeighborSets* user_neighbors = nullptr;  // may be null
  const neighbors::NeighborSets* item_neighbors = nullptr;

  std::span<const std::uint32_t> semantic(Side side, std::uint32_t node) const;
  std::span<const std::uint32_t> history(Side side, std::uint32_t node) const;
};

/// softmax(-d(anchor, candidate) / tau), or 1/n under uniform attention.
ad::Var attention_weights(const Geometry& g, ad::Var anchor, std::span<const ad::Var> candidates, double tau,
                          bool uniform);
/// exp0(log0(anchor) + sum_b pi_b log0(sem_b) + sum_d pi_d log0(hist_d)); empty lists add nothing.
ad::Var aggregate(const Geometry& g, ad::Var anchor, std::span<const ad::Var> semantic,
                  std::span<const ad::Var> history, double tau, const Ablation& ablation);
/// sigma(M (x) (x (+) b)), with sigma the activation of the geometry.
ad::Var layer_forward(const Geometry& g, ad::Var x, ad::Var m, ad::Var b, double slope);
/// 1 / (exp((d - r) / t) + 1).
ad::Var fermi_dirac(ad::Var distance, double r, double t);
double fermi_dirac(double distance, double r, double t) noexcept;

/// Records tower outputs on one tape, reusing leaves and per-node results.
class TowerBuilder {
 public:
  TowerBuilder(ad::Tape& tape, const ModelParams& params, const HyperParams& hp, const GraphContext& ctx);

  ad::Var embedding(Side side, std::uint32_t node);
  /// Final representation u^L (or v^L) of a node.
  ad::Var tower(Side side, std::uint32_t node);
  /// Distance between the final user and item representations.
  ad::Var distance(std::uint32_t user, std::uint32_t item);
  /// Predicted interaction probability of (user, item).
  ad::Var score(std::uint32_t user, std::uint32_t item);

 private:
  ad::Var log0_of(Side side, std::uint32_t node);

  ad::Tape& tape_;
  const ModelParams& params_;
  const HyperParams& hp_;
  const GraphContext& ctx_;
  Geometry geo_;
  std::vector<std::vector<std::int64_t>> log0_cache_;
  std::vector<std::vector<std::int64_t>> tower_cache_;
};

/// Value-level helpers built on TowerBuilder.
std::vector<double> tower_value(const ModelParams& params, const HyperParams& hp, const GraphContext& ctx,
                                Side side, std::uint32_t node);
double predict_score(const ModelParams& params, const HyperParams& hp, const GraphContext& ctx, std::uint32_t user,
                     std::uint32_t item);

/// Final representations of every user and item, for bulk scoring.
struct TowerTable {
  Geometry geometry;
  double r = 2.0;
  double t = 1.0;
  std::size_t dim = 0;
  std::vector<double> users;
  std::vector<double> items;

  std::size_t num_users() const noexcept { return dim == 0 ? 0 : users.size() / dim; }
  std::size_t num_items() const noexcept { return dim == 0 ? 0 : items.size() / dim; }
  std::span<const double> user(std::size_t u) const { return {users.data() + u * dim, dim}; }
  std::span<const double> item(std::size_t i) const { return {items.data() + i * dim, dim}; }
  double distance(std::uint32_t user, std::uint32_t item) const;
  double score(std::uint32_t user, std::uint32_t item) const;
};
TowerTable compute_towers(const ModelParams& params, const HyperParams& hp, const GraphContext& ctx,
                          unsigned threads = 1);

/// Distance of a raw vector to the origin under a geometry.
double distance_to_origin(const Geometry& g, std::span<const double> x);
double point_distance(const Geometry& g, std::span<const double> x, std::span<const double> y);

struct Triplet {
  std::uint32_t user = 0;
  std::uint32_t positive = 0;
  std::uint32_t negative = 0;
};
using TripletBatch = std::vector<Triplet>;

/// Uniform positive pairs from `train` with a uniform negative item the user never
/// touched in `train`; deterministic per (seed, step).
TripletBatch sample_triplets(std::span<const data::Interaction> train, const data::InteractionMatrix& y,
                             std::size_t batch, std::uint64_t seed, std::uint64_t step);

inline constexpr double kProbEps = 1e-12;

/// -sum [log y(u, v+) + log(1 - y(u, v-))] with probabilities clamped to [eps, 1 - eps].
ad::Var batch_loss(TowerBuilder& towers, std::span<const Triplet> batch, double r, double t);
double batch_loss_value(const ModelParams& params, const HyperParams& hp, const GraphContext& ctx,
                        std::span<const Triplet> batch);

struct StepReport {
  std::size_t skipped_blocks = 0;  // blocks with non-finite gradients
};

/// Ball blocks: theta <- proj(theta - lr * rescale(theta) * g). Everything else: plain SGD.
StepReport rsgd_step(ModelParams& params, const ad::GradientSet& grads, double learning_rate);

/// Loss and gradients of one batch, split over worker tapes and reduced in order.
struct BatchGradient {
  double loss = 0.0;
  ad::GradientSet grads;
};
BatchGradient batch_gradient(const ModelParams& params, const HyperParams& hp, const GraphContext& ctx,
                             std::span<const Triplet> batch, unsigned threads = 1);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> val_auc;
  std::optional<double> val_acc;
};

struct TrainConfig {
  std::span<const data::Interaction> train;
  const data::InteractionMatrix* train_matrix = nullptr;
  std::span<const data::LabeledPair> validation;  // empty: keep the final parameters
  GraphContext context;
  unsigned threads = 1;
  bool check_ball = false;  // verify the ball invariant after every step
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  ModelParams params;  // best-validation (or final, or last good) parameters
  std::vector<EpochMetrics> trace;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string failure;
  std::vector<std::string> warnings;
};

TrainResult train(ModelParams init, const HyperParams& hp, const TrainConfig& config);

void write_trace_csv(const std::filesystem::path& path, std::span<const EpochMetrics> trace);

struct Checkpoint {
  ModelParams params;
  HyperParams hyper;
  std::uint64_t dataset_fingerprint = 0;
  std::uint64_t root_seed = 0;
  std::string variant;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hncr::model
