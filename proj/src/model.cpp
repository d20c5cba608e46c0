#include "hncr/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "hncr/ball.hpp"
#include "hncr/error.hpp"
#include "hncr/evaluate.hpp"
#include "hncr/gyro_tape.hpp"
#include "hncr/parallel.hpp"
#include "hncr/random.hpp"

namespace hncr::model {

using ad::ParamId;
using ad::Tape;
using ad::Var;

std::string_view to_string(Backend b) noexcept {
  return b == Backend::kHyperbolic ? "hyperbolic" : "euclidean";
}

Backend parse_backend(std::string_view s) {
  if (s == "hyperbolic") return Backend::kHyperbolic;
  if (s == "euclidean") return Backend::kEuclidean;
  throw InputError("unknown backend '" + std::string(s) + "' (expected hyperbolic|euclidean)");
}

Var Geometry::add(Var x, Var y) const {
  return backend == Backend::kHyperbolic ? ad::gyro::mobius_add(x, y, c) : x + y;
}

Var Geometry::matvec(Var m, Var x, std::size_t rows) const {
  return backend == Backend::kHyperbolic ? ad::gyro::mobius_matvec(m, x, rows, c) : x.tape().matvec(m, x, rows);
}

Var Geometry::exp0(Var v) const { return backend == Backend::kHyperbolic ? ad::gyro::exp0(v, c) : v; }

Var Geometry::log0(Var x) const { return backend == Backend::kHyperbolic ? ad::gyro::log0(x, c) : x; }

Var Geometry::distance(Var x, Var y) const {
  return backend == Backend::kHyperbolic ? ad::gyro::distance(x, y, c) : x.tape().norm(x - y);
}

Var Geometry::activation(Var x, double slope) const {
  return backend == Backend::kHyperbolic ? ad::gyro::leaky_relu(x, slope, c) : x.tape().leaky_relu(x, slope);
}

void HyperParams::validate() const {
  auto fail = [](const std::string& what) { throw InputError("invalid hyperparameter: " + what); };
  if (dim < 1) fail("dim must be >= 1");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (!(t > 0.0)) fail("t must be > 0");
  if (!std::isfinite(r)) fail("r must be finite");
  if (backend == Backend::kHyperbolic && !(curvature > 0.0 && std::isfinite(curvature))) {
    fail("curvature must be > 0 for the hyperbolic backend");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (batch < 1) fail("batch must be >= 1");
  if (!(leaky_slope >= 0.0)) fail("leaky_slope must be >= 0");
}

HyperParams HyperParams::defaults(Backend backend) {
  HyperParams hp;
  hp.backend = backend;
  hp.layers = backend == Backend::kHyperbolic ? 1 : 2;
  return hp;
}

std::string variant_name(const HyperParams& hp) {
  std::string name = hp.backend == Backend::kHyperbolic ? "HNCR" : "ENCR";
  if (hp.ablation.no_semantic) name += "-S";
  if (hp.ablation.no_history) name += "-H";
  if (hp.ablation.uniform_attention) name += "-A";
  return name;
}

std::span<const double> ModelParams::embedding(Side side, std::size_t node) const {
  const auto& m = side == Side::kUser ? user_emb : item_emb;
  return {m.data() + node * dim, dim};
}

std::span<double> ModelParams::block(ParamId id) {
  const auto& self = *this;
  auto s = self.block(id);
  return {const_cast<double*>(s.data()), s.size()};
}

std::span<const double> ModelParams::block(ParamId id) const {
  switch (id.group) {
    case kUserEmb:
      if (id.index < num_users) return {user_emb.data() + std::size_t{id.index} * dim, dim};
      break;
    case kItemEmb:
      if (id.index < num_items) return {item_emb.data() + std::size_t{id.index} * dim, dim};
      break;
    case kUserMap:
      if (id.index < layers) return user_map[id.index];
      break;
    case kItemMap:
      if (id.index < layers) return item_map[id.index];
      break;
    case kUserBias:
      if (id.index < layers) return user_bias[id.index];
      break;
    case kItemBias:
      if (id.index < layers) return item_bias[id.index];
      break;
    default: break;
  }
  throw InputError("unknown parameter block (" + std::to_string(id.group) + ", " + std::to_string(id.index) + ")");
}

bool ModelParams::is_ball(ParamId id) const noexcept {
  return backend == Backend::kHyperbolic && id.group != kUserMap && id.group != kItemMap;
}

std::vector<ad::ParamBlock> ModelParams::blocks() {
  std::vector<ad::ParamBlock> out;
  for (std::uint32_t u = 0; u < num_users; ++u) out.push_back({{kUserEmb, u}, block({kUserEmb, u})});
  for (std::uint32_t i = 0; i < num_items; ++i) out.push_back({{kItemEmb, i}, block({kItemEmb, i})});
  for (std::uint32_t g : {kUserMap, kItemMap, kUserBias, kItemBias}) {
    for (std::uint32_t l = 0; l < layers; ++l) out.push_back({{g, l}, block({g, l})});
  }
  return out;
}

std::size_t ModelParams::parameter_count() const noexcept {
  return (num_users + num_items) * dim + 2 * layers * dim * dim + 2 * layers * dim;
}

bool ModelParams::in_ball() const {
  if (backend != Backend::kHyperbolic) return true;
  const double limit = (1.0 - ball::kBallEps) / std::sqrt(curvature);
  auto ok = [&](std::span<const double> x) {
    const double n = ball::raw::norm(x);
    return std::isfinite(n) && n <= limit * (1.0 + 1e-12);
  };
  for (std::size_t u = 0; u < num_users; ++u) {
    if (!ok(embedding(Side::kUser, u))) return false;
  }
  for (std::size_t i = 0; i < num_items; ++i) {
    if (!ok(embedding(Side::kItem, i))) return false;
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (!ok(user_bias[l]) || !ok(item_bias[l])) return false;
  }
  return true;
}

ModelParams init_params(std::size_t num_users, std::size_t num_items, const HyperParams& hp) {
  hp.validate();
  ModelParams p;
  p.backend = hp.backend;
  p.curvature = hp.backend == Backend::kHyperbolic ? hp.curvature : 0.0;
  p.num_users = num_users;
  p.num_items = num_items;
  p.dim = hp.dim;
  p.layers = hp.layers;
  Rng rng(derive_seed(hp.seed, 0x1417));
  std::uniform_real_distribution<double> small(-1e-3, 1e-3);
  const double a = 1.0 / std::sqrt(static_cast<double>(hp.dim));
  std::uniform_real_distribution<double> wide(-a, a);
  auto fill = [&](std::vector<double>& v, std::size_t n, auto& dist) {
    v.resize(n);
    for (double& x : v) x = dist(rng);
  };
  fill(p.user_emb, num_users * hp.dim, small);
  fill(p.item_emb, num_items * hp.dim, small);
  p.user_map.resize(hp.layers);
  p.item_map.resize(hp.layers);
  p.user_bias.resize(hp.layers);
  p.item_bias.resize(hp.layers);
  for (std::size_t l = 0; l < hp.layers; ++l) {
    fill(p.user_map[l], hp.dim * hp.dim, wide);
    fill(p.item_map[l], hp.dim * hp.dim, wide);
    fill(p.user_bias[l], hp.dim, small);
    fill(p.item_bias[l], hp.dim, small);
  }
  return p;
}

std::span<const std::uint32_t> GraphContext::semantic(Side side, std::uint32_t node) const {
  const auto* sets = side == Side::kUser ? user_neighbors : item_neighbors;
  if (sets == nullptr || node >= sets->lists.size()) return {};
  return sets->lists[node];
}

std::span<const std::uint32_t> GraphContext::history(Side side, std::uint32_t node) const {
  if (train == nullptr || node >= train->count(side)) return {};
  return train->neighbors(side, node);
}

Var attention_weights(const Geometry& g, Var anchor, std::span<const Var> candidates, double tau, bool uniform) {
  if (candidates.empty()) throw InputError("attention_weights: empty candidate list");
  Tape& t = anchor.tape();
  if (uniform) {
    const std::vector<double> w(candidates.size(), 1.0 / static_cast<double>(candidates.size()));
    return t.constant(w);
  }
  std::vector<Var> dists;
  dists.reserve(candidates.size());
  for (Var c : candidates) dists.push_back(g.distance(anchor, c));
  return t.softmax(t.affine(t.stack(dists), -1.0 / tau, 0.0));
}

namespace {

// Tangent-space aggregation given precomputed log0 images.
Var aggregate_logs(const Geometry& g, Var anchor, Var anchor_log, std::span<const Var> sem, std::span<const Var> sem_logs,
                   std::span<const Var> hist, std::span<const Var> hist_logs, double tau, const Ablation& ab) {
  Tape& t = anchor.tape();
  std::vector<Var> terms{anchor_log};
  if (!ab.no_semantic && !sem.empty()) {
    terms.push_back(t.weighted_sum(attention_weights(g, anchor, sem, tau, ab.uniform_attention), sem_logs));
  }
  if (!ab.no_history && !hist.empty()) {
    terms.push_back(t.weighted_sum(attention_weights(g, anchor, hist, tau, ab.uniform_attention), hist_logs));
  }
  if (terms.size() == 1) return anchor;
  return g.exp0(t.sum(terms));
}

}  // namespace

Var aggregate(const Geometry& g, Var anchor, std::span<const Var> semantic, std::span<const Var> history, double tau,
              const Ablation& ablation) {
  std::vector<Var> sem_logs;
  std::vector<Var> hist_logs;
  for (Var v : semantic) sem_logs.push_back(g.log0(v));
  for (Var v : history) hist_logs.push_back(g.log0(v));
  return aggregate_logs(g, anchor, g.log0(anchor), semantic, sem_logs, history, hist_logs, tau, ablation);
}

Var layer_forward(const Geometry& g, Var x, Var m, Var b, double slope) {
  return g.activation(g.matvec(m, g.add(x, b), x.size()), slope);
}

Var fermi_dirac(Var distance, double r, double t) {
  return distance.tape().sigmoid(distance.tape().affine(distance, -1.0 / t, r / t));
}

double fermi_dirac(double distance, double r, double t) noexcept {
  const double z = (r - distance) / t;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

TowerBuilder::TowerBuilder(Tape& tape, const ModelParams& params, const HyperParams& hp, const GraphContext& ctx)
    : tape_(tape), params_(params), hp_(hp), ctx_(ctx), geo_(params.geometry()) {
  log0_cache_.assign(2, {});
  tower_cache_.assign(2, {});
  log0_cache_[0].assign(params.num_users, -1);
  log0_cache_[1].assign(params.num_items, -1);
  tower_cache_[0].assign(params.num_users, -1);
  tower_cache_[1].assign(params.num_items, -1);
}

Var TowerBuilder::embedding(Side side, std::uint32_t node) {
  const ParamId id{side == Side::kUser ? kUserEmb : kItemEmb, node};
  return tape_.leaf(id, params_.block(id));
}

Var TowerBuilder::log0_of(Side side, std::uint32_t node) {
  auto& slot = log0_cache_[side == Side::kUser ? 0 : 1].at(node);
  if (slot < 0) slot = geo_.log0(embedding(side, node)).id();
  return Var(&tape_, static_cast<std::uint32_t>(slot));
}

Var TowerBuilder::tower(Side side, std::uint32_t node) {
  auto& slot = tower_cache_[side == Side::kUser ? 0 : 1].at(node);
  if (slot >= 0) return Var(&tape_, static_cast<std::uint32_t>(slot));

  const Side other = side == Side::kUser ? Side::kItem : Side::kUser;
  const Var anchor = embedding(side, node);
  std::vector<Var> sem;
  std::vector<Var> sem_logs;
  std::vector<Var> hist;
  std::vector<Var> hist_logs;
  if (!hp_.ablation.no_semantic) {
    for (std::uint32_t b : ctx_.semantic(side, node)) {
      sem.push_back(embedding(side, b));
      sem_logs.push_back(log0_of(side, b));
    }
  }
  if (!hp_.ablation.no_history) {
    for (std::uint32_t d : ctx_.history(side, node)) {
      hist.push_back(embedding(other, d));
      hist_logs.push_back(log0_of(other, d));
    }
  }
  Var x = aggregate_logs(geo_, anchor, log0_of(side, node), sem, sem_logs, hist, hist_logs, hp_.tau, hp_.ablation);
  const std::uint32_t map_group = side == Side::kUser ? kUserMap : kItemMap;
  const std::uint32_t bias_group = side == Side::kUser ? kUserBias : kItemBias;
  for (std::uint32_t l = 0; l < params_.layers; ++l) {
    const Var m = tape_.leaf({map_group, l}, params_.block({map_group, l}));
    const Var b = tape_.leaf({bias_group, l}, params_.block({bias_group, l}));
    x = layer_forward(geo_, x, m, b, hp_.leaky_slope);
  }
  slot = x.id();
  return x;
}

Var TowerBuilder::distance(std::uint32_t user, std::uint32_t item) {
  return geo_.distance(tower(Side::kUser, user), tower(Side::kItem, item));
}

Var TowerBuilder::score(std::uint32_t user, std::uint32_t item) { return fermi_dirac(distance(user, item), hp_.r, hp_.t); }

std::vector<double> tower_value(const ModelParams& params, const HyperParams& hp, const GraphContext& ctx, Side side,
                                std::uint32_t node) {
  Tape tape;
  TowerBuilder tb(tape, params, hp, ctx);
  const auto v = tb.tower(side, node).value();
  return {v.begin(), v.end()};
}

double predict_score(const ModelParams& params, const HyperParams& hp, const GraphContext& ctx, std::uint32_t user,
                     std::uint32_t item) {
  Tape tape;
  TowerBuilder tb(tape, params, hp, ctx);
  return tb.score(user, item).scalar();
}

double distance_to_origin(const Geometry& g, std::span<const double> x) {
  return g.backend == Backend::kHyperbolic ? ball::raw::distance_to_origin(x, g.c) : ball::raw::norm(x);
}

double point_distance(const Geometry& g, std::span<const double> x, std::span<const double> y) {
  if (g.backend == Backend::kHyperbolic) return ball::raw::distance(x, y, g.c);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

double TowerTable::distance(std::uint32_t u, std::uint32_t i) const { return point_distance(geometry, user(u), item(i)); }

double TowerTable::score(std::uint32_t u, std::uint32_t i) const { return fermi_dirac(distance(u, i), r, t); }

TowerTable compute_towers(const ModelParams& params, const HyperParams& hp, const GraphContext& ctx, unsigned threads) {
  TowerTable table;
  table.geometry = params.geometry();
  table.r = hp.r;
  table.t = hp.t;
  table.dim = params.dim;
  table.users.resize(params.num_users * params.dim);
  table.items.resize(params.num_items * params.dim);
  const std::size_t total = params.num_users + params.num_items;
  parallel_chunks(total, threads, [&](std::size_t begin, std::size_t end, unsigned) {
    Tape tape;
    for (std::size_t n = begin; n < end; ++n) {
      tape.clear();
      TowerBuilder tb(tape, params, hp, ctx);
      const bool is_user = n < params.num_users;
      const auto node = static_cast<std::uint32_t>(is_user ? n : n - params.num_users);
      const auto v = tb.tower(is_user ? Side::kUser : Side::kItem, node).value();
      double* out = (is_user ? table.users.data() : table.items.data()) + std::size_t{node} * params.dim;
      std::copy(v.begin(), v.end(), out);
    }
  });
  return table;
}

TripletBatch sample_triplets(std::span<const data::Interaction> train, const data::InteractionMatrix& y,
                             std::size_t batch, std::uint64_t seed, std::uint64_t step) {
  if (train.empty()) throw InputError("sample_triplets: empty training split");
  Rng rng(derive_seed(seed, step));
  std::uniform_int_distribution<std::size_t> pick_pair(0, train.size() - 1);
  std::uniform_int_distribution<std::uint32_t> pick_item(0, static_cast<std::uint32_t>(y.num_items() - 1));
  TripletBatch out;
  out.reserve(batch);
  std::size_t full_draws = 0;
  while (out.size() < batch) {
    const data::Interaction& p = train[pick_pair(rng)];
    if (y.items_of(p.user).size() >= y.num_items()) {
      // This user touched every item; no negative exists.
      if (++full_draws > 1000 * (batch + 1)) throw InputError("sample_triplets: no user has an unrated item");
      continue;
    }
    std::uint32_t neg = 0;
    do {
      neg = pick_item(rng);
    } while (y.contains(p.user, neg));
    out.push_back({p.user, p.item, neg});
  }
  return out;
}

Var batch_loss(TowerBuilder& towers, std::span<const Triplet> batch, double r, double temp) {
  std::vector<Var> terms;
  terms.reserve(2 * batch.size());
  for (const Triplet& tr : batch) {
    Var pos = fermi_dirac(towers.distance(tr.user, tr.positive), r, temp);
    Tape& t = pos.tape();
    // 1 - y of the negative, evaluated as its own sigmoid to keep precision.
    Var neg = t.sigmoid(t.affine(towers.distance(tr.user, tr.negative), 1.0 / temp, -r / temp));
    terms.push_back(t.log(t.clamp(pos, kProbEps, 1.0 - kProbEps)));
    terms.push_back(t.log(t.clamp(neg, kProbEps, 1.0 - kProbEps)));
  }
  Tape& t = terms.front().tape();
  return t.affine(t.sum(terms), -1.0, 0.0);
}

double batch_loss_value(const ModelParams& params, const HyperParams& hp, const GraphContext& ctx,
                        std::span<const Triplet> batch) {
  Tape tape;
  TowerBuilder tb(tape, params, hp, ctx);
  return batch_loss(tb, batch, hp.r, hp.t).scalar();
}

StepReport rsgd_step(ModelParams& params, const ad::GradientSet& grads, double learning_rate) {
  StepReport report;
  const double c = params.curvature;
  for (const auto& [id, g] : grads.blocks()) {
    if (!std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); })) {
      ++report.skipped_blocks;
      continue;
    }
    auto theta = params.block(id);
    if (theta.size() != g.size()) throw InputError("rsgd_step: gradient shape mismatch");
    if (params.is_ball(id)) {
      const double scale = ball::raw::riemannian_scale(theta, c);
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= learning_rate * scale * g[i];
      ball::raw::project(theta, c);
    } else {
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= learning_rate * g[i];
    }
  }
  return report;
}

BatchGradient batch_gradient(const ModelParams& params, const HyperParams& hp, const GraphContext& ctx,
                             std::span<const Triplet> batch, unsigned threads) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(batch.size(), 1))));
  std::vector<BatchGradient> parts(threads);
  parallel_chunks(batch.size(), threads, [&](std::size_t begin, std::size_t end, unsigned chunk) {
    if (begin == end) return;
    // Reused across calls on the same thread so the tape keeps its capacity.
    thread_local Tape tape;
    tape.clear();
    TowerBuilder tb(tape, params, hp, ctx);
    Var loss = batch_loss(tb, batch.subspan(begin, end - begin), hp.r, hp.t);
    parts[chunk].loss = loss.scalar();
    parts[chunk].grads = ad::gradient(tape, loss);
  });
  BatchGradient total;
  for (auto& p : parts) {
    total.loss += p.loss;
    total.grads += p.grads;
  }
  return total;
}

TrainResult train(ModelParams init, const HyperParams& hp, const TrainConfig& config) {
  hp.validate();
  TrainResult result;
  result.params = std::move(init);
  if (hp.epochs == 0) return result;
  if (config.train.empty() || config.train_matrix == nullptr) throw InputError("train: empty training split");

  ModelParams& current = result.params;
  ModelParams best = current;
  double best_auc = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const bool select = !config.validation.empty();
  const std::size_t steps = (config.train.size() + hp.batch - 1) / hp.batch;
  const std::uint64_t sample_seed = derive_seed(hp.seed, 0x7121);
  std::uint64_t step = 0;

  auto fail = [&](const std::string& why) {
    result.diverged = true;
    result.failure = why;
    if (select && result.best_epoch > 0) current = std::move(best);
    return std::move(result);
  };

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t skipped = 0;
    for (std::size_t s = 0; s < steps; ++s) {
      const TripletBatch batch = sample_triplets(config.train, *config.train_matrix, hp.batch, sample_seed, step++);
      BatchGradient bg;
      try {
        bg = batch_gradient(current, hp, config.context, batch, config.threads);
      } catch (const ad::NonFiniteError& e) {
        return fail("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(bg.loss)) return fail("epoch " + std::to_string(epoch) + ": non-finite loss");
      const ModelParams before = config.check_ball ? current : ModelParams{};
      skipped += rsgd_step(current, bg.grads, hp.learning_rate).skipped_blocks;
      if (config.check_ball && !current.in_ball()) {
        current = before;
        return fail("epoch " + std::to_string(epoch) + ": parameter left the ball");
      }
      loss_sum += bg.loss;
    }
    if (skipped > 0) {
      result.warnings.push_back("epoch " + std::to_string(epoch) + ": skipped " + std::to_string(skipped) +
                                " parameter updates with non-finite gradients");
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(steps * hp.batch);
    bool stop = false;
    if (select) {
      const TowerTable towers = compute_towers(current, hp, config.context, config.threads);
      const auto scored = eval::score_pairs(towers, config.validation);
      m.val_auc = eval::auc(scored);
      m.val_acc = eval::accuracy(scored);
      const double a = m.val_auc.value_or(0.0);
      if (a > best_auc) {
        best_auc = a;
        best = current;
        result.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= hp.patience) {
        stop = true;
      }
    } else {
      result.best_epoch = epoch;
    }
    result.trace.push_back(m);
    if (config.on_epoch) config.on_epoch(m);
    if (stop) break;
  }
  if (select) current = std::move(best);
  return result;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, std::span<const EpochMetrics> trace) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << "epoch,loss,val_auc,val_acc\n";
  for (const auto& m : trace) {
    out << m.epoch << ',' << format_double(m.loss) << ',' << (m.val_auc ? format_double(*m.val_auc) : "") << ','
        << (m.val_acc ? format_double(*m.val_acc) : "") << '\n';
  }
}

namespace {

constexpr std::string_view kCheckpointMagic = "hncr-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_block(std::ostream& out, std::string_view name, std::span<const double> v, std::size_t cols) {
  const std::size_t rows = cols == 0 ? 0 : v.size() / cols;
  out << "block " << name << ' ' << rows << ' ' << cols << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << ' ';
      out << format_double(v[r * cols + c]);
    }
    out << '\n';
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  const HyperParams& h = ckpt.hyper;
  std::ostringstream out;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "variant " << (ckpt.variant.empty() ? variant_name(h) : ckpt.variant) << '\n';
  out << "backend " << to_string(p.backend) << '\n';
  out << "curvature " << format_double(p.curvature) << '\n';
  out << "num_users " << p.num_users << '\n';
  out << "num_items " << p.num_items << '\n';
  out << "dim " << p.dim << '\n';
  out << "layers " << p.layers << '\n';
  out << "fingerprint " << ckpt.dataset_fingerprint << '\n';
  out << "root_seed " << ckpt.root_seed << '\n';
  out << "hp.backend " << to_string(h.backend) << '\n';
  out << "hp.dim " << h.dim << '\n';
  out << "hp.layers " << h.layers << '\n';
  out << "hp.tau " << format_double(h.tau) << '\n';
  out << "hp.curvature " << format_double(h.curvature) << '\n';
  out << "hp.r " << format_double(h.r) << '\n';
  out << "hp.t " << format_double(h.t) << '\n';
  out << "hp.leaky_slope " << format_double(h.leaky_slope) << '\n';
  out << "hp.learning_rate " << format_double(h.learning_rate) << '\n';
  out << "hp.batch " << h.batch << '\n';
  out << "hp.epochs " << h.epochs << '\n';
  out << "hp.patience " << h.patience << '\n';
  out << "hp.seed " << h.seed << '\n';
  out << "hp.no_semantic " << h.ablation.no_semantic << '\n';
  out << "hp.no_history " << h.ablation.no_history << '\n';
  out << "hp.uniform_attention " << h.ablation.uniform_attention << '\n';
  write_block(out, "user_emb", p.user_emb, p.dim);
  write_block(out, "item_emb", p.item_emb, p.dim);
  for (std::size_t l = 0; l < p.layers; ++l) {
    write_block(out, "user_map." + std::to_string(l), p.user_map[l], p.dim);
    write_block(out, "item_map." + std::to_string(l), p.item_map[l], p.dim);
    write_block(out, "user_bias." + std::to_string(l), p.user_bias[l], p.dim);
    write_block(out, "item_bias." + std::to_string(l), p.item_bias[l], p.dim);
  }
  out << "end\n";
  std::ofstream file(path, std::ios::binary);
  if (!file) throw InputError("cannot write checkpoint '" + path.string() + "'");
  file << out.str();
  if (!file) throw InputError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read checkpoint '" + path.string() + "'");
  auto corrupt = [&](const std::string& why) { return InputError("corrupt checkpoint '" + path.string() + "': " + why); };

  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) throw corrupt("bad magic");
  if (version != kCheckpointVersion) throw corrupt("unsupported version " + std::to_string(version));

  std::map<std::string, std::string> kv;
  std::map<std::string, std::vector<double>> blocks;
  std::string key;
  while (in >> key) {
    if (key == "end") break;
    if (key == "block") {
      std::string name;
      std::size_t rows = 0;
      std::size_t cols = 0;
      if (!(in >> name >> rows >> cols)) throw corrupt("bad block header");
      std::vector<double> v(rows * cols);
      std::string tok;
      for (double& x : v) {
        if (!(in >> tok)) throw corrupt("truncated block " + name);
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(x)) {
          throw corrupt("bad value in block " + name);
        }
      }
      blocks[name] = std::move(v);
      continue;
    }
    std::string value;
    if (!(in >> value)) throw corrupt("missing value for " + key);
    kv[key] = value;
  }
  if (key != "end") throw corrupt("missing end marker");

  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw corrupt("missing field " + k);
    return it->second;
  };
  auto get_u = [&](const std::string& k) -> std::uint64_t {
    const std::string& s = get(k);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw corrupt("bad integer for " + k);
    return v;
  };
  auto get_d = [&](const std::string& k) -> double {
    const std::string& s = get(k);
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw corrupt("bad number for " + k);
    return v;
  };

  Checkpoint ck;
  ck.variant = get("variant");
  ck.dataset_fingerprint = get_u("fingerprint");
  ck.root_seed = get_u("root_seed");
  HyperParams& h = ck.hyper;
  h.backend = parse_backend(get("hp.backend"));
  h.dim = get_u("hp.dim");
  h.layers = get_u("hp.layers");
  h.tau = get_d("hp.tau");
  h.curvature = get_d("hp.curvature");
  h.r = get_d("hp.r");
  h.t = get_d("hp.t");
  h.leaky_slope = get_d("hp.leaky_slope");
  h.learning_rate = get_d("hp.learning_rate");
  h.batch = get_u("hp.batch");
  h.epochs = get_u("hp.epochs");
  h.patience = get_u("hp.patience");
  h.seed = get_u("hp.seed");
  h.ablation.no_semantic = get_u("hp.no_semantic") != 0;
  h.ablation.no_history = get_u("hp.no_history") != 0;
  h.ablation.uniform_attention = get_u("hp.uniform_attention") != 0;

  ModelParams& p = ck.params;
  p.backend = parse_backend(get("backend"));
  p.curvature = get_d("curvature");
  p.num_users = get_u("num_users");
  p.num_items = get_u("num_items");
  p.dim = get_u("dim");
  p.layers = get_u("layers");
  auto take = [&](const std::string& name, std::size_t expected) {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw corrupt("missing block " + name);
    if (it->second.size() != expected) throw corrupt("block " + name + " has the wrong size");
    return std::move(it->second);
  };
  p.user_emb = take("user_emb", p.num_users * p.dim);
  p.item_emb = take("item_emb", p.num_items * p.dim);
  for (std::size_t l = 0; l < p.layers; ++l) {
    const std::string s = "." + std::to_string(l);
    p.user_map.push_back(take("user_map" + s, p.dim * p.dim));
    p.item_map.push_back(take("item_map" + s, p.dim * p.dim));
    p.user_bias.push_back(take("user_bias" + s, p.dim));
    p.item_bias.push_back(take("item_bias" + s, p.dim));
  }
  return ck;
}

}  // namespace hncr::model
