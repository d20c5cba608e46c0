#include "hncr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <thread>
#include <type_traits>

#include "hncr/data.hpp"
#include "hncr/error.hpp"
#include "hncr/evaluate.hpp"
#include "hncr/model.hpp"
#include "hncr/neighbors.hpp"
#include "hncr/parallel.hpp"
#include "hncr/random.hpp"

namespace hncr::cli {

namespace fs = std::filesystem;
using data::Side;
using json = nlohmann::ordered_json;

std::string variant_label(const RunConfig& config) {
  std::string name = config.backend == "euclidean" ? "ENCR" : "HNCR";
  if (config.neighbor_mode == "cooccurrence") name += "-C";
  if (config.weight_mode == "common") name += "-N";
  if (config.weight_mode == "none") name += "-0";
  const auto has = [&](const char* a) { return std::find(config.ablate.begin(), config.ablate.end(), a) != config.ablate.end(); };
  if (has("no_semantic")) name += "-S";
  if (has("no_history")) name += "-H";
  if (has("uniform_attention")) name += "-A";
  return name;
}

namespace {

// Every random stream is derived from the root seed.
struct Seeds {
  std::uint64_t root = 0;
  std::uint64_t split = 0;
  std::uint64_t eval = 0;
  std::uint64_t line_user = 0;
  std::uint64_t line_item = 0;
  std::uint64_t model = 0;
  std::uint64_t ranking = 0;
  std::uint64_t scatter = 0;

  explicit Seeds(std::uint64_t r)
      : root(r),
        split(derive_seed(r, 1)),
        eval(derive_seed(r, 2)),
        line_user(derive_seed(r, 3)),
        line_item(derive_seed(r, 4)),
        model(derive_seed(r, 5)),
        ranking(derive_seed(r, 6)),
        scatter(derive_seed(r, 7)) {}

  json to_json() const {
    return {{"root", root},           {"split", split}, {"eval", eval},       {"line_user", line_user},
            {"line_item", line_item}, {"model", model}, {"ranking", ranking}, {"scatter", scatter}};
  }
};

struct Pipeline {
  data::LoadResult load;
  data::InteractionDataset dataset;
  data::Split split;
  data::InteractionMatrix all;
  data::InteractionMatrix train;
  data::SampledEvaluation validation;
  data::SampledEvaluation test;
  std::vector<std::string> warnings;
};

data::Delimiter parse_format(const std::string& f) {
  if (f == "tab") return data::Delimiter::kTab;
  if (f == "comma") return data::Delimiter::kComma;
  return data::Delimiter::kAuto;
}

Pipeline load_pipeline(const RunConfig& cfg, const Seeds& seeds) {
  if (cfg.dataset.empty()) throw InputError("no dataset given (set 'dataset' in the config or pass --dataset)");
  if (!fs::is_regular_file(cfg.dataset)) throw InputError("dataset '" + cfg.dataset + "' does not exist");
  Pipeline p;
  p.load = data::load_ratings(cfg.dataset, parse_format(cfg.format));
  p.warnings = p.load.warnings;
  p.dataset = data::to_implicit(p.load.records, data::PositiveRule::parse(cfg.positive_rule));
  if (p.dataset.positives.empty()) throw InputError("dataset '" + cfg.dataset + "' has no positive interactions");
  data::SplitConfig sc{cfg.split_train, cfg.split_validation, cfg.split_test, seeds.split};
  sc.validate();
  p.split = data::split_dataset(p.dataset.positives, sc);
  const std::size_t m = p.dataset.num_users();
  const std::size_t n = p.dataset.num_items();
  p.all = data::build_interaction_matrix(p.dataset.positives, m, n);
  p.train = data::build_interaction_matrix(p.split.train, m, n);
  p.validation = data::negative_sample(p.split.validation, p.all, derive_seed(seeds.eval, 1));
  p.test = data::negative_sample(p.split.test, p.all, derive_seed(seeds.eval, 2));
  for (const auto& w : p.validation.warnings) p.warnings.push_back("validation: " + w);
  for (const auto& w : p.test.warnings) p.warnings.push_back("test: " + w);
  return p;
}

data::SplitManifest make_manifest(const RunConfig& cfg, const Seeds& seeds, const Pipeline& p) {
  data::SplitManifest m;
  m.dataset = cfg.dataset;
  m.positive_rule = p.dataset.rule.describe();
  m.root_seed = seeds.root;
  m.split_seed = seeds.split;
  m.eval_seed = seeds.eval;
  m.ratios[0] = cfg.split_train;
  m.ratios[1] = cfg.split_validation;
  m.ratios[2] = cfg.split_test;
  m.num_records = p.load.records.size();
  m.malformed = p.load.malformed;
  m.num_users = p.dataset.num_users();
  m.num_items = p.dataset.num_items();
  m.num_positives = p.dataset.positives.size();
  m.train = p.split.train.size();
  m.validation = p.split.validation.size();
  m.test = p.split.test.size();
  m.fingerprint = p.dataset.fingerprint();
  return m;
}

bool has_ablation(const std::vector<std::string>& a, const char* name) {
  return std::find(a.begin(), a.end(), name) != a.end();
}

model::HyperParams to_hyper(const RunConfig& cfg, const Seeds& seeds) {
  model::HyperParams hp = model::HyperParams::defaults(model::parse_backend(cfg.backend));
  hp.dim = cfg.dim;
  if (cfg.layers >= 0) hp.layers = static_cast<std::size_t>(cfg.layers);
  hp.tau = cfg.tau;
  hp.curvature = cfg.curvature;
  hp.r = cfg.r;
  hp.t = cfg.t;
  hp.leaky_slope = cfg.leaky_slope;
  hp.learning_rate = cfg.learning_rate;
  hp.batch = cfg.batch;
  hp.epochs = cfg.epochs;
  hp.patience = cfg.patience;
  hp.seed = seeds.model;
  hp.ablation.no_semantic = has_ablation(cfg.ablate, "no_semantic");
  hp.ablation.no_history = has_ablation(cfg.ablate, "no_history");
  hp.ablation.uniform_attention = has_ablation(cfg.ablate, "uniform_attention");
  hp.validate();
  return hp;
}

fs::path neighbors_dir(const RunConfig& cfg) { return cfg.neighbors_dir.empty() ? fs::path(cfg.out) : fs::path(cfg.neighbors_dir); }

fs::path checkpoint_path(const RunConfig& cfg) {
  return cfg.checkpoint.empty() ? fs::path(cfg.out) / "checkpoint.txt" : fs::path(cfg.checkpoint);
}

struct NeighborPair {
  neighbors::NeighborSets user;
  neighbors::NeighborSets item;
  bool present = false;
  json info = json::object();
  std::vector<std::string> warnings;
  std::vector<neighbors::LatentSpace> latents;
};

// Builds neighbor sets from the training interactions.
NeighborPair build_neighbors(const RunConfig& cfg, const Seeds& seeds, const Pipeline& p, unsigned threads) {
  NeighborPair out;
  out.present = true;
  const auto mode = neighbors::parse_weight_mode(cfg.weight_mode);
  const bool semantic = cfg.neighbor_mode == "semantic";
  for (Side side : {Side::kUser, Side::kItem}) {
    const bool user = side == Side::kUser;
    const auto graph = neighbors::build_relational_graph(p.train, side, mode, threads);
    const auto mask = neighbors::connected_mask(graph);
    const std::size_t k = user ? cfg.k_user : cfg.k_item;
    const std::uint64_t seed = user ? seeds.line_user : seeds.line_item;
    neighbors::NeighborSets sets;
    if (semantic) {
      neighbors::LineConfig lc;
      lc.dim = user ? cfg.latent_user : cfg.latent_item;
      lc.epochs = cfg.line_epochs;
      lc.negatives = cfg.line_negatives;
      lc.initial_rate = cfg.line_rate;
      lc.seed = seed;
      auto embedded = neighbors::embed_relational_graph(graph, lc);
      for (auto& w : embedded.warnings) out.warnings.push_back(std::move(w));
      sets = neighbors::semantic_neighbors(embedded.latent, k, mask, threads);
      out.latents.push_back(std::move(embedded.latent));
    } else {
      sets = neighbors::cooccurrence_neighbors(graph, k);
    }
    sets.side = side;
    sets.k = k;
    sets.seed = seed;
    sets.weight_mode = cfg.weight_mode;
    const auto isolated = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), false));
    out.info[std::string(data::to_string(side))] = {
        {"nodes", graph.num_nodes()}, {"edges", graph.edges().size()}, {"isolated", isolated}, {"k", k}, {"seed", seed}};
    (user ? out.user : out.item) = std::move(sets);
  }
  return out;
}

std::string neighbor_file(Side side, const std::string& mode) {
  return std::string(data::to_string(side)) + (mode == "semantic" ? "_neighbors.txt" : "_cooccurrence.txt");
}

// Neighbor sets a model run reads: loaded from prepare's output, or built on the fly for co-occurrence.
NeighborPair obtain_neighbors(const RunConfig& cfg, const Seeds& seeds, const Pipeline& p, bool needed, unsigned threads) {
  NeighborPair out;
  if (!needed) return out;
  if (cfg.neighbor_mode == "cooccurrence") return build_neighbors(cfg, seeds, p, threads);
  for (Side side : {Side::kUser, Side::kItem}) {
    const fs::path path = neighbors_dir(cfg) / neighbor_file(side, cfg.neighbor_mode);
    if (!fs::is_regular_file(path)) {
      throw InputError("neighbor file '" + path.string() + "' is missing; run 'prepare' first");
    }
    auto sets = neighbors::load_neighbor_sets(path, p.dataset.num_users() * (side == Side::kUser) +
                                                        p.dataset.num_items() * (side == Side::kItem));
    if (sets.side != side) throw IncompatibleError("neighbor file '" + path.string() + "' is for the wrong side");
    if (sets.weight_mode != cfg.weight_mode) {
      throw IncompatibleError("neighbor file '" + path.string() + "' was built with weight mode '" + sets.weight_mode +
                              "', config asks for '" + cfg.weight_mode + "'");
    }
    (side == Side::kUser ? out.user : out.item) = std::move(sets);
  }
  out.present = true;
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void report_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

model::Checkpoint load_compatible_checkpoint(const RunConfig& cfg, const Pipeline& p) {
  const fs::path path = checkpoint_path(cfg);
  if (!fs::is_regular_file(path)) throw InputError("checkpoint '" + path.string() + "' does not exist");
  auto ck = model::load_checkpoint(path);
  if (ck.dataset_fingerprint != p.dataset.fingerprint() || ck.params.num_users != p.dataset.num_users() ||
      ck.params.num_items != p.dataset.num_items()) {
    throw IncompatibleError("checkpoint '" + path.string() + "' was trained on a different dataset index");
  }
  return ck;
}

model::GraphContext context_for(const Pipeline& p, const NeighborPair& nb) {
  model::GraphContext ctx;
  ctx.train = &p.train;
  if (nb.present) {
    ctx.user_neighbors = &nb.user;
    ctx.item_neighbors = &nb.item;
  }
  return ctx;
}

int cmd_prepare(const RunConfig& cfg, const Seeds& seeds, const std::string& echo, unsigned threads) {
  const Pipeline p = load_pipeline(cfg, seeds);
  const NeighborPair nb = build_neighbors(cfg, seeds, p, threads);
  const fs::path out = cfg.out;
  ensure_dir(out);
  write_text(out / "config.txt", echo);
  make_manifest(cfg, seeds, p).write(out / "manifest.json");
  neighbors::save_neighbor_sets(out / neighbor_file(Side::kUser, cfg.neighbor_mode), nb.user);
  neighbors::save_neighbor_sets(out / neighbor_file(Side::kItem, cfg.neighbor_mode), nb.item);
  if (nb.latents.size() == 2) {
    neighbors::save_latent_space(out / "user_latent.txt", nb.latents[0]);
    neighbors::save_latent_space(out / "item_latent.txt", nb.latents[1]);
  }
  json meta = {{"command", "prepare"},
               {"seeds", seeds.to_json()},
               {"weight_mode", cfg.weight_mode},
               {"neighbor_mode", cfg.neighbor_mode},
               {"line", {{"epochs", cfg.line_epochs}, {"negatives", cfg.line_negatives}, {"rate", cfg.line_rate}}},
               {"graphs", nb.info},
               {"warnings", nb.warnings}};
  write_text(out / "prepare.json", meta.dump(2) + "\n");
  report_warnings(p.warnings);
  report_warnings(nb.warnings);
  std::cout << "prepared " << p.dataset.num_users() << " users, " << p.dataset.num_items() << " items, "
            << p.split.train.size() << " training interactions -> " << out.string() << '\n';
  return kOk;
}

int cmd_train(const RunConfig& cfg, const Seeds& seeds, const std::string& echo, unsigned threads) {
  const Pipeline p = load_pipeline(cfg, seeds);
  const model::HyperParams hp = to_hyper(cfg, seeds);
  const NeighborPair nb = obtain_neighbors(cfg, seeds, p, !hp.ablation.no_semantic, threads);
  const model::GraphContext ctx = context_for(p, nb);

  model::TrainConfig tc;
  tc.train = p.split.train;
  tc.train_matrix = &p.train;
  tc.validation = p.validation.pairs;
  tc.context = ctx;
  tc.threads = threads;
  tc.on_epoch = [](const model::EpochMetrics& m) {
    std::cout << "epoch " << m.epoch << " loss " << m.loss;
    if (m.val_auc) std::cout << " val_auc " << *m.val_auc;
    if (m.val_acc) std::cout << " val_acc " << *m.val_acc;
    std::cout << std::endl;
  };
  const auto init = model::init_params(p.dataset.num_users(), p.dataset.num_items(), hp);
  const model::TrainResult res = model::train(init, hp, tc);

  const fs::path out = cfg.out;
  ensure_dir(out);
  write_text(out / "config.txt", echo);
  model::Checkpoint ck{res.params, hp, p.dataset.fingerprint(), seeds.root, variant_label(cfg)};
  model::save_checkpoint(out / "checkpoint.txt", ck);
  model::write_trace_csv(out / "metrics.csv", res.trace);
  json meta = {{"command", "train"},
               {"variant", ck.variant},
               {"dataset", cfg.dataset},
               {"fingerprint", p.dataset.fingerprint()},
               {"positive_rule", p.dataset.rule.describe()},
               {"seeds", seeds.to_json()},
               {"backend", cfg.backend},
               {"weight_mode", cfg.weight_mode},
               {"neighbor_mode", cfg.neighbor_mode},
               {"ablate", cfg.ablate},
               {"parameters", res.params.parameter_count()},
               {"epochs_run", res.trace.size()},
               {"best_epoch", res.best_epoch},
               {"diverged", res.diverged},
               {"failure", res.failure},
               {"warnings", res.warnings}};
  write_text(out / "run.json", meta.dump(2) + "\n");
  report_warnings(p.warnings);
  report_warnings(res.warnings);
  if (res.diverged) {
    std::cerr << "training diverged: " << res.failure << " (last good parameters kept in "
              << (out / "checkpoint.txt").string() << ")\n";
    return kTrainingFailure;
  }
  std::cout << ck.variant << " trained; best epoch " << res.best_epoch << " -> " << out.string() << '\n';
  return kOk;
}

int cmd_evaluate(const RunConfig& cfg, const Seeds& seeds, const std::string& echo, unsigned threads) {
  const Pipeline p = load_pipeline(cfg, seeds);
  const model::Checkpoint ck = load_compatible_checkpoint(cfg, p);
  const NeighborPair nb = obtain_neighbors(cfg, seeds, p, !ck.hyper.ablation.no_semantic, threads);
  const model::TowerTable towers = model::compute_towers(ck.params, ck.hyper, context_for(p, nb), threads);

  const auto scored = eval::score_pairs(towers, p.test.pairs);
  const auto test_auc = eval::auc(scored);
  const double test_acc = scored.empty() ? 0.0 : eval::accuracy(scored);

  std::string csv = "metric,k,repeat,seed,value\n";
  const std::uint64_t ctr_seed = derive_seed(seeds.eval, 2);
  csv += "auc,,," + std::to_string(ctr_seed) + "," + (test_auc ? fmt(*test_auc) : "") + "\n";
  csv += "accuracy,,," + std::to_string(ctr_seed) + "," + fmt(test_acc) + "\n";
  std::vector<double> mean_p(cfg.top_k.size(), 0.0);
  std::vector<double> mean_r(cfg.top_k.size(), 0.0);
  std::vector<std::uint64_t> ranking_seeds;
  for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
    const std::uint64_t seed = derive_seed(seeds.ranking, rep);
    ranking_seeds.push_back(seed);
    const auto tasks = eval::build_ranking_tasks(p.split.test, p.all, towers, cfg.ranking_negatives, seed, threads);
    const auto rows = eval::average_precision_recall(tasks, cfg.top_k);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      mean_p[i] += rows[i].precision / static_cast<double>(cfg.repeats);
      mean_r[i] += rows[i].recall / static_cast<double>(cfg.repeats);
      csv += "precision," + std::to_string(rows[i].k) + "," + std::to_string(rep) + "," + std::to_string(seed) + "," +
             fmt(rows[i].precision) + "\n";
      csv += "recall," + std::to_string(rows[i].k) + "," + std::to_string(rep) + "," + std::to_string(seed) + "," +
             fmt(rows[i].recall) + "\n";
    }
  }

  std::string summary;
  summary += "variant = " + ck.variant + "\n";
  summary += "root_seed = " + std::to_string(seeds.root) + "\n";
  summary += "ctr_negative_seed = " + std::to_string(ctr_seed) + "\n";
  summary += "test_pairs = " + std::to_string(scored.size()) + "\n";
  summary += "auc = " + (test_auc ? fmt(*test_auc) : std::string("undefined")) + "\n";
  summary += "accuracy = " + fmt(test_acc) + "\n";
  summary += "repeats = " + std::to_string(cfg.repeats) + "\n";
  summary += "ranking_negatives = " + std::to_string(cfg.ranking_negatives) + "\n";
  for (std::size_t rep = 0; rep < ranking_seeds.size(); ++rep) {
    summary += "ranking_seed." + std::to_string(rep) + " = " + std::to_string(ranking_seeds[rep]) + "\n";
  }
  for (std::size_t i = 0; i < cfg.top_k.size(); ++i) {
    summary += "precision@" + std::to_string(cfg.top_k[i]) + " = " + fmt(mean_p[i]) + "\n";
    summary += "recall@" + std::to_string(cfg.top_k[i]) + " = " + fmt(mean_r[i]) + "\n";
  }

  const fs::path out = cfg.out;
  ensure_dir(out);
  write_text(out / "evaluate_config.txt", echo);
  write_text(out / "evaluation.csv", csv);
  write_text(out / "evaluation_summary.txt", summary);
  report_warnings(p.warnings);
  std::cout << summary;
  return kOk;
}

int cmd_rank(const RunConfig& cfg, const Seeds& seeds, unsigned threads) {
  const Pipeline p = load_pipeline(cfg, seeds);
  const model::Checkpoint ck = load_compatible_checkpoint(cfg, p);
  const NeighborPair nb = obtain_neighbors(cfg, seeds, p, !ck.hyper.ablation.no_semantic, threads);
  const model::TowerTable towers = model::compute_towers(ck.params, ck.hyper, context_for(p, nb), threads);

  // Known interactions (train and validation) are never recommended.
  std::vector<data::Interaction> known(p.split.train);
  known.insert(known.end(), p.split.validation.begin(), p.split.validation.end());
  const auto seen = data::build_interaction_matrix(known, p.dataset.num_users(), p.dataset.num_items());

  std::string csv = "user,rank,item,score\n";
  std::vector<std::pair<double, std::uint32_t>> cand;
  for (std::uint32_t u = 0; u < p.dataset.num_users(); ++u) {
    cand.clear();
    for (std::uint32_t i = 0; i < p.dataset.num_items(); ++i) {
      if (!seen.contains(u, i)) cand.emplace_back(towers.score(u, i), i);
    }
    const std::size_t take = std::min(cfg.rank_n, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    for (std::size_t r = 0; r < take; ++r) {
      csv += p.dataset.users.name(u) + "," + std::to_string(r + 1) + "," + p.dataset.items.name(cand[r].second) + "," +
             fmt(cand[r].first) + "\n";
    }
  }
  const fs::path out = cfg.out;
  ensure_dir(out);
  write_text(out / "recommendations.csv", csv);
  std::cout << "wrote top-" << cfg.rank_n << " recommendations for " << p.dataset.num_users() << " users\n";
  return kOk;
}

int cmd_analyze(const RunConfig& cfg, const Seeds& seeds, unsigned threads) {
  const Pipeline p = load_pipeline(cfg, seeds);
  std::optional<model::Checkpoint> ck;
  const bool explicit_ckpt = !cfg.checkpoint.empty();
  if (explicit_ckpt || fs::is_regular_file(checkpoint_path(cfg))) ck = load_compatible_checkpoint(cfg, p);

  std::optional<model::TowerTable> towers;
  if (ck) {
    const NeighborPair nb = obtain_neighbors(cfg, seeds, p, !ck->hyper.ablation.no_semantic, threads);
    towers = model::compute_towers(ck->params, ck->hyper, context_for(p, nb), threads);
  }

  const fs::path out = cfg.out;
  ensure_dir(out);
  data::write_histogram_csv(out / "user_degree_histogram.csv", data::degree_histogram(p.train, Side::kUser));
  data::write_histogram_csv(out / "item_degree_histogram.csv", data::degree_histogram(p.train, Side::kItem));
  if (ck) {
    const auto scored = eval::score_pairs(*towers, p.test.pairs);
    eval::write_sparsity_csv(out / "sparsity_bins.csv", eval::sparsity_bins(scored, p.train, cfg.n_bins));
    eval::write_hierarchy_csv(out / "hierarchy_bins.csv", eval::hierarchy_bins(*towers, p.train, cfg.n_groups));
    eval::write_scatter_csv(out / "embedding_scatter.csv", eval::embedding_scatter(*towers, cfg.scatter_n, seeds.scatter));
    std::cout << "wrote degree histograms, sparsity bins, hierarchy bins and embedding scatter to " << out.string() << '\n';
  } else {
    std::cout << "wrote degree histograms to " << out.string() << " (no checkpoint: model analyses skipped)\n";
  }
  return kOk;
}

// Effective configuration in the same key=value form --config accepts.
std::string config_text(const RunConfig& c) {
  std::string s;
  auto kv = [&](const char* k, const std::string& v) { s += std::string(k) + "=" + v + "\n"; };
  auto q = [](const std::string& v) { return "\"" + v + "\""; };
  auto num = [](auto v) {
    if constexpr (std::is_floating_point_v<decltype(v)>) {
      return fmt(v);
    } else {
      return std::to_string(v);
    }
  };
  kv("dataset", q(c.dataset));
  kv("format", q(c.format));
  kv("positive-rule", q(c.positive_rule));
  kv("seed", num(c.seed));
  kv("split-train", num(c.split_train));
  kv("split-validation", num(c.split_validation));
  kv("split-test", num(c.split_test));
  kv("k-user", num(c.k_user));
  kv("k-item", num(c.k_item));
  kv("latent-user", num(c.latent_user));
  kv("latent-item", num(c.latent_item));
  kv("line-epochs", num(c.line_epochs));
  kv("line-negatives", num(c.line_negatives));
  kv("line-rate", num(c.line_rate));
  kv("weight-mode", q(c.weight_mode));
  kv("neighbor-mode", q(c.neighbor_mode));
  if (!c.neighbors_dir.empty()) kv("neighbors-dir", q(c.neighbors_dir));
  kv("backend", q(c.backend));
  kv("dim", num(c.dim));
  kv("layers", num(c.layers));
  kv("tau", num(c.tau));
  kv("curvature", num(c.curvature));
  kv("r", num(c.r));
  kv("t", num(c.t));
  kv("leaky-slope", num(c.leaky_slope));
  kv("learning-rate", num(c.learning_rate));
  kv("batch", num(c.batch));
  kv("epochs", num(c.epochs));
  kv("patience", num(c.patience));
  if (!c.ablate.empty()) {
    std::string list;
    for (const auto& a : c.ablate) list += (list.empty() ? "" : ",") + q(a);
    kv("ablate", "[" + list + "]");
  }
  kv("repeats", num(c.repeats));
  kv("ranking-negatives", num(c.ranking_negatives));
  std::string ks;
  for (auto k : c.top_k) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  kv("top-k", "[" + ks + "]");
  kv("n-bins", num(c.n_bins));
  kv("n-groups", num(c.n_groups));
  kv("scatter-n", num(c.scatter_n));
  kv("rank-n", num(c.rank_n));
  if (!c.checkpoint.empty()) kv("checkpoint", q(c.checkpoint));
  kv("out", q(c.out));
  return s;
}

void add_options(CLI::App& app, RunConfig& c) {
  app.add_option("--dataset", c.dataset, "Ratings file: user, item, rating per line (tab or comma)");
  app.add_option("--format", c.format, "Field separator")->check(CLI::IsMember({"auto", "tab", "comma"}));
  app.add_option("--positive-rule", c.positive_rule, "'all' or '>=X' on the rating");
  app.add_option("--seed", c.seed, "Root seed; every random stream derives from it");
  app.add_option("--split-train", c.split_train);
  app.add_option("--split-validation", c.split_validation);
  app.add_option("--split-test", c.split_test);
  app.add_option("--k-user", c.k_user, "Semantic neighbors per user");
  app.add_option("--k-item", c.k_item, "Semantic neighbors per item");
  app.add_option("--latent-user", c.latent_user, "User latent-space dimension");
  app.add_option("--latent-item", c.latent_item, "Item latent-space dimension");
  app.add_option("--line-epochs", c.line_epochs, "Edge samples per edge for the graph embedding");
  app.add_option("--line-negatives", c.line_negatives);
  app.add_option("--line-rate", c.line_rate);
  app.add_option("--weight-mode", c.weight_mode, "Relational-graph edge weights")
      ->check(CLI::IsMember({"paper", "common", "none"}));
  app.add_option("--neighbor-mode", c.neighbor_mode)->check(CLI::IsMember({"semantic", "cooccurrence"}));
  app.add_option("--neighbors-dir", c.neighbors_dir, "Where prepare wrote the neighbor files (default: --out)");
  app.add_option("--backend", c.backend)->check(CLI::IsMember({"hyperbolic", "euclidean"}));
  app.add_option("--dim", c.dim);
  app.add_option("--layers", c.layers, "-1 picks 1 (hyperbolic) or 2 (euclidean)");
  app.add_option("--tau", c.tau, "Attention temperature");
  app.add_option("--curvature", c.curvature);
  app.add_option("--r", c.r, "Fermi-Dirac radius");
  app.add_option("--t", c.t, "Fermi-Dirac temperature");
  app.add_option("--leaky-slope", c.leaky_slope);
  app.add_option("--learning-rate", c.learning_rate);
  app.add_option("--batch", c.batch, "Triplets per step");
  app.add_option("--epochs", c.epochs);
  app.add_option("--patience", c.patience, "Epochs without validation improvement before stopping");
  app.add_option("--ablate", c.ablate)->check(CLI::IsMember({"no_semantic", "no_history", "uniform_attention"}));
  app.add_option("--repeats", c.repeats, "Ranking repeats with fresh negatives");
  app.add_option("--ranking-negatives", c.ranking_negatives);
  app.add_option("--top-k", c.top_k);
  app.add_option("--n-bins", c.n_bins);
  app.add_option("--n-groups", c.n_groups);
  app.add_option("--scatter-n", c.scatter_n);
  app.add_option("--rank-n", c.rank_n, "Recommendations per user for 'rank'");
  app.add_option("--checkpoint", c.checkpoint, "Checkpoint path (default: <out>/checkpoint.txt)");
  app.add_option("--out", c.out, "Output directory");
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Hyperbolic neighbor-aware collaborative recommendation"};
  app.name("hncr");
  RunConfig cfg;
  app.set_config("--config", "", "key = value configuration file; flags override it");
  add_options(app, cfg);
  app.require_subcommand(1, 1);
  auto* prepare = app.add_subcommand("prepare", "Build relational graphs and neighbor sets")->fallthrough();
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint")->fallthrough();
  auto* evaluate = app.add_subcommand("evaluate", "CTR and top-K evaluation of a checkpoint")->fallthrough();
  auto* rank = app.add_subcommand("rank", "Top-N recommendations per user")->fallthrough();
  auto* analyze = app.add_subcommand("analyze", "Degree histograms, sparsity and hierarchy analyses")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }
  if (cfg.repeats < 1) cfg.repeats = 1;
  const std::string echo = config_text(cfg);
  const Seeds seeds(cfg.seed);
  const unsigned threads = threads_from_env(std::max(1u, std::thread::hardware_concurrency()));

  try {
    if (prepare->parsed()) return cmd_prepare(cfg, seeds, echo, threads);
    if (train->parsed()) return cmd_train(cfg, seeds, echo, threads);
    if (evaluate->parsed()) return cmd_evaluate(cfg, seeds, echo, threads);
    if (rank->parsed()) return cmd_rank(cfg, seeds, threads);
    if (analyze->parsed()) return cmd_analyze(cfg, seeds, threads);
  } catch (const IncompatibleError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIncompatible;
  } catch (const TrainingError& e) {
    std::cerr << "training failure: " << e.what() << '\n';
    return kTrainingFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace hncr::cli
