#pragma once

// Command-line driver: prepare | train | evaluate | rank | analyze.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace hncr::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kTrainingFailure = 3,
  kIncompatible = 4,
};

struct RunConfig {
  std::string dataset;
  std::string format = "auto";  // auto | tab | comma
  std::string positive_rule = "all";
  std::uint64_t seed = 0;
  double split_train = 0.6;
  double split_validation = 0.2;
  double split_test = 0.2;

  std::size_t k_user = 15;
  std::size_t k_item = 15;
  std::size_t latent_user = 64;
  std::size_t latent_item = 64;
  std::size_t line_epochs = 50;
  std::size_t line_negatives = 5;
  double line_rate = 0.025;
  std::string weight_mode = "paper";        // paper | common | none
  std::string neighbor_mode = "semantic";   // semantic | cooccurrence
  std::string neighbors_dir;                // defaults to out

  std::string backend = "hyperbolic";
  std::size_t dim = 64;
  int layers = -1;  // -1: 1 for hyperbolic, 2 for euclidean
  double tau = 0.1;
  double curvature = 1.0;
  double r = 2.0;
  double t = 1.0;
  double leaky_slope = 0.01;
  double learning_rate = 1e-3;
  std::size_t batch = 1024;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  std::vector<std::string> ablate;  // no_semantic | no_history | uniform_attention

  std::size_t repeats = 1;
  std::size_t ranking_negatives = 1000;
  std::vector<std::size_t> top_k = {2, 5, 10, 20, 50, 100};
  std::size_t n_bins = 4;
  std::size_t n_groups = 4;
  std::size_t scatter_n = 500;
  std::size_t rank_n = 20;
  std::string checkpoint;  // defaults to <out>/checkpoint.txt
  std::string out = "hncr_out";
};

/// Variant label such as HNCR, ENCR-N or HNCR-S, from backend, neighbor and ablation settings.
std::string variant_label(const RunConfig& config);

/// Parses arguments, runs the subcommand and returns the process exit code.
int run(int argc, char** argv);

}  // namespace hncr::cli
