#pragma once

// Two-block synthetic interaction data with skewed user activity and item
// popularity. Users of block k mostly interact with items of block k.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "hncr/data.hpp"

namespace hncr::synthetic {

struct TwoBlockConfig {
  std::size_t users = 200;
  std::size_t items = 300;
  double in_block = 0.98;          // probability an interaction stays in the user's block
  std::size_t min_activity = 8;    // interactions per user, power-law between these bounds
  std::size_t max_activity = 80;
  double activity_exponent = 1.6;  // Pareto tail index of user activity
  double popularity_exponent = 1.2;  // Zipf exponent of item popularity inside a block
  std::uint64_t seed = 0;
};

struct TwoBlockData {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<data::Interaction> positives;  // sorted, unique
  std::vector<int> user_block;
  std::vector<int> item_block;
};

/// Users [0, users/2) and items [0, items/2) form block 0; the rest block 1.
TwoBlockData two_block(const TwoBlockConfig& config);

/// "user<TAB>item<TAB>1" lines with ids "u<n>" and "i<n>".
void write_ratings(const std::filesystem::path& path, const TwoBlockData& data);

}  // namespace hncr::synthetic
