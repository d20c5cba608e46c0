#include "hncr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "hncr/error.hpp"
#include "hncr/random.hpp"

namespace hncr::synthetic {

TwoBlockData two_block(const TwoBlockConfig& config) {
  if (config.users < 2 || config.items < 2) throw InputError("two_block: need at least 2 users and 2 items");
  if (config.min_activity < 1 || config.max_activity < config.min_activity) {
    throw InputError("two_block: bad activity bounds");
  }
  TwoBlockData out;
  out.num_users = config.users;
  out.num_items = config.items;
  const std::size_t half_users = config.users / 2;
  const std::size_t half_items = config.items / 2;
  for (std::size_t u = 0; u < config.users; ++u) out.user_block.push_back(u < half_users ? 0 : 1);
  for (std::size_t i = 0; i < config.items; ++i) out.item_block.push_back(i < half_items ? 0 : 1);

  Rng rng(derive_seed(config.seed, 0x5e7));
  // Zipf weights over a random popularity order inside each block.
  std::vector<std::uint32_t> block_items[2];
  std::discrete_distribution<std::size_t> pick[2];
  for (int b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < config.items; ++i) {
      if (out.item_block[i] == b) block_items[b].push_back(static_cast<std::uint32_t>(i));
    }
    std::shuffle(block_items[b].begin(), block_items[b].end(), rng);
    std::vector<double> w;
    for (std::size_t r = 0; r < block_items[b].size(); ++r) {
      w.push_back(1.0 / std::pow(static_cast<double>(r + 1), config.popularity_exponent));
    }
    pick[b] = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::uint32_t u = 0; u < config.users; ++u) {
    // Truncated Pareto draw for the number of interactions.
    const double lo = static_cast<double>(config.min_activity);
    const double hi = static_cast<double>(config.max_activity);
    const double a = config.activity_exponent;
    const double x = unit(rng);
    const double la = std::pow(lo, a);
    const double ha = std::pow(hi, a);
    const double draw = std::pow(-(x * ha - x * la - ha) / (ha * la), -1.0 / a);
    const auto want = std::min<std::size_t>(static_cast<std::size_t>(draw), config.items);
    std::vector<std::uint32_t> mine;
    std::size_t attempts = 0;
    while (mine.size() < want && attempts++ < want * 50) {
      const int own = out.user_block[u];
      const int b = unit(rng) < config.in_block ? own : 1 - own;
      const std::uint32_t item = block_items[b][pick[b](rng)];
      if (std::find(mine.begin(), mine.end(), item) == mine.end()) mine.push_back(item);
    }
    for (std::uint32_t i : mine) out.positives.push_back({u, i});
  }
  std::sort(out.positives.begin(), out.positives.end());
  return out;
}

void write_ratings(const std::filesystem::path& path, const TwoBlockData& data) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  for (const auto& p : data.positives) out << 'u' << p.user << "\ti" << p.item << "\t1\n";
}

}  // namespace hncr::synthetic
