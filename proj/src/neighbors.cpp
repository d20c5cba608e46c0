#include "hncr/neighbors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "hncr/error.hpp"
#include "hncr/parallel.hpp"
#include "hncr/random.hpp"

namespace hncr::neighbors {

std::string_view to_string(WeightMode m) noexcept {
  switch (m) {
    case WeightMode::kPaper: return "paper";
    case WeightMode::kCommon: return "common";
    case WeightMode::kNone: return "none";
  }
  return "paper";
}

WeightMode parse_weight_mode(std::string_view s) {
  if (s == "paper") return WeightMode::kPaper;
  if (s == "common") return WeightMode::kCommon;
  if (s == "none") return WeightMode::kNone;
  throw InputError("unknown weight mode '" + std::string(s) + "' (expected paper|common|none)");
}

RelationalGraph::RelationalGraph(std::size_t num_nodes, Side side, std::vector<Edge> edges)
    : side_(side), edges_(std::move(edges)), adjacency_(num_nodes) {
  for (Edge& e : edges_) {
    if (e.a == e.b) throw InputError("relational graph: self-loop");
    if (e.a > e.b) std::swap(e.a, e.b);
    if (e.b >= num_nodes) throw InputError("relational graph: node id out of range");
    if (!(e.weight > 0.0)) throw InputError("relational graph: weights must be positive");
  }
  std::sort(edges_.begin(), edges_.end(), [](const Edge& x, const Edge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  for (const Edge& e : edges_) {
    adjacency_[e.a].push_back({e.b, e.weight});
    adjacency_[e.b].push_back({e.a, e.weight});
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(), [](const auto& x, const auto& y) { return x.node < y.node; });
  }
}

double RelationalGraph::weight(std::uint32_t a, std::uint32_t b) const {
  const auto adj = adjacent(a);
  auto it = std::lower_bound(adj.begin(), adj.end(), b, [](const auto& n, std::uint32_t id) { return n.node < id; });
  return it != adj.end() && it->node == b ? it->weight : 0.0;
}

namespace {

Side other(Side s) { return s == Side::kUser ? Side::kItem : Side::kUser; }

double make_weight(WeightMode mode, std::size_t deg_a, std::size_t deg_b, std::size_t common, double inv_pop_sum,
                   double heat_time) {
  switch (mode) {
    case WeightMode::kCommon: return static_cast<double>(common);
    case WeightMode::kNone: return 1.0;
    case WeightMode::kPaper: break;
  }
  // Rows of a binary Y: |Y_a - Y_b|^2 = |I_a| + |I_b| - 2 |C_ab|.
  const double sq_dist = static_cast<double>(deg_a + deg_b - 2 * common);
  const double heat = std::exp(-sq_dist / heat_time);
  const double pop = 2.0 / static_cast<double>(common) * inv_pop_sum;
  return heat * pop;
}

}  // namespace

EdgeWeightParts edge_weight(const data::InteractionMatrix& y, Side side, std::uint32_t a, std::uint32_t b,
                            double heat_time) {
  if (a == b) throw InputError("edge_weight: nodes must differ");
  const auto na = y.neighbors(side, a);
  const auto nb = y.neighbors(side, b);
  std::vector<std::uint32_t> common;
  std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
  if (common.empty()) throw InputError("edge_weight: nodes share no counterpart");
  double inv = 0.0;
  for (std::uint32_t v : common) inv += 1.0 / static_cast<double>(y.neighbors(other(side), v).size());
  EdgeWeightParts parts;
  parts.heat = std::exp(-static_cast<double>(na.size() + nb.size() - 2 * common.size()) / heat_time);
  parts.popularity = 2.0 / static_cast<double>(common.size()) * inv;
  return parts;
}

RelationalGraph build_relational_graph(const data::InteractionMatrix& y, Side side, WeightMode mode,
                                       unsigned threads) {
  const std::size_t n = y.count(side);
  const Side counter = other(side);
  std::vector<std::vector<Edge>> per_anchor(n);
  parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end, unsigned) {
    std::vector<std::uint32_t> common(n, 0);
    std::vector<double> inv_pop(n, 0.0);
    std::vector<std::uint32_t> touched;
    for (std::size_t a = begin; a < end; ++a) {
      touched.clear();
      for (std::uint32_t cp : y.neighbors(side, static_cast<std::uint32_t>(a))) {
        const auto others = y.neighbors(counter, cp);
        const double inv = 1.0 / static_cast<double>(others.size());
        for (std::uint32_t b : others) {
          if (b <= a) continue;
          if (common[b] == 0) touched.push_back(b);
          ++common[b];
          inv_pop[b] += inv;
        }
      }
      std::sort(touched.begin(), touched.end());
      const std::size_t deg_a = y.neighbors(side, static_cast<std::uint32_t>(a)).size();
      for (std::uint32_t b : touched) {
        const std::size_t deg_b = y.neighbors(side, b).size();
        per_anchor[a].push_back({static_cast<std::uint32_t>(a), b,
                                 make_weight(mode, deg_a, deg_b, common[b], inv_pop[b], kHeatKernelTime)});
        common[b] = 0;
        inv_pop[b] = 0.0;
      }
    }
  });
  std::vector<Edge> edges;
  for (auto& v : per_anchor) edges.insert(edges.end(), v.begin(), v.end());
  return RelationalGraph(n, side, std::move(edges));
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool adjacent_to(const RelationalGraph& g, std::uint32_t a, std::uint32_t b) {
  const auto adj = g.adjacent(a);
  auto it = std::lower_bound(adj.begin(), adj.end(), b, [](const auto& n, std::uint32_t id) { return n.node < id; });
  return it != adj.end() && it->node == b;
}

}  // namespace

EmbedResult embed_relational_graph(const RelationalGraph& graph, const LineConfig& config) {
  EmbedResult result;
  LatentSpace& z = result.latent;
  z.num_nodes = graph.num_nodes();
  z.dim = config.dim;
  z.coords.assign(z.num_nodes * z.dim, 0.0);
  const auto edges = graph.edges();
  if (edges.empty()) {
    result.warnings.push_back(std::string(data::to_string(graph.side())) +
                              " relational graph has no edges; latent space is all zeros");
    return result;
  }

  Rng rng(config.seed);
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(z.dim), 0.5 / static_cast<double>(z.dim));
  for (double& v : z.coords) v = init(rng);

  std::vector<double> edge_w;
  edge_w.reserve(edges.size());
  for (const Edge& e : edges) edge_w.push_back(e.weight);
  std::discrete_distribution<std::size_t> edge_pick(edge_w.begin(), edge_w.end());

  std::vector<double> noise(z.num_nodes, 0.0);
  for (std::uint32_t v = 0; v < z.num_nodes; ++v) {
    double deg = 0.0;
    for (const auto& nb : graph.adjacent(v)) deg += nb.weight;
    noise[v] = std::pow(deg, 0.75);
  }
  std::discrete_distribution<std::uint32_t> noise_pick(noise.begin(), noise.end());
  std::bernoulli_distribution flip(0.5);

  const std::size_t total = config.epochs * edges.size();
  std::vector<double> err(z.dim);
  constexpr int kMaxRejects = 8;
  for (std::size_t s = 0; s < total; ++s) {
    const double rate = config.initial_rate * std::max(1e-4, 1.0 - static_cast<double>(s) / static_cast<double>(total));
    const Edge& e = edges[edge_pick(rng)];
    std::uint32_t u = e.a;
    std::uint32_t v = e.b;
    if (flip(rng)) std::swap(u, v);
    auto zu = z.row(u);
    std::fill(err.begin(), err.end(), 0.0);
    for (std::size_t k = 0; k <= config.negatives; ++k) {
      std::uint32_t target = v;
      double label = 1.0;
      if (k > 0) {
        // Negatives are non-neighbors of u; give up after a few rejections.
        int tries = 0;
        do {
          target = noise_pick(rng);
        } while ((target == u || adjacent_to(graph, u, target)) && ++tries < kMaxRejects);
        if (tries >= kMaxRejects) continue;
        label = 0.0;
      }
      auto zt = z.row(target);
      double dot = 0.0;
      for (std::size_t i = 0; i < z.dim; ++i) dot += zu[i] * zt[i];
      const double g = (label - sigmoid(dot)) * rate;
      for (std::size_t i = 0; i < z.dim; ++i) {
        err[i] += g * zt[i];
        zt[i] += g * zu[i];
      }
    }
    for (std::size_t i = 0; i < z.dim; ++i) zu[i] += err[i];
  }
  return result;
}

std::vector<bool> connected_mask(const RelationalGraph& graph) {
  std::vector<bool> mask(graph.num_nodes());
  for (std::uint32_t v = 0; v < graph.num_nodes(); ++v) mask[v] = !graph.adjacent(v).empty();
  return mask;
}

NeighborSets semantic_neighbors(const LatentSpace& latent, std::size_t k, const std::vector<bool>& active,
                                unsigned threads) {
  if (!active.empty() && active.size() != latent.num_nodes) throw InputError("semantic_neighbors: mask size mismatch");
  auto is_active = [&](std::size_t n) { return active.empty() || active[n]; };
  NeighborSets sets;
  sets.k = k;
  sets.lists.resize(latent.num_nodes);
  if (k == 0) return sets;
  parallel_chunks(latent.num_nodes, threads, [&](std::size_t begin, std::size_t end, unsigned) {
    std::vector<std::pair<double, std::uint32_t>> cand;
    for (std::size_t q = begin; q < end; ++q) {
      if (!is_active(q)) continue;
      cand.clear();
      const auto zq = latent.row(q);
      for (std::uint32_t c = 0; c < latent.num_nodes; ++c) {
        if (c == q || !is_active(c)) continue;
        const auto zc = latent.row(c);
        double d2 = 0.0;
        for (std::size_t i = 0; i < latent.dim; ++i) {
          const double diff = zq[i] - zc[i];
          d2 += diff * diff;
        }
        cand.emplace_back(d2, c);
      }
      const std::size_t take = std::min(k, cand.size());
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
      auto& list = sets.lists[q];
      for (std::size_t j = 0; j < take; ++j) list.push_back(cand[j].second);
    }
  });
  return sets;
}

NeighborSets cooccurrence_neighbors(const RelationalGraph& graph, std::size_t k) {
  NeighborSets sets;
  sets.side = graph.side();
  sets.k = k;
  sets.lists.resize(graph.num_nodes());
  std::vector<WeightedNeighbor> adj;
  for (std::uint32_t v = 0; v < graph.num_nodes(); ++v) {
    const auto span = graph.adjacent(v);
    adj.assign(span.begin(), span.end());
    const std::size_t take = std::min(k, adj.size());
    std::partial_sort(adj.begin(), adj.begin() + static_cast<std::ptrdiff_t>(take), adj.end(),
                      [](const auto& x, const auto& y) { return x.weight != y.weight ? x.weight > y.weight : x.node < y.node; });
    for (std::size_t j = 0; j < take; ++j) sets.lists[v].push_back(adj[j].node);
  }
  return sets;
}

void save_neighbor_sets(const std::filesystem::path& path, const NeighborSets& sets) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << data::to_string(sets.side) << ' ' << sets.k << ' ' << sets.seed << ' ' << sets.weight_mode << '\n';
  for (std::size_t n = 0; n < sets.lists.size(); ++n) {
    out << n << ':';
    for (std::uint32_t nb : sets.lists[n]) out << ' ' << nb;
    out << '\n';
  }
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

NeighborSets load_neighbor_sets(const std::filesystem::path& path, std::size_t expected_nodes) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read neighbor file '" + path.string() + "'");
  auto corrupt = [&](const std::string& why) {
    return InputError("corrupt neighbor file '" + path.string() + "': " + why);
  };
  NeighborSets sets;
  std::string line;
  if (!std::getline(in, line)) throw corrupt("missing header");
  {
    std::istringstream hs(line);
    std::string side;
    std::string extra;
    if (!(hs >> side >> sets.k >> sets.seed >> sets.weight_mode) || (hs >> extra)) throw corrupt("bad header");
    try {
      sets.side = data::parse_side(side);
    } catch (const InputError&) {
      throw corrupt("bad side '" + side + "'");
    }
  }
  std::vector<bool> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw corrupt("missing ':'");
    std::size_t node = 0;
    const auto [p, ec] = std::from_chars(line.data(), line.data() + colon, node);
    if (ec != std::errc() || p != line.data() + colon) throw corrupt("bad node id");
    if (node >= sets.lists.size()) {
      sets.lists.resize(node + 1);
      seen.resize(node + 1, false);
    }
    if (seen[node]) throw corrupt("duplicate node " + std::to_string(node));
    seen[node] = true;
    std::istringstream ns(line.substr(colon + 1));
    std::string tok;
    while (ns >> tok) {
      std::uint32_t nb = 0;
      const auto [q, ec2] = std::from_chars(tok.data(), tok.data() + tok.size(), nb);
      if (ec2 != std::errc() || q != tok.data() + tok.size()) throw corrupt("bad neighbor id '" + tok + "'");
      if (nb == node) throw corrupt("node lists itself");
      sets.lists[node].push_back(nb);
    }
    if (sets.lists[node].size() > sets.k) throw corrupt("more than K neighbors");
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw corrupt("missing node lines");
  if (sets.lists.size() != expected_nodes) {
    throw IncompatibleError("neighbor file '" + path.string() + "' has " + std::to_string(sets.lists.size()) +
                            " nodes, dataset has " + std::to_string(expected_nodes));
  }
  for (const auto& list : sets.lists) {
    for (std::uint32_t nb : list) {
      if (nb >= expected_nodes) throw corrupt("neighbor id out of range");
    }
  }
  return sets;
}

void save_latent_space(const std::filesystem::path& path, const LatentSpace& latent) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << std::setprecision(9);
  for (std::size_t n = 0; n < latent.num_nodes; ++n) {
    out << n;
    for (double v : latent.row(n)) out << ' ' << v;
    out << '\n';
  }
}

}  // namespace hncr::neighbors
