#include "hncr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hncr/error.hpp"
#include "hncr/random.hpp"

namespace hncr::data {

std::string_view to_string(Side side) noexcept { return side == Side::kUser ? "user" : "item"; }

Side parse_side(std::string_view s) {
  if (s == "user") return Side::kUser;
  if (s == "item") return Side::kItem;
  throw InputError("unknown side '" + std::string(s) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= kFnvPrime;
  }
  h ^= 0xff;
  return h * kFnvPrime;
}

}  // namespace

LoadResult parse_ratings(std::istream& in, Delimiter delim) {
  LoadResult result;
  std::string raw;
  std::size_t data_lines = 0;
  bool first = true;
  while (std::getline(in, raw)) {
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    ++result.lines;
    char sep = delim == Delimiter::kComma ? ',' : '\t';
    if (delim == Delimiter::kAuto) sep = line.find('\t') != std::string_view::npos ? '\t' : ',';
    const auto fields = split_fields(line, sep);
    std::optional<double> rating;
    if (fields.size() >= 3) rating = parse_double(fields[2]);
    const bool ok = rating && !fields[0].empty() && !fields[1].empty();
    if (first && !ok && fields.size() >= 3) {
      result.header_skipped = true;
      first = false;
      continue;
    }
    first = false;
    ++data_lines;
    if (!ok) {
      ++result.malformed;
      continue;
    }
    result.records.push_back({std::string(fields[0]), std::string(fields[1]), *rating});
  }
  if (data_lines == 0) {
    result.warnings.push_back("no rating records found");
    return result;
  }
  if (result.malformed * 100 > data_lines) {
    throw InputError("too many malformed lines: " + std::to_string(result.malformed) + " of " +
                     std::to_string(data_lines));
  }
  if (result.malformed > 0) {
    result.warnings.push_back("skipped " + std::to_string(result.malformed) + " malformed line(s)");
  }
  return result;
}

LoadResult load_ratings(const std::filesystem::path& path, Delimiter delim) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read ratings file '" + path.string() + "'");
  return parse_ratings(in, delim);
}

std::string PositiveRule::describe() const {
  if (!min_rating) return "all";
  std::ostringstream os;
  os << ">=" << *min_rating;
  return os.str();
}

PositiveRule PositiveRule::parse(std::string_view s) {
  s = trim(s);
  if (s.empty() || s == "all") return {};
  if (s.substr(0, 2) == ">=") s.remove_prefix(2);
  if (auto v = parse_double(trim(s))) return PositiveRule{*v};
  throw InputError("bad positive rule '" + std::string(s) + "' (expected 'all' or '>=X')");
}

std::uint32_t IdIndex::intern(const std::string& id) {
  auto [it, inserted] = index_.try_emplace(id, static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.push_back(id);
  return it->second;
}

std::optional<std::uint32_t> IdIndex::find(const std::string& id) const {
  if (auto it = index_.find(id); it != index_.end()) return it->second;
  return std::nullopt;
}

std::uint64_t IdIndex::fingerprint() const noexcept {
  std::uint64_t h = kFnvOffset;
  for (const std::string& n : names_) h = fnv1a(h, n);
  return h;
}

std::uint64_t InteractionDataset::fingerprint() const noexcept {
  return mix_seed(users.fingerprint()) ^ items.fingerprint();
}

InteractionDataset to_implicit(std::span<const RatingRecord> records, const PositiveRule& rule) {
  InteractionDataset ds;
  ds.rule = rule;
  for (const RatingRecord& r : records) {
    const std::uint32_t u = ds.users.intern(r.user_id);
    const std::uint32_t i = ds.items.intern(r.item_id);
    if (rule.accepts(r.rating)) ds.positives.push_back({u, i});
  }
  std::sort(ds.positives.begin(), ds.positives.end());
  ds.positives.erase(std::unique(ds.positives.begin(), ds.positives.end()), ds.positives.end());
  return ds;
}

void SplitConfig::validate() const {
  if (train < 0 || validation < 0 || test < 0 || std::abs(train + validation + test - 1.0) > 1e-9) {
    throw InputError("split ratios must be non-negative and sum to 1");
  }
}

Split split_dataset(std::span<const Interaction> positives, const SplitConfig& config) {
  config.validate();
  std::vector<Interaction> shuffled(positives.begin(), positives.end());
  Rng rng(derive_seed(config.seed, 0x5011));
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const std::size_t n = shuffled.size();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.train));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.validation)));
  Split s;
  s.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train),
                      shuffled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), shuffled.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

InteractionMatrix::InteractionMatrix(std::size_t num_users, std::size_t num_items,
                                     std::span<const Interaction> pairs)
    : num_users_(num_users), num_items_(num_items) {
  std::vector<Interaction> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::size_t> ucount(num_users, 0);
  std::vector<std::size_t> icount(num_items, 0);
  for (const Interaction& p : sorted) {
    if (p.user >= num_users || p.item >= num_items) throw InputError("interaction id out of range");
    ++ucount[p.user];
    ++icount[p.item];
  }
  user_offsets_.assign(num_users + 1, 0);
  item_offsets_.assign(num_items + 1, 0);
  std::partial_sum(ucount.begin(), ucount.end(), user_offsets_.begin() + 1);
  std::partial_sum(icount.begin(), icount.end(), item_offsets_.begin() + 1);
  user_items_.resize(sorted.size());
  item_users_.resize(sorted.size());
  std::vector<std::size_t> ufill(user_offsets_.begin(), user_offsets_.end() - 1);
  std::vector<std::size_t> ifill(item_offsets_.begin(), item_offsets_.end() - 1);
  // Sorted by (user, item), so both adjacency directions come out sorted.
  for (const Interaction& p : sorted) {
    user_items_[ufill[p.user]++] = p.item;
    item_users_[ifill[p.item]++] = p.user;
  }
}

std::span<const std::uint32_t> InteractionMatrix::items_of(std::uint32_t user) const {
  return {user_items_.data() + user_offsets_.at(user), user_offsets_.at(user + 1) - user_offsets_[user]};
}

std::span<const std::uint32_t> InteractionMatrix::users_of(std::uint32_t item) const {
  return {item_users_.data() + item_offsets_.at(item), item_offsets_.at(item + 1) - item_offsets_[item]};
}

std::span<const std::uint32_t> InteractionMatrix::neighbors(Side side, std::uint32_t node) const {
  return side == Side::kUser ? items_of(node) : users_of(node);
}

bool InteractionMatrix::contains(std::uint32_t user, std::uint32_t item) const {
  if (user >= num_users_) return false;
  const auto items = items_of(user);
  return std::binary_search(items.begin(), items.end(), item);
}

InteractionMatrix build_interaction_matrix(std::span<const Interaction> train, std::size_t num_users,
                                           std::size_t num_items) {
  return InteractionMatrix(num_users, num_items, train);
}

std::vector<std::uint32_t> sample_unrated(std::span<const std::uint32_t> excluded, std::size_t num_items,
                                          std::size_t count, std::uint64_t seed) {
  const std::size_t pool = num_items - std::min(num_items, excluded.size());
  Rng rng(seed);
  std::vector<std::uint32_t> out;
  if (count == 0 || pool == 0) return out;
  if (count * 4 < pool) {
    // Sparse request: rejection sampling against the excluded set and prior draws.
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(num_items - 1));
    std::vector<char> taken(num_items, 0);
    for (std::uint32_t e : excluded) taken[e] = 1;
    out.reserve(count);
    while (out.size() < count) {
      const std::uint32_t item = pick(rng);
      if (taken[item]) continue;
      taken[item] = 1;
      out.push_back(item);
    }
    return out;
  }
  std::vector<std::uint32_t> candidates;
  candidates.reserve(pool);
  for (std::uint32_t i = 0; i < num_items; ++i) {
    if (!std::binary_search(excluded.begin(), excluded.end(), i)) candidates.push_back(i);
  }
  const std::size_t take = std::min(count, candidates.size());
  for (std::size_t k = 0; k < take; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
    std::swap(candidates[k], candidates[pick(rng)]);
  }
  candidates.resize(take);
  return candidates;
}

SampledEvaluation negative_sample(std::span<const Interaction> split, const InteractionMatrix& all,
                                  std::uint64_t seed) {
  std::vector<Interaction> sorted(split.begin(), split.end());
  std::sort(sorted.begin(), sorted.end());
  SampledEvaluation out;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const std::uint32_t user = sorted[i].user;
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].user == user) ++j;
    for (std::size_t k = i; k < j; ++k) out.pairs.push_back({sorted[k], 1});
    const std::size_t wanted = j - i;
    const auto negatives = sample_unrated(all.items_of(user), all.num_items(), wanted, derive_seed(seed, user));
    if (negatives.size() < wanted) {
      out.warnings.push_back("user " + std::to_string(user) + ": only " + std::to_string(negatives.size()) +
                             " unrated item(s) for " + std::to_string(wanted) + " requested negatives");
    }
    for (std::uint32_t item : negatives) out.pairs.push_back({{user, item}, 0});
    i = j;
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> degree_histogram(const InteractionMatrix& y, Side side) {
  std::vector<std::size_t> counts;
  for (std::uint32_t n = 0; n < y.count(side); ++n) {
    const std::size_t d = y.neighbors(side, n).size();
    if (d == 0) continue;
    if (counts.size() <= d) counts.resize(d + 1, 0);
    ++counts[d];
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t d = 1; d < counts.size(); ++d) {
    if (counts[d] > 0) out.emplace_back(d, counts[d]);
  }
  return out;
}

void write_histogram_csv(const std::filesystem::path& path,
                         std::span<const std::pair<std::size_t, std::size_t>> histogram) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << "degree,count\n";
  for (const auto& [d, c] : histogram) out << d << ',' << c << '\n';
}

void SplitManifest::write(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["positive_rule"] = positive_rule;
  j["root_seed"] = root_seed;
  j["split_seed"] = split_seed;
  j["eval_seed"] = eval_seed;
  j["ratios"] = {ratios[0], ratios[1], ratios[2]};
  j["num_records"] = num_records;
  j["malformed_lines"] = malformed;
  j["num_users"] = num_users;
  j["num_items"] = num_items;
  j["num_positives"] = num_positives;
  j["train"] = train;
  j["validation"] = validation;
  j["test"] = test;
  j["fingerprint"] = fingerprint;
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

SplitManifest SplitManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read manifest '" + path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    SplitManifest m;
    m.dataset = j.at("dataset").get<std::string>();
    m.positive_rule = j.at("positive_rule").get<std::string>();
    m.root_seed = j.at("root_seed").get<std::uint64_t>();
    m.split_seed = j.at("split_seed").get<std::uint64_t>();
    m.eval_seed = j.at("eval_seed").get<std::uint64_t>();
    for (int k = 0; k < 3; ++k) m.ratios[k] = j.at("ratios").at(k).get<double>();
    m.num_records = j.at("num_records").get<std::size_t>();
    m.malformed = j.at("malformed_lines").get<std::size_t>();
    m.num_users = j.at("num_users").get<std::size_t>();
    m.num_items = j.at("num_items").get<std::size_t>();
    m.num_positives = j.at("num_positives").get<std::size_t>();
    m.train = j.at("train").get<std::size_t>();
    m.validation = j.at("validation").get<std::size_t>();
    m.test = j.at("test").get<std::size_t>();
    m.fingerprint = j.at("fingerprint").get<std::uint64_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt manifest '" + path.string() + "': " + e.what());
  }
}

}  // namespace hncr::data
