#pragma once

// Rating ingestion, implicit-feedback conversion, splitting, negative sampling
// and the sparse interaction matrix.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hncr::data {

enum class Side { kUser, kItem };
std::string_view to_string(Side side) noexcept;
Side parse_side(std::string_view s);

struct RatingRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
};

enum class Delimiter { kAuto, kTab, kComma };

struct LoadResult {
  std::vector<RatingRecord> records;
  std::size_t lines = 0;      // non-blank lines seen, header included
  std::size_t malformed = 0;  // skipped lines
  bool header_skipped = false;
  std::vector<std::string> warnings;
};

/// Parses "user item rating" lines separated by tab or comma. A first line whose
/// rating field is not numeric is treated as a header. More than 1% malformed
/// data lines throws InputError.
LoadResult parse_ratings(std::istream& in, Delimiter delim = Delimiter::kAuto);
LoadResult load_ratings(const std::filesystem::path& path, Delimiter delim = Delimiter::kAuto);

/// Which ratings count as positive implicit feedback.
struct PositiveRule {
  std::optional<double> min_rating;  // empty: every observed rating is positive

  bool accepts(double rating) const noexcept { return !min_rating || rating >= *min_rating; }
  std::string describe() const;
  static PositiveRule parse(std::string_view s);
};

struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

/// Bijection between original string ids and dense indices.
class IdIndex {
 public:
  std::uint32_t intern(const std::string& id);
  std::optional<std::uint32_t> find(const std::string& id) const;
  const std::string& name(std::uint32_t index) const { return names_.at(index); }
  std::size_t size() const noexcept { return names_.size(); }
  std::span<const std::string> names() const noexcept { return names_; }
  /// Order-sensitive hash of the id list, used to detect index mismatches.
  std::uint64_t fingerprint() const noexcept;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct InteractionDataset {
  IdIndex users;
  IdIndex items;
  std::vector<Interaction> positives;  // sorted, unique
  PositiveRule rule;

  std::size_t num_users() const noexcept { return users.size(); }
  std::size_t num_items() const noexcept { return items.size(); }
  std::uint64_t fingerprint() const noexcept;
};

/// Dense ids follow first appearance; records that fail the rule still enter the index.
InteractionDataset to_implicit(std::span<const RatingRecord> records, const PositiveRule& rule);

struct SplitConfig {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Split {
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
};

/// Shuffles with the seed and cuts at round(n * ratio). Each part is returned sorted.
Split split_dataset(std::span<const Interaction> positives, const SplitConfig& config);

/// Sparse binary matrix Y with row (user) and column (item) adjacency.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  InteractionMatrix(std::size_t num_users, std::size_t num_items, std::span<const Interaction> pairs);

  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t nnz() const noexcept { return user_items_.size(); }
  /// Sorted item ids of a user (the set I_u).
  std::span<const std::uint32_t> items_of(std::uint32_t user) const;
  /// Sorted user ids of an item (the set I_v).
  std::span<const std::uint32_t> users_of(std::uint32_t item) const;
  std::span<const std::uint32_t> neighbors(Side side, std::uint32_t node) const;
  std::size_t count(Side side) const noexcept { return side == Side::kUser ? num_users_ : num_items_; }
  bool contains(std::uint32_t user, std::uint32_t item) const;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<std::size_t> user_offsets_{0};
  std::vector<std::uint32_t> user_items_;
  std::vector<std::size_t> item_offsets_{0};
  std::vector<std::uint32_t> item_users_;
};

InteractionMatrix build_interaction_matrix(std::span<const Interaction> train, std::size_t num_users,
                                           std::size_t num_items);

struct LabeledPair {
  Interaction pair;
  int label = 0;
};

struct SampledEvaluation {
  std::vector<LabeledPair> pairs;  // grouped by user: positives, then negatives
  std::vector<std::string> warnings;
};

/// For each user in `split`, draws as many negatives as the user has positives there,
/// uniformly without replacement from items the user never interacted with in `all`.
SampledEvaluation negative_sample(std::span<const Interaction> split, const InteractionMatrix& all,
                                  std::uint64_t seed);

/// Uniform sample of up to `count` distinct items absent from `excluded` (sorted).
std::vector<std::uint32_t> sample_unrated(std::span<const std::uint32_t> excluded, std::size_t num_items,
                                          std::size_t count, std::uint64_t seed);

/// (degree, count) pairs in ascending degree; nodes with degree zero are omitted.
std::vector<std::pair<std::size_t, std::size_t>> degree_histogram(const InteractionMatrix& y, Side side);
void write_histogram_csv(const std::filesystem::path& path,
                         std::span<const std::pair<std::size_t, std::size_t>> histogram);

/// Seeds and counts of a prepared dataset, written as JSON next to run artifacts.
struct SplitManifest {
  std::string dataset;
  std::string positive_rule;
  std::uint64_t root_seed = 0;
  std::uint64_t split_seed = 0;
  std::uint64_t eval_seed = 0;
  double ratios[3] = {0.6, 0.2, 0.2};
  std::size_t num_records = 0;
  std::size_t malformed = 0;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_positives = 0;
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  std::uint64_t fingerprint = 0;

  void write(const std::filesystem::path& path) const;
  static SplitManifest read(const std::filesystem::path& path);
};

}  // namespace hncr::data
