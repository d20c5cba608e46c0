#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hncr/data.hpp"
#include "hncr/error.hpp"
#include "test_util.hpp"

namespace {

using namespace hncr::data;

InteractionDataset dataset_from(const std::string& text, const PositiveRule& rule = {}) {
  std::istringstream in(text);
  const LoadResult r = parse_ratings(in);
  return to_implicit(r.records, rule);
}

std::vector<Interaction> grid(std::uint32_t users, std::uint32_t items) {
  std::vector<Interaction> out;
  for (std::uint32_t u = 0; u < users; ++u) {
    for (std::uint32_t i = 0; i < items; ++i) {
      if ((u + i) % 3 != 0) out.push_back({u, i});
    }
  }
  return out;
}

TEST(Data, ParsesWellFormedLines) {
  std::istringstream in("u1\tv1\t5\nu1\tv2\t3\nu2\tv1\t4\n");
  const LoadResult r = parse_ratings(in);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.records[1].item_id, "v2");
  EXPECT_EQ(r.records[1].rating, 3.0);
  EXPECT_EQ(r.malformed, 0u);
  EXPECT_FALSE(r.header_skipped);
}

TEST(Data, CommaAndHeader) {
  std::istringstream in("user,item,rating\na,x,1\nb,y,2.5\n");
  const LoadResult r = parse_ratings(in);
  EXPECT_TRUE(r.header_skipped);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[1].rating, 2.5);
}

TEST(Data, MalformedLineIsSkippedAndCounted) {
  std::string text;
  for (int n = 0; n < 150; ++n) text += "u" + std::to_string(n) + "\tv1\t4\n";
  text += "u1\tv1\tabc\n";
  for (int n = 0; n < 50; ++n) text += "w" + std::to_string(n) + "\tv2\t4\n";
  std::istringstream in(text);
  const LoadResult r = parse_ratings(in);
  EXPECT_EQ(r.records.size(), 200u);
  EXPECT_EQ(r.malformed, 1u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Data, TooManyMalformedLinesAbort) {
  std::istringstream in("u1\tv1\t5\nu2\tv1\tabc\nu3\tv2\t4\n");
  EXPECT_THROW(parse_ratings(in), hncr::InputError);
}

TEST(Data, EmptyInputWarns) {
  std::istringstream in("");
  const LoadResult r = parse_ratings(in);
  EXPECT_TRUE(r.records.empty());
  ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(Data, MissingFileThrows) {
  EXPECT_THROW(load_ratings("/nonexistent/ratings.tsv"), hncr::InputError);
}

TEST(Data, ImplicitConversion) {
  const auto all = dataset_from("a\tx\t1\na\ty\t2\nb\tx\t3\nc\tz\t4\nd\tz\t5\n");
  EXPECT_EQ(all.positives.size(), 5u);
  const auto dup = dataset_from("a\tx\t1\na\tx\t4\n");
  EXPECT_EQ(dup.positives.size(), 1u);
  const auto thr = dataset_from("a\tx\t3\na\ty\t4\nb\tx\t5\n", PositiveRule::parse(">=4"));
  EXPECT_EQ(thr.positives.size(), 2u);
  // Users whose ratings all fail the rule still get an index.
  EXPECT_EQ(thr.num_users(), 2u);
}

TEST(Data, PositiveRuleParsing) {
  EXPECT_FALSE(PositiveRule::parse("all").min_rating.has_value());
  EXPECT_EQ(*PositiveRule::parse(">=3.5").min_rating, 3.5);
  EXPECT_EQ(PositiveRule::parse(">=4").describe(), ">=4");
  EXPECT_THROW(PositiveRule::parse("positive"), hncr::InputError);
}

TEST(Data, IdIndexRoundTrip) {
  IdIndex idx;
  const std::vector<std::string> names = {"u9", "u3", "alpha", "u3", "beta"};
  for (const auto& n : names) idx.intern(n);
  ASSERT_EQ(idx.size(), 4u);
  for (std::uint32_t i = 0; i < idx.size(); ++i) EXPECT_EQ(*idx.find(idx.name(i)), i);
  EXPECT_FALSE(idx.find("missing").has_value());
  IdIndex other;
  for (const char* n : {"u3", "u9", "alpha", "beta"}) other.intern(n);
  EXPECT_NE(idx.fingerprint(), other.fingerprint());
}

TEST(Data, SplitSizesAndDeterminism) {
  std::vector<Interaction> ten;
  for (std::uint32_t i = 0; i < 10; ++i) ten.push_back({i, i});
  const SplitConfig cfg{0.6, 0.2, 0.2, 42};
  const Split s = split_dataset(ten, cfg);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.validation.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  const Split again = split_dataset(ten, cfg);
  EXPECT_EQ(s.train, again.train);
  EXPECT_EQ(s.validation, again.validation);
  EXPECT_EQ(s.test, again.test);
  EXPECT_THROW(split_dataset(ten, SplitConfig{0.5, 0.2, 0.2, 1}), hncr::InputError);
}

TEST(Data, SplitPartitionsPositives) {
  const auto pos = grid(30, 40);
  const Split s = split_dataset(pos, SplitConfig{0.6, 0.2, 0.2, 9});
  std::vector<Interaction> merged;
  for (const auto* part : {&s.train, &s.validation, &s.test}) merged.insert(merged.end(), part->begin(), part->end());
  std::sort(merged.begin(), merged.end());
  EXPECT_EQ(merged, pos);  // disjoint and exhaustive
}

TEST(Data, InteractionMatrixLists) {
  const std::vector<Interaction> one = {{0, 1}};
  const InteractionMatrix y = build_interaction_matrix(one, 2, 3);
  ASSERT_EQ(y.items_of(0).size(), 1u);
  EXPECT_EQ(y.items_of(0)[0], 1u);
  ASSERT_EQ(y.users_of(1).size(), 1u);
  EXPECT_EQ(y.users_of(1)[0], 0u);
  EXPECT_TRUE(y.contains(0, 1));
  EXPECT_FALSE(y.contains(1, 1));

  const InteractionMatrix empty = build_interaction_matrix({}, 3, 4);
  EXPECT_EQ(empty.nnz(), 0u);
  for (std::uint32_t u = 0; u < 3; ++u) EXPECT_TRUE(empty.items_of(u).empty());
  EXPECT_THROW(build_interaction_matrix(one, 1, 1), hncr::InputError);
}

TEST(Data, NegativeSampling) {
  // User 0 has 3 positives among 10 items; user 1 touched every item.
  std::vector<Interaction> all_pos = {{0, 2}, {0, 5}, {0, 7}};
  for (std::uint32_t i = 0; i < 10; ++i) all_pos.push_back({1, i});
  const InteractionMatrix all = build_interaction_matrix(all_pos, 2, 10);
  const std::vector<Interaction> split = {{0, 2}, {0, 5}, {0, 7}, {1, 3}};
  const SampledEvaluation ev = negative_sample(split, all, 5);
  std::size_t neg0 = 0, neg1 = 0;
  for (const LabeledPair& p : ev.pairs) {
    if (p.label == 0) {
      (p.pair.user == 0 ? neg0 : neg1)++;
      EXPECT_FALSE(all.contains(p.pair.user, p.pair.item));
    }
  }
  EXPECT_EQ(neg0, 3u);
  EXPECT_EQ(neg1, 0u);
  EXPECT_EQ(ev.warnings.size(), 1u);

  const SampledEvaluation ev2 = negative_sample(split, all, 5);
  ASSERT_EQ(ev.pairs.size(), ev2.pairs.size());
  for (std::size_t n = 0; n < ev.pairs.size(); ++n) EXPECT_EQ(ev.pairs[n].pair, ev2.pairs[n].pair);
}

TEST(Data, NegativeSamplingBalancedOnLargerData) {
  const auto pos = grid(50, 60);
  const InteractionMatrix all = build_interaction_matrix(pos, 50, 60);
  const Split s = split_dataset(pos, SplitConfig{0.6, 0.2, 0.2, 3});
  const SampledEvaluation ev = negative_sample(s.test, all, 17);
  std::vector<int> balance(50, 0);
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const LabeledPair& p : ev.pairs) {
    balance[p.pair.user] += p.label ? 1 : -1;
    if (!p.label) {
      EXPECT_FALSE(all.contains(p.pair.user, p.pair.item));
      EXPECT_TRUE(seen.insert({p.pair.user, p.pair.item}).second);  // without replacement
    }
  }
  for (int b : balance) EXPECT_EQ(b, 0);
}

TEST(Data, SampleUnrated) {
  const std::vector<std::uint32_t> excluded = {1, 3, 4};
  const auto s = sample_unrated(excluded, 6, 10, 1);
  EXPECT_EQ(s.size(), 3u);  // only items 0, 2, 5 remain
  for (std::uint32_t i : s) EXPECT_FALSE(std::binary_search(excluded.begin(), excluded.end(), i));
  EXPECT_EQ(sample_unrated(excluded, 6, 2, 1), sample_unrated(excluded, 6, 2, 1));
}

TEST(Data, DegreeHistogram) {
  const std::vector<Interaction> pairs = {{0, 0}, {1, 1}};
  const auto h = degree_histogram(build_interaction_matrix(pairs, 2, 2), Side::kUser);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h[0], (std::pair<std::size_t, std::size_t>{1, 2}));
  EXPECT_TRUE(degree_histogram(build_interaction_matrix({}, 3, 3), Side::kItem).empty());

  const auto pos = grid(20, 25);
  const InteractionMatrix y = build_interaction_matrix(pos, 20, 25);
  for (Side side : {Side::kUser, Side::kItem}) {
    std::size_t total = 0;
    for (const auto& [deg, count] : degree_histogram(y, side)) total += deg * count;
    EXPECT_EQ(total, pos.size());
  }
}

TEST(Data, ManifestRoundTrip) {
  hncr::testing::TempDir dir("manifest");
  SplitManifest m;
  m.dataset = "ratings.tsv";
  m.positive_rule = ">=4";
  m.root_seed = 12;
  m.split_seed = 0xfeedfacecafebeefULL;
  m.num_users = 3;
  m.train = 7;
  m.fingerprint = 99;
  m.write(dir / "manifest.json");
  const SplitManifest r = SplitManifest::read(dir / "manifest.json");
  EXPECT_EQ(r.dataset, m.dataset);
  EXPECT_EQ(r.positive_rule, m.positive_rule);
  EXPECT_EQ(r.split_seed, m.split_seed);
  EXPECT_EQ(r.train, 7u);
  EXPECT_EQ(r.fingerprint, 99u);
  hncr::testing::write_file(dir / "bad.json", "{ not json");
  EXPECT_THROW(SplitManifest::read(dir / "bad.json"), hncr::InputError);
}

}  // namespace
