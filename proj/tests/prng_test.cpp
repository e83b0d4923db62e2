#include <gtest/gtest.h>

#include <json.hpp>

#include "safesample/prng.hpp"
#include "safesample/sampler.hpp"
#include "support.hpp"

namespace {

using namespace safesample;
using nlohmann::json;

json vectors() {
  return json::parse(testkit::read_text(std::string(SAFESAMPLE_FIXTURES) + "/prng_vectors.json"));
}

std::uint64_t u64(const json& j) { return std::stoull(j.get<std::string>()); }

TEST(SplitMix64, RawOutputsMatchReference) {
  for (const auto& c : vectors()["splitmix64"]) {
    SplitMix64 rng(u64(c["seed"]));
    for (const auto& expected : c["outputs"]) EXPECT_EQ(rng.next(), u64(expected));
  }
}

TEST(SplitMix64, KnownFirstOutputForSeedZero) {
  // Published first output of splitmix64 from state 0.
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
}

TEST(SplitMix64, BoundedMatchesReference) {
  for (const auto& c : vectors()["bounded"]) {
    SplitMix64 rng(c["seed"].get<std::uint64_t>());
    const auto bound = u64(c["bound"]);
    for (const auto& expected : c["draws"]) EXPECT_EQ(rng.bounded(bound), u64(expected));
  }
}

TEST(SplitMix64, BoundedStaysInRange) {
  SplitMix64 rng(17);
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 7ULL, 1000ULL, (1ULL << 63) + 1}) {
    for (int i = 0; i < 200; ++i) EXPECT_LT(rng.bounded(bound), bound);
  }
}

TEST(PartialFisherYates, MatchesReference) {
  for (const auto& c : vectors()["partial_fisher_yates"]) {
    auto pool = c["pool"].get<std::vector<std::string>>();
    SplitMix64 rng(c["seed"].get<std::uint64_t>());
    const auto take =
        partial_fisher_yates(std::span<std::string>(pool), c["n"].get<std::size_t>(), rng);
    const std::vector<std::string> got(pool.begin(), pool.begin() + static_cast<long>(take));
    EXPECT_EQ(got, c["selected"].get<std::vector<std::string>>()) << c.dump();
  }
}

TEST(PartialFisherYates, RandomSamplerUsesTheSameStream) {
  for (const auto& c : vectors()["partial_fisher_yates"]) {
    const auto ids = c["pool"].get<std::vector<std::string>>();
    const auto n = c["n"].get<std::size_t>();
    if (ids.empty() || n == 0) continue;
    std::vector<SafetyExample> ex;
    for (const auto& id : ids) ex.push_back(testkit::make_example(id, {}));
    const Corpus pool(std::move(ex), {});
    const auto r = sample_random(pool, SamplingPlan::make(Method::random, n,
                                                          c["seed"].get<std::uint64_t>(), {}));
    EXPECT_EQ(r.selected_ids, c["selected"].get<std::vector<std::string>>());
    EXPECT_EQ(r.shortfall, n > ids.size() ? n - ids.size() : 0);
  }
}

TEST(PartialFisherYates, EmptyAndZero) {
  std::vector<int> none;
  SplitMix64 rng(1);
  EXPECT_EQ(partial_fisher_yates(std::span<int>(none), 3, rng), 0u);
  std::vector<int> some{1, 2, 3};
  EXPECT_EQ(partial_fisher_yates(std::span<int>(some), 0, rng), 0u);
  EXPECT_EQ(some, (std::vector<int>{1, 2, 3}));
}

TEST(PartialFisherYates, DrawIsAPermutationPrefix) {
  SplitMix64 rng(99);
  for (std::size_t n = 1; n < 30; ++n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    partial_fisher_yates(std::span<std::size_t>(v), n / 2 + 1, rng);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(sorted[i], i);
  }
}

}  // namespace
