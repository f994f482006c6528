#include <cmath>
#include <numeric>

#include "coevo/coevolution.hpp"
#include "coevo/multiobjective.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace coevo;
using coevo::testing::brute_force_front;
using coevo::testing::points;
using coevo::testing::random_objectives;

namespace {

std::vector<ObjectiveVector> xy(std::initializer_list<std::pair<double, double>> pts) {
  std::vector<ObjectiveVector> v;
  for (const auto& [x, y] : pts) v.push_back({x, y, -y});
  return v;
}

}  // namespace

TEST_CASE("pareto front examples") {
  SUBCASE("mixed set") {
    const auto v = xy({{3, 1}, {2, 2}, {2, 1}, {1, 3}});
    CHECK(pareto_front(v) == std::vector<std::size_t>{0, 1, 3});
  }
  SUBCASE("single point") { CHECK(pareto_front(xy({{0.5, -10}})) == std::vector<std::size_t>{0}); }
  SUBCASE("duplicates collapse to one representative") {
    const auto v = xy({{2, 2}, {2, 2}});
    CHECK(pareto_front(v) == std::vector<std::size_t>{0});
    CHECK(pareto_fronts(v) == std::vector<std::vector<std::size_t>>{{0}, {1}});
  }
  SUBCASE("empty input") { CHECK(pareto_front({}).empty()); }
  SUBCASE("tied primary keeps only the better secondary") {
    const auto v = xy({{2, 1}, {2, 3}});
    CHECK(pareto_front(v) == std::vector<std::size_t>{1});
  }
  SUBCASE("optional secondary sort") {
    const auto v = xy({{3, 1}, {2, 2}, {1, 3}});
    CHECK(pareto_front(v, true) == std::vector<std::size_t>{2, 1, 0});
  }
}

TEST_CASE("pareto front equals the brute-force oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto v = random_objectives(rng);
    const auto front = pareto_front(v);
    REQUIRE(points(v, front) == brute_force_front(v));
    CHECK(front.size() == brute_force_front(v).size());
  }
}

TEST_CASE("front peeling") {
  SUBCASE("chain ranks in dominance order") {
    const auto v = xy({{2, 2}, {4, 4}, {1, 1}, {3, 3}});
    CHECK(rank_by_fronts(v) == std::vector<std::size_t>{1, 3, 0, 2});
    CHECK(pareto_fronts(v).size() == 4);
  }
  SUBCASE("antichain is one front in construction order") {
    const auto v = xy({{1, 4}, {3, 2}, {4, 1}, {2, 3}});
    const auto fronts = pareto_fronts(v);
    REQUIRE(fronts.size() == 1);
    CHECK(fronts[0] == std::vector<std::size_t>{2, 1, 3, 0});
  }
  SUBCASE("truncation arithmetic") {
    CHECK(survivors_after_truncation(8, 0.5) == 4);
    CHECK(survivors_after_truncation(10, 0.5) == 5);
    CHECK(survivors_after_truncation(1, 0.5) == 1);
    CHECK(survivors_after_truncation(0, 0.5) == 0);
  }
  SUBCASE("fronts partition the set and never rank a dominated point above its dominator") {
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto v = random_objectives(rng, 40);
      const auto fronts = pareto_fronts(v);
      CHECK(fronts.size() <= v.size());
      std::vector<int> seen(v.size(), 0);
      std::vector<std::size_t> position(v.size());
      std::size_t pos = 0;
      for (const auto& f : fronts)
        for (auto i : f) {
          ++seen[i];
          position[i] = pos++;
        }
      for (int s : seen) REQUIRE(s == 1);
      for (std::size_t a = 0; a < v.size(); ++a)
        for (std::size_t b = 0; b < v.size(); ++b)
          if (dominates(v[a], v[b])) REQUIRE(position[a] < position[b]);
    }
  }
}

TEST_CASE("assembled-network ranking") {
  auto networks_with = [](const std::vector<ObjectiveVector>& v) {
    std::vector<AssembledNetwork> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i].objectives = v[i];
    return out;
  };
  SUBCASE("equal objectives keep input order") {
    const std::vector<ObjectiveVector> v(5, ObjectiveVector::minimizing_secondary(0.5, 100));
    const auto order = rank_by_fronts(v);
    std::vector<std::size_t> identity(5);
    std::iota(identity.begin(), identity.end(), 0);
    CHECK(order == identity);
  }
  SUBCASE("ranking is a permutation and front 1 matches the oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      auto v = random_objectives(rng, 50);
      auto order = rank_by_fronts(v);
      std::sort(order.begin(), order.end());
      for (std::size_t i = 0; i < order.size(); ++i) REQUIRE(order[i] == i);
      const auto idx = rank_assembled_networks(networks_with(v));
      std::vector<std::size_t> first;
      for (std::size_t i = 0; i < idx.size(); ++i)
        if (idx[i] == 1) first.push_back(i);
      CHECK(points(v, first) == brute_force_front(v));
    }
  }
}

TEST_CASE("complexity objective") {
  CHECK(ObjectiveVector::minimizing_secondary(0.9, 1000).secondary == -1000);
  SUBCASE("smaller network wins a primary tie") {
    const std::vector<ObjectiveVector> v{ObjectiveVector::minimizing_secondary(0.8, 125000),
                                         ObjectiveVector::minimizing_secondary(0.8, 56000)};
    CHECK(rank_by_fronts(v) == std::vector<std::size_t>{1, 0});
  }
  SUBCASE("ranking is invariant under monotone rescaling of the secondary") {
    Rng rng(8);
    for (int trial = 0; trial < 300; ++trial) {
      auto v = random_objectives(rng, 30);
      std::vector<ObjectiveVector> logged;
      for (const auto& o : v) logged.push_back(ObjectiveVector::minimizing_secondary(o.primary, std::log1p(o.raw_secondary)));
      CHECK(rank_by_fronts(v) == rank_by_fronts(logged));
    }
  }
}

TEST_CASE("front dominance between runs") {
  const auto a = xy({{0.9, -10}, {0.5, -1}});
  const auto b = xy({{0.8, -20}, {0.4, -2}});
  CHECK(front_weakly_dominates(a, b));
  CHECK_FALSE(front_weakly_dominates(b, a));
  CHECK(front_weakly_dominates(a, a));
}
