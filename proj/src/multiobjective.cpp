#include "coevo/multiobjective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coevo {

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  return a.primary >= b.primary && a.secondary >= b.secondary &&
         (a.primary > b.primary || a.secondary > b.secondary);
}

namespace {

std::vector<std::size_t> front_of(std::span<const ObjectiveVector> objectives,
                                  std::vector<std::size_t> candidates, bool sort_by_secondary) {
  std::vector<std::size_t> front;
  if (candidates.empty()) return front;
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t i, std::size_t j) {
    const auto& a = objectives[i];
    const auto& b = objectives[j];
    if (a.primary != b.primary) return a.primary > b.primary;
    if (a.secondary != b.secondary) return a.secondary > b.secondary;
    return i < j;
  });
  front.push_back(candidates.front());
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const std::size_t i = candidates[k];
    if (objectives[i].secondary > objectives[front.back()].secondary) front.push_back(i);
  }
  if (sort_by_secondary) {
    std::stable_sort(front.begin(), front.end(), [&](std::size_t i, std::size_t j) {
      return objectives[i].secondary > objectives[j].secondary;
    });
  }
  return front;
}

}  // namespace

std::vector<std::size_t> pareto_front(std::span<const ObjectiveVector> objectives,
                                      bool sort_by_secondary) {
  std::vector<std::size_t> all(objectives.size());
  std::iota(all.begin(), all.end(), 0);
  return front_of(objectives, std::move(all), sort_by_secondary);
}

std::vector<std::vector<std::size_t>> pareto_fronts(std::span<const ObjectiveVector> objectives,
                                                    bool sort_by_secondary) {
  std::vector<std::size_t> remaining(objectives.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<std::vector<std::size_t>> fronts;
  while (!remaining.empty()) {
    auto front = front_of(objectives, remaining, sort_by_secondary);
    std::vector<bool> taken(objectives.size(), false);
    for (auto i : front) taken[i] = true;
    std::erase_if(remaining, [&](std::size_t i) { return taken[i]; });
    fronts.push_back(std::move(front));
  }
  return fronts;
}

std::vector<std::size_t> rank_by_fronts(std::span<const ObjectiveVector> objectives,
                                        bool sort_by_secondary) {
  std::vector<std::size_t> order;
  order.reserve(objectives.size());
  for (auto& front : pareto_fronts(objectives, sort_by_secondary))
    order.insert(order.end(), front.begin(), front.end());
  return order;
}

std::vector<std::size_t> rank_by_primary(std::span<const ObjectiveVector> objectives) {
  std::vector<std::size_t> order(objectives.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return objectives[i].primary > objectives[j].primary;
  });
  return order;
}

std::size_t survivors_after_truncation(std::size_t count, double truncation_fraction) {
  if (count == 0) return 0;
  const auto removed = static_cast<std::size_t>(std::floor(static_cast<double>(count) * truncation_fraction));
  return std::max<std::size_t>(1, count - std::min(removed, count));
}

bool front_weakly_dominates(std::span<const ObjectiveVector> a, std::span<const ObjectiveVector> b) {
  return std::all_of(b.begin(), b.end(), [&](const ObjectiveVector& q) {
    return std::any_of(a.begin(), a.end(), [&](const ObjectiveVector& p) {
      return p.primary >= q.primary && p.secondary >= q.secondary;
    });
  });
}

}  // namespace coevo
