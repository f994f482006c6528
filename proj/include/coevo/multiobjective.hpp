#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace coevo {

// Both objectives in maximize form; a minimized objective enters negated.
struct ObjectiveVector {
  double primary = 0.0;
  double secondary = 0.0;
  double raw_secondary = 0.0;

  static ObjectiveVector minimizing_secondary(double primary, double raw_secondary) {
    return {primary, -raw_secondary, raw_secondary};
  }
  bool operator==(const ObjectiveVector&) const = default;
};

// a >= b in both objectives and > in at least one.
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

// Indices into `objectives` forming the first Pareto front. Candidates are
// visited in descending primary order (ties: descending secondary, then
// index) and kept when their secondary strictly exceeds that of the last
// kept member, so exact duplicates collapse to one representative. With
// `sort_by_secondary` the front is re-sorted by descending secondary.
std::vector<std::size_t> pareto_front(std::span<const ObjectiveVector> objectives,
                                      bool sort_by_secondary = false);

// Successive fronts peeled from the whole set; together they partition the
// indices.
std::vector<std::vector<std::size_t>> pareto_fronts(std::span<const ObjectiveVector> objectives,
                                                    bool sort_by_secondary = false);

// Concatenation of the successive fronts: a full ranking, best first.
std::vector<std::size_t> rank_by_fronts(std::span<const ObjectiveVector> objectives,
                                        bool sort_by_secondary = false);

// Descending primary, stable for ties.
std::vector<std::size_t> rank_by_primary(std::span<const ObjectiveVector> objectives);

// Number of leading ranked members kept after removing the last fraction.
// At least one member survives a non-empty group.
std::size_t survivors_after_truncation(std::size_t count, double truncation_fraction);

// Every point of `b` is weakly dominated by (>= in both objectives) some
// point of `a`.
bool front_weakly_dominates(std::span<const ObjectiveVector> a, std::span<const ObjectiveVector> b);

}  // namespace coevo
