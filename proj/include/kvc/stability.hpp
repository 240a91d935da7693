#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "kvc/numeric.hpp"
#include "kvc/protocol.hpp"
#include "kvc/verif_metrics.hpp"

namespace kvc {

struct StabilityResult {
  std::vector<double> eers;        // global EER per seed, in seed order
  double mean = 0.0;
  std::optional<double> stddev;    // sample (n - 1) deviation; absent for a single seed
};

using PlanScorer = std::function<std::vector<double>(const ComparisonPlan&)>;

/// Rebuilds the plan under each seed, scores it and reports the spread of
/// the global EER.
inline StabilityResult plan_stability_probe(const Dataset& dataset, std::span<const std::uint64_t> seeds,
                                            const PlanScorer& scorer) {
  StabilityResult out;
  for (const auto seed : seeds) {
    const auto plan = build_plan(dataset, seed);
    const auto profiles = aggregate(plan, scorer(plan));
    const auto pooled = pool(profiles);
    out.eers.push_back(eer(pooled.genuine, pooled.impostor()).rate);
  }
  if (out.eers.empty()) return out;
  out.mean = mean_of(out.eers);
  if (out.eers.size() > 1) {
    double ss = 0.0;
    for (const double e : out.eers) ss += (e - out.mean) * (e - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(out.eers.size() - 1));
  }
  return out;
}

}  // namespace kvc
