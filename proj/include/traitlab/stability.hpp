#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "traitlab/domain.hpp"
#include "traitlab/evaluation.hpp"

namespace traitlab::stability {

// Composite stability of a pooled set of deltas, kept with its factors:
//   normalized_variance = min(population variance / 10000, 1)
//   normalized_range    = min((max - min) / 1000, 1)
//   consistency         = 1 / (1 + mean(|delta|))
//   score               = (1 - nv) * (1 - nr) * consistency
// Deltas stay in native benchmark units; the normalization constants
// absorb the scale gap between accuracy fractions and bias points.
struct StabilityScore {
  double score = 0.0;
  double normalized_variance = 0.0;
  double normalized_range = 0.0;
  double consistency = 0.0;
  std::size_t n_deltas = 0;
};

StabilityScore stability_score(const Eigen::Ref<const Eigen::ArrayXd>& deltas);
StabilityScore stability_score(const std::vector<double>& deltas);

enum class Level { Method, Personality, Combination };

std::string_view to_string(Level level);

struct RankedEntry {
  std::string category;
  StabilityScore score;
  int rank = 0;
};

// Pools deltas by method, by trait, or by (method, trait) pair, scores
// each pool, and ranks by descending score (ties by category name).
std::vector<RankedEntry> aggregate(Level level,
                                   const std::vector<evaluation::DeltaRecord>& records);

struct LevelRanking {
  Level level = Level::Method;
  std::vector<RankedEntry> entries;
};

// All three levels in order: method, personality, combination.
std::vector<LevelRanking> aggregate_all(const std::vector<evaluation::DeltaRecord>& records);

// Fixed-layout text table (level, category, score to 4 decimals, rank);
// byte-stable for fixed input. Header records the variance convention.
std::string render_report(const std::vector<LevelRanking>& rankings);

}  // namespace traitlab::stability
