#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "traitlab/domain.hpp"
#include "traitlab/microlm.hpp"

namespace traitlab::lora {

// Low-rank update for one projection: W' = W + (alpha / rank) * B * A.
// B starts at zero, so a fresh adapter is a no-op. dropout_rate is kept
// for fidelity with trained checkpoints but is inert at inference.
struct LoraAdapter {
  std::string target;  // one of microlm::kProjectionNames
  Eigen::MatrixXd a;   // (rank, d_in)
  Eigen::MatrixXd b;   // (d_out, rank)
  int rank = 0;
  double alpha = 0.0;
  double dropout_rate = 0.0;

  double scale() const { return alpha / static_cast<double>(rank); }
};

// A seeded from the pinned generator, uniform in (-1/sqrt(d_in), 1/sqrt(d_in));
// B all zeros. Throws RankTooLarge when rank exceeds min(d_out, d_in).
LoraAdapter make_adapter(int d_out, int d_in, int rank, double alpha, std::uint64_t seed,
                         double dropout_rate = 0.1);

Eigen::MatrixXd effective_weight(const Eigen::MatrixXd& weight, const LoraAdapter& adapter);

struct AdapterSet {
  TraitLabel trait = TraitLabel::Openness;
  // keyed by (layer index, projection name)
  std::map<std::pair<int, std::string>, LoraAdapter> entries;
};

// New model with every targeted weight replaced by its effective weight.
// Forwards on the merged model match attached forwards within float noise.
microlm::Model merge(const microlm::Model& model, const AdapterSet& adapters);

// Projection hook computing the low-rank path ((x A^T) B^T, scaled) on top
// of the base projection, without materializing merged weights.
microlm::ProjectionHook attach(const AdapterSet& adapters);

// Versioned binary with a per-target shape table, plus a sibling
// "<path>.manifest.txt" listing trait, rank, alpha and targets.
void save_adapters(const std::filesystem::path& path, const AdapterSet& adapters);
AdapterSet load_adapters(const std::filesystem::path& path);

}  // namespace traitlab::lora
