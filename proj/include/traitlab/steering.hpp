#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "traitlab/domain.hpp"
#include "traitlab/errors.hpp"
#include "traitlab/microlm.hpp"

namespace traitlab::steering {

// Unnormalized direction magnitudes below this are treated as degenerate.
inline constexpr double kDegenerateTol = 1e-12;

struct Provenance {
  int n_positive = 0;
  int n_negative = 0;
  bool purified = false;
  std::optional<double> purify_threshold;
  std::optional<std::pair<std::string, std::string>> composed_from;
};

// A unit-norm direction at one layer site. `norm` keeps the magnitude of
// the raw (pre-normalization) difference for provenance; `values` always
// has unit length. `strength` is the calibrated scale, 0 until calibrated.
struct SteeringVector {
  TraitLabel trait = TraitLabel::Openness;
  LayerSite site;
  Eigen::VectorXd values;
  double norm = 0.0;
  double strength = 0.0;
  Provenance provenance;
  std::string id;
};

// Per-example pooled activations for one trait polarity, one row each.
struct ActivationSet {
  TraitLabel trait = TraitLabel::Openness;
  enum class Polarity { High, Low } polarity = Polarity::High;
  Eigen::MatrixXd vectors;  // (n_examples, d_model)

  Eigen::Index size() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

// Rows of an activation batch for one site, in record order.
ActivationSet set_from_batch(const microlm::ActivationBatch& batch, TraitLabel trait,
                             ActivationSet::Polarity polarity, LayerSite site);

// Normalized mean difference between sets of row vectors. Accepts any
// dense expression, so callers can pass blocks or maps directly.
template <typename DerivedP, typename DerivedN>
Eigen::VectorXd mean_difference(const Eigen::MatrixBase<DerivedP>& pos,
                                const Eigen::MatrixBase<DerivedN>& neg) {
  if (pos.rows() == 0 || neg.rows() == 0) throw EmptySet("activation set is empty");
  if (pos.cols() != neg.cols()) {
    throw DimensionMismatch("activation dims differ: " + std::to_string(pos.cols()) + " vs " +
                            std::to_string(neg.cols()));
  }
  return pos.colwise().mean().transpose() - neg.colwise().mean().transpose();
}

// Direction from contrastive activations: normalize(mean(pos) - mean(neg)).
SteeringVector compute_steering_vector(const ActivationSet& pos, const ActivationSet& neg,
                                       LayerSite site);

// Same contract with two arbitrary sets (e.g. one trait vs another).
SteeringVector contrast_direction(const ActivationSet& set_a, const ActivationSet& set_b,
                                  LayerSite site);

// Keeps items with confidence >= threshold, order preserved. Empty output
// is allowed; n_dropped lets the caller warn.
template <typename T>
struct Purified {
  std::vector<std::pair<T, double>> kept;
  std::size_t n_dropped = 0;
};

template <typename T>
Purified<T> purify(const std::vector<std::pair<T, double>>& examples, double threshold) {
  if (threshold < 0.0 || threshold > 1.0) {
    throw InvalidArgument("purify threshold must be in [0,1]");
  }
  Purified<T> out;
  for (const auto& item : examples) {
    if (item.second >= threshold) {
      out.kept.push_back(item);
    } else {
      ++out.n_dropped;
    }
  }
  return out;
}

// Normalized weighted sum of two unit directions. The result's strength
// is left at 0: composed vectors must be re-calibrated.
SteeringVector compose(const SteeringVector& base, const SteeringVector& contrast,
                       double weight = 1.0);

// hidden + strength * v.values; pure, the model installs it as a hook.
Eigen::VectorXd apply_steering(const Eigen::VectorXd& hidden, const SteeringVector& v,
                               double strength);

// Full-precision structured text record; round-trips bit-exactly.
void save_vector(const std::filesystem::path& path, const SteeringVector& v);
SteeringVector load_vector(const std::filesystem::path& path);

}  // namespace traitlab::steering
