#include "traitlab/steering.hpp"

#include <nlohmann/json.hpp>

#include "traitlab/format.hpp"
#include "traitlab/io.hpp"
#include "traitlab/version.hpp"

namespace traitlab::steering {

namespace {

using nlohmann::json;

std::string vector_id(TraitLabel trait, LayerSite site, const Eigen::VectorXd& values) {
  std::uint64_t h = fnv1a64(values.data(), static_cast<std::size_t>(values.size()) * sizeof(double));
  return std::string(to_string(trait)) + "-L" + std::to_string(site.layer) + "-" +
         to_hex(h).substr(8);
}

SteeringVector normalized_direction(TraitLabel trait, LayerSite site, Eigen::VectorXd raw) {
  const double raw_norm = raw.norm();
  if (raw_norm < kDegenerateTol) {
    throw DegenerateDirection("direction magnitude " + format_double(raw_norm) +
                              " below tolerance");
  }
  SteeringVector v;
  v.trait = trait;
  v.site = site;
  v.values = raw / raw_norm;
  v.norm = raw_norm;
  v.id = vector_id(trait, site, v.values);
  return v;
}

}  // namespace

ActivationSet set_from_batch(const microlm::ActivationBatch& batch, TraitLabel trait,
                             ActivationSet::Polarity polarity, LayerSite site) {
  std::vector<const Eigen::VectorXd*> rows;
  for (const auto& rec : batch.records) {
    if (rec.layer == site.layer) rows.push_back(&rec.values);
  }
  ActivationSet set;
  set.trait = trait;
  set.polarity = polarity;
  set.vectors.resize(static_cast<Eigen::Index>(rows.size()), batch.d_model);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    set.vectors.row(static_cast<Eigen::Index>(i)) = rows[i]->transpose();
  }
  return set;
}

SteeringVector compute_steering_vector(const ActivationSet& pos, const ActivationSet& neg,
                                       LayerSite site) {
  SteeringVector v = normalized_direction(pos.trait, site, mean_difference(pos.vectors, neg.vectors));
  v.provenance.n_positive = static_cast<int>(pos.size());
  v.provenance.n_negative = static_cast<int>(neg.size());
  return v;
}

SteeringVector contrast_direction(const ActivationSet& set_a, const ActivationSet& set_b,
                                  LayerSite site) {
  SteeringVector v =
      normalized_direction(set_a.trait, site, mean_difference(set_a.vectors, set_b.vectors));
  v.provenance.n_positive = static_cast<int>(set_a.size());
  v.provenance.n_negative = static_cast<int>(set_b.size());
  return v;
}

SteeringVector compose(const SteeringVector& base, const SteeringVector& contrast,
                       double weight) {
  if (base.values.size() != contrast.values.size()) {
    throw DimensionMismatch("composed vectors have different dims");
  }
  SteeringVector v = normalized_direction(base.trait, base.site,
                                          base.values + weight * contrast.values);
  v.provenance.n_positive = base.provenance.n_positive;
  v.provenance.n_negative = base.provenance.n_negative;
  v.provenance.purified = base.provenance.purified || contrast.provenance.purified;
  v.provenance.purify_threshold = base.provenance.purify_threshold;
  v.provenance.composed_from = std::make_pair(base.id, contrast.id);
  return v;
}

Eigen::VectorXd apply_steering(const Eigen::VectorXd& hidden, const SteeringVector& v,
                               double strength) {
  if (hidden.size() != v.values.size()) {
    throw DimensionMismatch("hidden dim " + std::to_string(hidden.size()) + " vs vector dim " +
                            std::to_string(v.values.size()));
  }
  return hidden + strength * v.values;
}

void save_vector(const std::filesystem::path& path, const SteeringVector& v) {
  json j;
  j["toolkit_version"] = kToolkitVersion;
  j["trait"] = std::string(to_string(v.trait));
  j["layer"] = v.site.layer;
  j["site"] = std::string(kSiteTag);
  j["strength"] = v.strength;
  j["dim"] = v.values.size();
  j["norm"] = v.norm;
  j["id"] = v.id;
  // full-precision decimal strings so reloads are bit-exact
  std::vector<std::string> values;
  values.reserve(static_cast<std::size_t>(v.values.size()));
  for (Eigen::Index i = 0; i < v.values.size(); ++i) values.push_back(format_double(v.values(i)));
  j["values"] = values;
  json prov;
  prov["n_positive"] = v.provenance.n_positive;
  prov["n_negative"] = v.provenance.n_negative;
  prov["purified"] = v.provenance.purified;
  if (v.provenance.purify_threshold) prov["purify_threshold"] = *v.provenance.purify_threshold;
  if (v.provenance.composed_from) {
    prov["composed_from"] = {v.provenance.composed_from->first, v.provenance.composed_from->second};
  }
  j["provenance"] = prov;
  atomic_write_file(path, j.dump(2) + "\n");
}

SteeringVector load_vector(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("bad vector file " + path.string() + ": " + e.what());
  }
  try {
    SteeringVector v;
    v.trait = parse_trait(j.at("trait").get<std::string>());
    v.site = LayerSite{j.at("layer").get<int>()};
    v.strength = j.at("strength").get<double>();
    v.norm = j.at("norm").get<double>();
    v.id = j.at("id").get<std::string>();
    const auto& values = j.at("values");
    v.values.resize(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      v.values(static_cast<Eigen::Index>(i)) = parse_double(values[i].get<std::string>());
    }
    if (j.at("dim").get<Eigen::Index>() != v.values.size()) {
      throw ParseError("vector file dim field disagrees with values length");
    }
    const auto& prov = j.at("provenance");
    v.provenance.n_positive = prov.at("n_positive").get<int>();
    v.provenance.n_negative = prov.at("n_negative").get<int>();
    v.provenance.purified = prov.at("purified").get<bool>();
    if (prov.contains("purify_threshold")) {
      v.provenance.purify_threshold = prov.at("purify_threshold").get<double>();
    }
    if (prov.contains("composed_from")) {
      v.provenance.composed_from = std::make_pair(prov.at("composed_from")[0].get<std::string>(),
                                                  prov.at("composed_from")[1].get<std::string>());
    }
    return v;
  } catch (const json::exception& e) {
    throw ParseError("bad vector file " + path.string() + ": " + e.what());
  }
}

}  // namespace traitlab::steering
