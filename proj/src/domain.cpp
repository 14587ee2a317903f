#include "traitlab/domain.hpp"

#include "traitlab/errors.hpp"
#include "traitlab/format.hpp"

namespace traitlab {

MetricKind metric_kind(BenchmarkKind kind) {
  return kind == BenchmarkKind::BBQ ? MetricKind::AmbiguousBiasScore
                                    : MetricKind::AccuracyFraction;
}

double metric_min(BenchmarkKind kind) {
  return metric_kind(kind) == MetricKind::AccuracyFraction ? 0.0 : -100.0;
}

double metric_max(BenchmarkKind kind) {
  return metric_kind(kind) == MetricKind::AccuracyFraction ? 1.0 : 100.0;
}

std::string_view to_string(TraitLabel trait) {
  switch (trait) {
    case TraitLabel::Openness: return "openness";
    case TraitLabel::Conscientiousness: return "conscientiousness";
    case TraitLabel::Extraversion: return "extraversion";
    case TraitLabel::Agreeableness: return "agreeableness";
    case TraitLabel::Neuroticism: return "neuroticism";
  }
  return "";
}

std::string_view to_string(MethodLabel method) {
  switch (method) {
    case MethodLabel::ICL: return "icl";
    case MethodLabel::PEFT: return "peft";
    case MethodLabel::Steering: return "steering";
  }
  return "";
}

std::string_view to_string(BenchmarkKind kind) {
  switch (kind) {
    case BenchmarkKind::MMLU: return "mmlu";
    case BenchmarkKind::GAIA: return "gaia";
    case BenchmarkKind::BBQ: return "bbq";
  }
  return "";
}

std::string_view display_name(TraitLabel trait) {
  switch (trait) {
    case TraitLabel::Openness: return "Openness";
    case TraitLabel::Conscientiousness: return "Conscientiousness";
    case TraitLabel::Extraversion: return "Extraversion";
    case TraitLabel::Agreeableness: return "Agreeableness";
    case TraitLabel::Neuroticism: return "Neuroticism";
  }
  return "";
}

std::string_view display_name(MethodLabel method) {
  switch (method) {
    case MethodLabel::ICL: return "ICL";
    case MethodLabel::PEFT: return "PEFT";
    case MethodLabel::Steering: return "Steering";
  }
  return "";
}

std::string_view display_name(BenchmarkKind kind) {
  switch (kind) {
    case BenchmarkKind::MMLU: return "MMLU";
    case BenchmarkKind::GAIA: return "GAIA";
    case BenchmarkKind::BBQ: return "BBQ";
  }
  return "";
}

TraitLabel parse_trait(std::string_view text) {
  const std::string key = to_lower(trim(text));
  for (TraitLabel trait : kAllTraits) {
    if (key == to_string(trait)) return trait;
  }
  throw UnknownTrait("'" + std::string(text) + "' is not a Big Five trait");
}

MethodLabel parse_method(std::string_view text) {
  const std::string key = to_lower(trim(text));
  if (key == "ms") return MethodLabel::Steering;
  if (key == "lora") return MethodLabel::PEFT;
  for (MethodLabel method : kAllMethods) {
    if (key == to_string(method)) return method;
  }
  throw UnknownMethod("'" + std::string(text) + "' is not a manipulation method");
}

BenchmarkKind parse_benchmark(std::string_view text) {
  const std::string key = to_lower(trim(text));
  for (BenchmarkKind kind : kAllBenchmarks) {
    if (key == to_string(kind)) return kind;
  }
  throw UnknownBenchmark("'" + std::string(text) + "' is not a supported benchmark");
}

}  // namespace traitlab
