#pragma once

#include <array>
#include <string>
#include <string_view>

namespace traitlab {

// Big Five trait labels, canonical OCEAN order.
enum class TraitLabel {
  Openness,
  Conscientiousness,
  Extraversion,
  Agreeableness,
  Neuroticism,
};

inline constexpr std::array<TraitLabel, 5> kAllTraits = {
    TraitLabel::Openness,     TraitLabel::Conscientiousness, TraitLabel::Extraversion,
    TraitLabel::Agreeableness, TraitLabel::Neuroticism,
};

enum class MethodLabel {
  ICL,
  PEFT,
  Steering,
};

inline constexpr std::array<MethodLabel, 3> kAllMethods = {
    MethodLabel::ICL,
    MethodLabel::PEFT,
    MethodLabel::Steering,
};

enum class BenchmarkKind {
  MMLU,
  GAIA,
  BBQ,
};

inline constexpr std::array<BenchmarkKind, 3> kAllBenchmarks = {
    BenchmarkKind::MMLU,
    BenchmarkKind::GAIA,
    BenchmarkKind::BBQ,
};

enum class MetricKind {
  AccuracyFraction,  // [0, 1]
  AmbiguousBiasScore,  // S_AMB, percentage points in [-100, 100]
};

MetricKind metric_kind(BenchmarkKind kind);
// Legal value range of a benchmark's metric.
double metric_min(BenchmarkKind kind);
double metric_max(BenchmarkKind kind);

// Identifier for the model under test. Open set: desk-scale substrates
// get derived ids, paper fixtures use "gemma-2" / "llama-3".
struct ModelLabel {
  std::string value;

  friend bool operator==(const ModelLabel&, const ModelLabel&) = default;
  friend auto operator<=>(const ModelLabel&, const ModelLabel&) = default;
};

// Hook point in a transformer: the post-attention layer-norm output of
// one layer. The site kind is fixed; only the layer index varies.
struct LayerSite {
  int layer = 0;

  friend bool operator==(const LayerSite&, const LayerSite&) = default;
  friend auto operator<=>(const LayerSite&, const LayerSite&) = default;
};

inline constexpr std::string_view kSiteTag = "post_attn_norm";

// Lowercase canonical strings; these are the forms every file format uses.
std::string_view to_string(TraitLabel trait);
std::string_view to_string(MethodLabel method);
std::string_view to_string(BenchmarkKind kind);

// Capitalized names for prompts and human-facing tables.
std::string_view display_name(TraitLabel trait);
std::string_view display_name(MethodLabel method);
std::string_view display_name(BenchmarkKind kind);

// Case/whitespace-insensitive; parse_method also accepts the aliases
// "ms" -> Steering and "lora" -> PEFT.
TraitLabel parse_trait(std::string_view text);
MethodLabel parse_method(std::string_view text);
BenchmarkKind parse_benchmark(std::string_view text);

}  // namespace traitlab
