#pragma once

#include <stdexcept>
#include <string>

namespace traitlab {

// Base class for every error the toolkit raises on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define TRAITLAB_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

// domain
TRAITLAB_DEFINE_ERROR(UnknownTrait);
TRAITLAB_DEFINE_ERROR(UnknownMethod);
TRAITLAB_DEFINE_ERROR(UnknownBenchmark);

// microlm
TRAITLAB_DEFINE_ERROR(InvalidConfig);
TRAITLAB_DEFINE_ERROR(EmptyInput);
TRAITLAB_DEFINE_ERROR(SequenceTooLong);
TRAITLAB_DEFINE_ERROR(DimensionMismatch);
TRAITLAB_DEFINE_ERROR(InvalidSite);

// lora
TRAITLAB_DEFINE_ERROR(RankTooLarge);
TRAITLAB_DEFINE_ERROR(UnknownTarget);

// steering
TRAITLAB_DEFINE_ERROR(EmptySet);
TRAITLAB_DEFINE_ERROR(DegenerateDirection);

// calibration
TRAITLAB_DEFINE_ERROR(InvalidGrid);
TRAITLAB_DEFINE_ERROR(ScorerFailure);

// dataset
TRAITLAB_DEFINE_ERROR(ParseError);
TRAITLAB_DEFINE_ERROR(ManifestMismatch);
TRAITLAB_DEFINE_ERROR(ProviderError);
TRAITLAB_DEFINE_ERROR(EmptyCompletion);
TRAITLAB_DEFINE_ERROR(MissingExemplar);

// evaluation
TRAITLAB_DEFINE_ERROR(MissingAnswers);
TRAITLAB_DEFINE_ERROR(NonAmbiguousItem);
TRAITLAB_DEFINE_ERROR(RangeError);
TRAITLAB_DEFINE_ERROR(CrossRunMismatch);
TRAITLAB_DEFINE_ERROR(ItemSetMismatch);

// stability
TRAITLAB_DEFINE_ERROR(NonFiniteInput);

// plumbing
TRAITLAB_DEFINE_ERROR(IoError);
TRAITLAB_DEFINE_ERROR(ConfigError);
TRAITLAB_DEFINE_ERROR(InvalidArgument);

#undef TRAITLAB_DEFINE_ERROR

}  // namespace traitlab
