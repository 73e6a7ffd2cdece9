#pragma once

// Versioned text container for fitted models: a header, the model
// configuration, and named scalars/vectors/matrices written as hexadecimal
// floats so that a reload is bit-identical.

#include <string>

#include "bcam/estimator.hpp"

namespace bcam {

inline constexpr int kFitFormatVersion = 1;

struct SavedFit {
  int version = kFitFormatVersion;
  std::string config_text;
  FitResult fit;  // `fitted` is not stored; recompute from the likelihood
};

std::string serialize_fit(const std::string& config_text, const FitResult& fit);
SavedFit deserialize_fit(const std::string& text);

void save_fit(const std::string& path, const std::string& config_text, const FitResult& fit);
SavedFit load_fit(const std::string& path);

}  // namespace bcam
