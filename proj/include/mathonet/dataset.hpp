#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mathonet {

// Row-major sample matrix: K rows of n_in inputs and n_out targets.
struct Dataset {
  int n_in = 0;
  int n_out = 0;
  std::vector<double> X;  // K * n_in
  std::vector<double> Y;  // K * n_out

  // provenance
  std::string system;
  double dt = 0.0;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  std::string meta_json;  // extra generator metadata, serialized

  std::size_t rows() const { return n_in > 0 ? X.size() / static_cast<std::size_t>(n_in) : 0; }
  std::span<const double> x_row(std::size_t r) const {
    return {X.data() + r * static_cast<std::size_t>(n_in), static_cast<std::size_t>(n_in)};
  }
  std::span<const double> y_row(std::size_t r) const {
    return {Y.data() + r * static_cast<std::size_t>(n_out), static_cast<std::size_t>(n_out)};
  }
};

}  // namespace mathonet
