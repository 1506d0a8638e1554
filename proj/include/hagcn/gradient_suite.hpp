#pragma once

#include "hagcn/autodiff.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hagcn {

struct GradientCase {
  std::string name;
  GradCheckReport report;
};

/// Finite-difference checks (ε = 1e-6, relative tolerance 1e-4) of every
/// differentiable op, the HA layer in each gate mode, a full classifier with
/// gconv{1,2,3}, fc, ReLU and softmax/cross-entropy in both gate variants, a
/// graph regressor with readout and the VAE loss.
std::vector<GradientCase> run_gradient_suite(std::uint64_t seed = 0);

}  // namespace hagcn
