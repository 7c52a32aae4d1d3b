#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meandim/activation.hpp"

namespace meandim {

/// Overlaps of the ridge solution written as a trace over the spectrum of the
/// feature Gram matrix F^T F / D (N eigenvalues, zeros included).
struct SpectralResult {
  double q_d = 0.0;
  double Q_d = 0.0;
  double bmd = 0.0;
  std::optional<std::string> warning;
};

struct SpectralOptions {
  /// E[teacher(x) . x_1]^2 scale of the label/input correlation; 2/pi for a sign teacher.
  double signal_power = 0.6366197723675814;
  int mp_nodes = 400;
};

/// Eigenvalues of F^T F / D for a D x N standard normal F, D = round(alpha_D N).
std::vector<double> sampled_spectrum(double alpha_D, int N, std::uint64_t seed);

/// Traces over an explicit eigenvalue sample. `lambda` is the per-sample ridge
/// strength (the replica lambda divided by alpha).
SpectralResult spectral_ols(double alpha_D, double lambda, const KappaSet& k, const std::vector<double>& spectrum,
                            const SpectralOptions& opt = {});

/// Same traces under the Marchenko–Pastur law with ratio 1/alpha_D; the atom at 0
/// (mass 1 - alpha_D when alpha_D < 1) contributes nothing to either trace.
SpectralResult spectral_ols_mp(double alpha_D, double lambda, const KappaSet& k, const SpectralOptions& opt = {});

}  // namespace meandim
