#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace meandim {

/// Point of {-1,+1}^n.
class SpinVector {
 public:
  explicit SpinVector(std::vector<int> bits);
  /// Vertex with bit i of `mask` set iff coordinate i is -1.
  static SpinVector from_mask(std::uint64_t mask, int n);

  int n() const noexcept { return static_cast<int>(bits_.size()); }
  int operator[](int i) const { return bits_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& bits() const noexcept { return bits_; }
  std::uint64_t to_mask() const noexcept;

 private:
  std::vector<int> bits_;
};

/// Subset u of {0..n-1}, bit i set iff i ∈ u.
struct SubsetMask {
  std::uint64_t mask = 0;
  int degree() const noexcept { return __builtin_popcountll(mask); }
  bool contains(int i) const noexcept { return (mask >> i) & 1U; }
};

/// Values of f at every vertex of the hypercube. Entry x holds f at the vertex
/// whose coordinate i equals -1 iff bit i of x is set.
using VertexTable = std::vector<double>;

/// Fourier (Walsh) coefficients, indexed by subset mask.
struct FourierSpectrum {
  int n = 0;
  std::vector<double> coeffs;

  double operator[](std::uint64_t u) const { return coeffs[u]; }
  /// Reconstructed function value at a vertex.
  double evaluate(std::uint64_t vertex) const;
};

struct DegreeProfile {
  double variance = 0.0;
  std::vector<double> contributions;  // c_k for k = 1..n, stored at index k-1
  std::optional<double> mean_dimension;  // empty when the variance vanishes
};

inline constexpr int kMaxTransformDim = 24;
inline constexpr int kMaxAnovaDim = 16;

/// Tabulates f over all 2^n vertices.
VertexTable tabulate(int n, const std::function<double(const SpinVector&)>& f);

/// Forward transform with the uniform-measure normalisation.
FourierSpectrum walsh_hadamard(const VertexTable& f);
/// Inverse of walsh_hadamard.
VertexTable inverse_walsh_hadamard(const FourierSpectrum& spec);

/// Unnormalised in-place butterfly; applying it twice multiplies by 2^n.
void fwht_inplace(std::vector<double>& a);

DegreeProfile degree_profile(const FourierSpectrum& spec);

/// ANOVA component f_u evaluated at the assignment `x_u`, given as a full
/// vertex mask from which only the bits in u are read.
double anova_component(const VertexTable& f, SubsetMask u, std::uint64_t x_u);

/// Full ANOVA component f_u as a vertex table (depends only on bits in u).
VertexTable anova_component_table(const VertexTable& f, SubsetMask u);

/// Mean dimension from the ANOVA variances, without a Fourier transform.
std::optional<double> exact_md_via_anova(const VertexTable& f);

/// tau_i^2 = E[(f(x) - f(x with bit i flipped))^2] / 4, by enumeration.
std::vector<double> exact_influences(const VertexTable& f);

int table_dimension(std::size_t size);

void write_vertex_table_csv(const std::string& path, const VertexTable& f);
VertexTable read_vertex_table_csv(const std::string& path);

}  // namespace meandim
