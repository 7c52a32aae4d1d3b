#include "meandim/boolfn.hpp"

#include <algorithm>
#include <cmath>

#include "meandim/csv.hpp"
#include "meandim/error.hpp"

namespace meandim {

namespace {

bool is_power_of_two(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

// Treat a spectrum as constant when its non-constant energy is lost in roundoff.
bool negligible_variance(double variance, double energy) {
  return !(variance > 1e-24 * energy) || variance == 0.0;
}

// Removes the coordinate stored at bit j of a compact table by averaging.
std::vector<double> average_out(const std::vector<double>& t, int j) {
  const std::size_t half = t.size() / 2;
  std::vector<double> out(half);
  const std::size_t low = (std::size_t{1} << j) - 1;
  for (std::size_t idx = 0; idx < half; ++idx) {
    const std::size_t base = ((idx & ~low) << 1) | (idx & low);
    out[idx] = 0.5 * (t[base] + t[base | (std::size_t{1} << j)]);
  }
  return out;
}

double mean_square(const std::vector<double>& t) {
  double s = 0.0;
  for (double v : t) s += v * v;
  return s / static_cast<double>(t.size());
}

// Enumerates every subset of the remaining coordinates exactly once by
// removing coordinates in increasing order. S[v] = E[(E[f | x_v])^2].
void marginal_second_moments(const std::vector<double>& table, std::vector<int>& coords, int last_removed,
                             std::uint64_t kept_mask, std::vector<double>& S) {
  S[kept_mask] = mean_square(table);
  for (std::size_t j = 0; j < coords.size(); ++j) {
    const int c = coords[j];
    if (c <= last_removed) continue;
    auto reduced = average_out(table, static_cast<int>(j));
    coords.erase(coords.begin() + static_cast<std::ptrdiff_t>(j));
    marginal_second_moments(reduced, coords, c, kept_mask & ~(std::uint64_t{1} << c), S);
    coords.insert(coords.begin() + static_cast<std::ptrdiff_t>(j), c);
  }
}

}  // namespace

SpinVector::SpinVector(std::vector<int> bits) : bits_(std::move(bits)) {
  if (bits_.empty()) throw InvalidArgument("SpinVector: dimension must be at least 1");
  for (int b : bits_)
    if (b != 1 && b != -1) throw InvalidArgument("SpinVector: entries must be -1 or +1");
}

SpinVector SpinVector::from_mask(std::uint64_t mask, int n) {
  std::vector<int> bits(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) bits[static_cast<std::size_t>(i)] = ((mask >> i) & 1U) ? -1 : 1;
  return SpinVector(std::move(bits));
}

std::uint64_t SpinVector::to_mask() const noexcept {
  std::uint64_t m = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] < 0) m |= std::uint64_t{1} << i;
  return m;
}

double FourierSpectrum::evaluate(std::uint64_t vertex) const {
  double s = 0.0;
  for (std::uint64_t u = 0; u < coeffs.size(); ++u)
    s += (__builtin_popcountll(u & vertex) & 1) ? -coeffs[u] : coeffs[u];
  return s;
}

int table_dimension(std::size_t size) {
  if (!is_power_of_two(size)) throw InvalidArgument("vertex table length " + std::to_string(size) + " is not a power of two");
  int n = 0;
  while ((std::size_t{1} << n) < size) ++n;
  if (n > kMaxTransformDim)
    throw InvalidArgument("dimension " + std::to_string(n) + " exceeds the limit of " + std::to_string(kMaxTransformDim));
  return n;
}

VertexTable tabulate(int n, const std::function<double(const SpinVector&)>& f) {
  if (n < 1 || n > kMaxTransformDim) throw InvalidArgument("tabulate: dimension out of range");
  VertexTable t(std::size_t{1} << n);
  for (std::uint64_t x = 0; x < t.size(); ++x) t[x] = f(SpinVector::from_mask(x, n));
  return t;
}

void fwht_inplace(std::vector<double>& a) {
  const std::size_t len = a.size();
  for (std::size_t h = 1; h < len; h <<= 1) {
    for (std::size_t i = 0; i < len; i += h << 1) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double x = a[j];
        const double y = a[j + h];
        a[j] = x + y;
        a[j + h] = x - y;
      }
    }
  }
}

FourierSpectrum walsh_hadamard(const VertexTable& f) {
  FourierSpectrum spec;
  spec.n = table_dimension(f.size());
  spec.coeffs = f;
  fwht_inplace(spec.coeffs);
  const double scale = 1.0 / static_cast<double>(f.size());
  for (double& c : spec.coeffs) c *= scale;
  return spec;
}

VertexTable inverse_walsh_hadamard(const FourierSpectrum& spec) {
  if (spec.coeffs.size() != (std::size_t{1} << spec.n)) throw InvalidArgument("spectrum length does not match 2^n");
  VertexTable f = spec.coeffs;
  fwht_inplace(f);
  return f;
}

DegreeProfile degree_profile(const FourierSpectrum& spec) {
  if (spec.n < 1 || spec.coeffs.size() != (std::size_t{1} << spec.n))
    throw InvalidArgument("degree_profile: malformed spectrum");
  DegreeProfile p;
  p.contributions.assign(static_cast<std::size_t>(spec.n), 0.0);
  double weighted = 0.0;
  const double energy = spec.coeffs[0] * spec.coeffs[0];
  for (std::uint64_t u = 1; u < spec.coeffs.size(); ++u) {
    const double c2 = spec.coeffs[u] * spec.coeffs[u];
    const int k = __builtin_popcountll(u);
    p.contributions[static_cast<std::size_t>(k - 1)] += c2;
    p.variance += c2;
    weighted += k * c2;
  }
  if (negligible_variance(p.variance, energy + p.variance)) {
    std::fill(p.contributions.begin(), p.contributions.end(), 0.0);
    return p;
  }
  for (double& c : p.contributions) c /= p.variance;
  p.mean_dimension = weighted / p.variance;
  return p;
}

double anova_component(const VertexTable& f, SubsetMask u, std::uint64_t x_u) {
  const int n = table_dimension(f.size());
  if (u.mask >> n) throw InvalidArgument("anova_component: subset mask out of range");
  if (n > kMaxAnovaDim) throw InvalidArgument("anova_component: dimension too large");

  // Conditional mean of f given the coordinates in v take their values from x_u.
  auto cond_mean = [&](std::uint64_t v) {
    const std::uint64_t fixed = x_u & v;
    double s = 0.0;
    std::size_t count = 0;
    const std::uint64_t free_bits = ((std::uint64_t{1} << n) - 1) & ~v;
    std::uint64_t sub = 0;
    do {
      s += f[fixed | sub];
      ++count;
      sub = (sub - free_bits) & free_bits;
    } while (sub != 0);
    return s / static_cast<double>(count);
  };

  // f_v for every v ⊆ u, in order of increasing subset (every proper subset of
  // v is numerically smaller than v).
  std::vector<std::uint64_t> subsets;
  std::uint64_t v = 0;
  do {
    subsets.push_back(v);
    v = (v - u.mask) & u.mask;
  } while (v != 0);
  std::sort(subsets.begin(), subsets.end());

  std::vector<double> comp(subsets.size());
  for (std::size_t a = 0; a < subsets.size(); ++a) {
    double val = cond_mean(subsets[a]);
    for (std::size_t b = 0; b < a; ++b)
      if ((subsets[b] & subsets[a]) == subsets[b]) val -= comp[b];
    comp[a] = val;
  }
  return comp.back();
}

VertexTable anova_component_table(const VertexTable& f, SubsetMask u) {
  VertexTable out(f.size());
  for (std::uint64_t x = 0; x < f.size(); ++x) {
    // Components depend only on the bits in u; reuse the first computed value.
    const std::uint64_t rep = x & u.mask;
    out[x] = (rep == x) ? anova_component(f, u, x) : out[rep];
  }
  return out;
}

std::optional<double> exact_md_via_anova(const VertexTable& f) {
  const int n = table_dimension(f.size());
  if (n > kMaxAnovaDim) throw InvalidArgument("exact_md_via_anova: n must be at most 16");
  std::vector<double> S(f.size(), 0.0);
  std::vector<int> coords(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
  marginal_second_moments(f, coords, -1, f.size() - 1, S);

  // Mobius inversion over the subset lattice: sigma_u^2 = sum_{v⊆u} (-1)^{|u|-|v|} S_v.
  for (int i = 0; i < n; ++i)
    for (std::uint64_t m = 0; m < S.size(); ++m)
      if ((m >> i) & 1U) S[m] -= S[m ^ (std::uint64_t{1} << i)];

  double total = 0.0;
  double weighted = 0.0;
  for (std::uint64_t m = 1; m < S.size(); ++m) {
    total += S[m];
    weighted += __builtin_popcountll(m) * S[m];
  }
  if (negligible_variance(total, total + S[0])) return std::nullopt;
  return weighted / total;
}

std::vector<double> exact_influences(const VertexTable& f) {
  const int n = table_dimension(f.size());
  std::vector<double> tau(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::uint64_t x = 0; x < f.size(); ++x) {
      const double d = f[x] - f[x ^ (std::uint64_t{1} << i)];
      s += d * d;
    }
    tau[static_cast<std::size_t>(i)] = s / (4.0 * static_cast<double>(f.size()));
  }
  return tau;
}

void write_vertex_table_csv(const std::string& path, const VertexTable& f) {
  table_dimension(f.size());
  CsvWriter w(path);
  w.header({"mask", "value"});
  for (std::uint64_t x = 0; x < f.size(); ++x) w.row({std::to_string(x), format_double(f[x])});
  w.close();
}

VertexTable read_vertex_table_csv(const std::string& path) {
  auto rows = read_csv_rows(path);
  if (rows.empty()) throw FormatError(path + ": empty vertex table");
  std::size_t start = (rows[0].size() == 2 && rows[0][0] == "mask") ? 1 : 0;
  VertexTable f;
  for (std::size_t r = start; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 2) throw FormatError(path + ": line " + std::to_string(r + 1) + " must have 2 columns");
    auto mask = parse_int(row[0]);
    auto val = parse_double(row[1]);
    if (!mask || !val) throw FormatError(path + ": line " + std::to_string(r + 1) + " is not numeric");
    if (*mask != static_cast<long long>(f.size()))
      throw FormatError(path + ": masks must be listed in increasing order starting at 0");
    f.push_back(*val);
  }
  table_dimension(f.size());
  return f;
}

}  // namespace meandim
