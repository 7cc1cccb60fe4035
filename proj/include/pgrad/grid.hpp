#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgrad/detail/reduce.hpp"
#include "pgrad/error.hpp"

namespace pgrad {

/// Uniform periodic grid on the box [0,T^1) x ... x [0,T^p) carrying fields with n components.
///
/// Each axis stores N nodes at t_k = k*h, h = T/N; node N is identified with node 0, so
/// opposite faces of the box match by construction. Nodes are ordered lexicographically
/// with the last axis varying fastest.
class GridSpec {
 public:
  GridSpec() = default;

  GridSpec(std::vector<double> extents, std::vector<std::size_t> nodes, std::size_t components)
      : extents_(std::move(extents)), nodes_(std::move(nodes)), n_(components) {
    if (extents_.empty()) throw UsageError("grid needs at least one time axis");
    if (extents_.size() != nodes_.size())
      throw UsageError("grid extents and node counts differ in length");
    if (n_ == 0) throw UsageError("grid needs at least one field component");
    for (std::size_t a = 0; a < extents_.size(); ++a) {
      if (!(extents_[a] > 0.0) || !std::isfinite(extents_[a]))
        throw UsageError("grid extent on axis " + std::to_string(a + 1) + " must be positive");
      if (nodes_[a] < 3)
        throw UsageError("grid axis " + std::to_string(a + 1) + " needs at least 3 nodes");
    }
    strides_.assign(nodes_.size(), 1);
    for (std::size_t a = nodes_.size() - 1; a > 0; --a) strides_[a - 1] = strides_[a] * nodes_[a];
    node_count_ = strides_[0] * nodes_[0];
  }

  std::size_t p() const noexcept { return extents_.size(); }
  std::size_t n() const noexcept { return n_; }
  const std::vector<double>& extents() const noexcept { return extents_; }
  const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }
  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t stride(std::size_t axis) const { return strides_.at(axis); }

  double spacing(std::size_t axis) const { return extents_.at(axis) / static_cast<double>(nodes_.at(axis)); }

  double cell_volume() const {
    double v = 1.0;
    for (std::size_t a = 0; a < p(); ++a) v *= spacing(a);
    return v;
  }

  double volume() const {
    double v = 1.0;
    for (double t : extents_) v *= t;
    return v;
  }

  /// Position of node `node` along `axis`.
  std::size_t coordinate_index(std::size_t node, std::size_t axis) const {
    return (node / strides_[axis]) % nodes_[axis];
  }

  std::vector<std::size_t> multi_index(std::size_t node) const {
    std::vector<std::size_t> k(p());
    for (std::size_t a = 0; a < p(); ++a) k[a] = coordinate_index(node, a);
    return k;
  }

  /// Time coordinates t_k of a node.
  std::vector<double> time_of(std::size_t node) const {
    std::vector<double> t(p());
    time_of(node, t);
    return t;
  }

  void time_of(std::size_t node, std::span<double> out) const {
    for (std::size_t a = 0; a < p(); ++a)
      out[a] = static_cast<double>(coordinate_index(node, a)) * spacing(a);
  }

  /// Flat index of the node reached by moving `step` cells along `axis`, wrapping periodically.
  std::size_t shifted(std::size_t node, std::size_t axis, long step) const {
    const auto N = static_cast<long>(nodes_[axis]);
    const auto k = static_cast<long>(coordinate_index(node, axis));
    const long wrapped = ((k + step) % N + N) % N;
    return node + static_cast<std::size_t>(wrapped - k) * strides_[axis];
  }

  bool operator==(const GridSpec& other) const {
    return extents_ == other.extents_ && nodes_ == other.nodes_ && n_ == other.n_;
  }

 private:
  std::vector<double> extents_;
  std::vector<std::size_t> nodes_;
  std::size_t n_ = 0;
  std::vector<std::size_t> strides_;
  std::size_t node_count_ = 0;
};

/// Grid-sampled map u: nodes -> R^n. Storage is node-major: value(node, i) = data[node*n + i].
class Field {
 public:
  Field() = default;

  explicit Field(GridSpec spec) : spec_(std::move(spec)), values_(spec_.node_count() * spec_.n(), 0.0) {}

  Field(GridSpec spec, std::vector<double> values) : spec_(std::move(spec)), values_(std::move(values)) {
    if (values_.size() != spec_.node_count() * spec_.n())
      throw UsageError("field data size does not match grid");
    for (double v : values_)
      if (!std::isfinite(v)) throw UsageError("field values must be finite");
  }

  /// Field equal to `c` at every node.
  static Field constant(const GridSpec& spec, std::span<const double> c) {
    if (c.size() != spec.n()) throw UsageError("constant has wrong number of components");
    Field f(spec);
    for (std::size_t k = 0; k < spec.node_count(); ++k)
      for (std::size_t i = 0; i < spec.n(); ++i) f(k, i) = c[i];
    return f;
  }

  /// Samples fn(t, out) at every node.
  template <class Fn>
  static Field sample(const GridSpec& spec, Fn&& fn) {
    Field f(spec);
    std::vector<double> t(spec.p());
    for (std::size_t k = 0; k < spec.node_count(); ++k) {
      spec.time_of(k, t);
      fn(std::span<const double>(t), f.node(k));
    }
    return f;
  }

  const GridSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t node, std::size_t i) { return values_[node * spec_.n() + i]; }
  double operator()(std::size_t node, std::size_t i) const { return values_[node * spec_.n() + i]; }

  std::span<double> node(std::size_t k) { return {values_.data() + k * spec_.n(), spec_.n()}; }
  std::span<const double> node(std::size_t k) const { return {values_.data() + k * spec_.n(), spec_.n()}; }

  std::span<double> data() noexcept { return values_; }
  std::span<const double> data() const noexcept { return values_; }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Field& operator+=(const Field& o) {
    require_same_grid(o);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += o.values_[j];
    return *this;
  }
  Field& operator-=(const Field& o) {
    require_same_grid(o);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] -= o.values_[j];
    return *this;
  }
  Field& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }

  /// this += s * o
  Field& axpy(double s, const Field& o) {
    require_same_grid(o);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += s * o.values_[j];
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }
  friend Field operator-(Field a) { return a *= -1.0; }

  bool operator==(const Field& o) const { return spec_ == o.spec_ && values_ == o.values_; }

  void require_same_grid(const Field& o) const {
    if (!(spec_ == o.spec_)) throw UsageError("fields live on different grids");
  }

 private:
  GridSpec spec_;
  std::vector<double> values_;
};

/// Discrete L2 pairing Vol_cell * sum_k sum_i u^i(k) v^i(k).
inline double l2_inner(const Field& u, const Field& v) {
  u.require_same_grid(v);
  const auto& g = u.spec();
  std::vector<double> terms(g.node_count());
  detail::for_each_index(g.node_count(), [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.n(); ++i) s += u(k, i) * v(k, i);
    terms[k] = s;
  });
  return g.cell_volume() * detail::pairwise_sum(terms);
}

inline double l2_norm(const Field& u) { return std::sqrt(l2_inner(u, u)); }

/// Periodic forward difference (u(k + e_axis) - u(k)) / h along a zero-based axis.
inline Field forward_diff(const Field& u, std::size_t axis) {
  const auto& g = u.spec();
  if (axis >= g.p()) throw UsageError("axis " + std::to_string(axis + 1) + " out of range");
  const double inv_h = 1.0 / g.spacing(axis);
  Field d(g);
  detail::for_each_index(g.node_count(), [&](std::size_t k) {
    const std::size_t kp = g.shifted(k, axis, 1);
    for (std::size_t i = 0; i < g.n(); ++i) d(k, i) = (u(kp, i) - u(k, i)) * inv_h;
  });
  return d;
}

/// Periodic backward difference (u(k) - u(k - e_axis)) / h. Minus the L2 adjoint of forward_diff.
inline Field backward_diff(const Field& u, std::size_t axis) {
  const auto& g = u.spec();
  if (axis >= g.p()) throw UsageError("axis " + std::to_string(axis + 1) + " out of range");
  const double inv_h = 1.0 / g.spacing(axis);
  Field d(g);
  detail::for_each_index(g.node_count(), [&](std::size_t k) {
    const std::size_t km = g.shifted(k, axis, -1);
    for (std::size_t i = 0; i < g.n(); ++i) d(k, i) = (u(k, i) - u(km, i)) * inv_h;
  });
  return d;
}

/// Sum over axes of ||D_axis u||^2, i.e. the squared L2 norm of the stacked forward difference.
inline double gradient_norm_squared(const Field& u) {
  const auto& g = u.spec();
  std::vector<double> terms(g.node_count());
  std::vector<double> inv_h(g.p());
  for (std::size_t a = 0; a < g.p(); ++a) inv_h[a] = 1.0 / g.spacing(a);
  detail::for_each_index(g.node_count(), [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t a = 0; a < g.p(); ++a) {
      const std::size_t kp = g.shifted(k, a, 1);
      for (std::size_t i = 0; i < g.n(); ++i) {
        const double d = (u(kp, i) - u(k, i)) * inv_h[a];
        s += d * d;
      }
    }
    terms[k] = s;
  });
  return g.cell_volume() * detail::pairwise_sum(terms);
}

/// Discrete H1 pairing: l2_inner(u,v) + sum_axis l2_inner(D u, D v).
inline double h1_inner(const Field& u, const Field& v) {
  u.require_same_grid(v);
  double s = l2_inner(u, v);
  for (std::size_t a = 0; a < u.spec().p(); ++a) s += l2_inner(forward_diff(u, a), forward_diff(v, a));
  return s;
}

inline double h1_norm(const Field& u) { return std::sqrt(h1_inner(u, u)); }

/// (2p+1)-point periodic Laplacian sum_axis (u(k+e) - 2u(k) + u(k-e)) / h^2.
inline Field laplacian(const Field& u) {
  const auto& g = u.spec();
  std::vector<double> inv_h2(g.p());
  for (std::size_t a = 0; a < g.p(); ++a) inv_h2[a] = 1.0 / (g.spacing(a) * g.spacing(a));
  Field out(g);
  detail::for_each_index(g.node_count(), [&](std::size_t k) {
    for (std::size_t a = 0; a < g.p(); ++a) {
      const std::size_t kp = g.shifted(k, a, 1);
      const std::size_t km = g.shifted(k, a, -1);
      // difference of differences: neighbour differences are exact for nearby values, so
      // rounding scales with |Du| rather than with |u|
      for (std::size_t i = 0; i < g.n(); ++i)
        out(k, i) += ((u(kp, i) - u(k, i)) - (u(k, i) - u(km, i))) * inv_h2[a];
    }
  });
  return out;
}

/// Domain average of each component, (1 / prod N) sum_k u(k).
inline std::vector<double> mean(const Field& u) {
  const auto& g = u.spec();
  const auto count = static_cast<double>(g.node_count());
  std::vector<double> m(g.n());
  std::vector<double> column(g.node_count());
  for (std::size_t i = 0; i < g.n(); ++i) {
    for (std::size_t k = 0; k < g.node_count(); ++k) column[k] = u(k, i);
    const double first = detail::pairwise_sum(column) / count;
    // one refinement pass on the residuals; recovers c exactly for a constant field c
    for (double& v : column) v -= first;
    m[i] = first + detail::pairwise_sum(column) / count;
  }
  return m;
}

struct MeanSplit {
  std::vector<double> mean;
  Field fluctuation;
};

/// u = mean + fluctuation with the fluctuation of zero average.
inline MeanSplit split_mean(const Field& u) {
  MeanSplit s{mean(u), u};
  const auto& g = u.spec();
  for (std::size_t k = 0; k < g.node_count(); ++k)
    for (std::size_t i = 0; i < g.n(); ++i) s.fluctuation(k, i) -= s.mean[i];
  return s;
}

/// Field on the closed grid with N+1 nodes per axis, the last node duplicating the first
/// (t = T on the upper face). Interchange format for external producers.
struct ClosedField {
  GridSpec spec;  // the periodic grid the data is meant to represent
  std::vector<std::size_t> nodes;  // N + 1 per axis
  std::vector<double> values;      // node-major, lexicographic, last axis fastest

  std::size_t node_count() const {
    std::size_t c = 1;
    for (auto v : nodes) c *= v;
    return c;
  }
  std::size_t stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t a = axis + 1; a < nodes.size(); ++a) s *= nodes[a];
    return s;
  }
  double operator()(std::size_t node, std::size_t i) const { return values[node * spec.n() + i]; }
};

/// Closed-form export: duplicates the wrap faces.
inline ClosedField to_closed(const Field& u) {
  const auto& g = u.spec();
  ClosedField c{g, {}, {}};
  for (auto N : g.nodes()) c.nodes.push_back(N + 1);
  c.values.resize(c.node_count() * g.n());
  for (std::size_t q = 0; q < c.node_count(); ++q) {
    std::size_t node = 0;
    for (std::size_t a = 0; a < g.p(); ++a) {
      const std::size_t k = (q / c.stride(a)) % c.nodes[a];
      node += (k % g.nodes()[a]) * g.stride(a);
    }
    for (std::size_t i = 0; i < g.n(); ++i) c.values[q * g.n() + i] = u(node, i);
  }
  return c;
}

/// Drops the duplicated upper faces of a closed grid.
inline Field from_closed(const ClosedField& c) {
  const auto& g = c.spec;
  if (c.nodes.size() != g.p() || c.values.size() != c.node_count() * g.n())
    throw FormatError("closed grid shape does not match its periodic grid");
  for (std::size_t a = 0; a < g.p(); ++a)
    if (c.nodes[a] != g.nodes()[a] + 1) throw FormatError("closed grid needs N+1 nodes on every axis");
  Field u(g);
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    std::size_t q = 0;
    for (std::size_t a = 0; a < g.p(); ++a) q += g.coordinate_index(node, a) * c.stride(a);
    for (std::size_t i = 0; i < g.n(); ++i) u(node, i) = c(q, i);
  }
  return u;
}

/// Cyclic index shift by `step` cells along `axis`: out(k) = u(k + step e_axis).
inline Field roll(const Field& u, std::size_t axis, long step) {
  const auto& g = u.spec();
  if (axis >= g.p()) throw UsageError("axis out of range");
  Field out(g);
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    const std::size_t src = g.shifted(k, axis, step);
    for (std::size_t i = 0; i < g.n(); ++i) out(k, i) = u(src, i);
  }
  return out;
}

/// Eigenvalue of the periodic Laplacian for wave numbers kappa: -sum_axis (2 sin(pi kappa/N)/h)^2.
inline double laplacian_symbol(const GridSpec& g, std::span<const std::size_t> kappa) {
  double lambda = 0.0;
  for (std::size_t a = 0; a < g.p(); ++a) {
    const double s = 2.0 * std::sin(std::numbers::pi * static_cast<double>(kappa[a]) /
                                    static_cast<double>(g.nodes()[a])) / g.spacing(a);
    lambda -= s * s;
  }
  return lambda;
}

/// Discrete Wirtinger constant C_h = max_axis h / (2 sin(pi/N)): the sharp constant in
/// |u - mean(u)| <= C_h |D u| for the periodic forward difference.
inline double wirtinger_constant(const GridSpec& g) {
  double c = 0.0;
  for (std::size_t a = 0; a < g.p(); ++a)
    c = std::max(c, g.spacing(a) / (2.0 * std::sin(std::numbers::pi / static_cast<double>(g.nodes()[a]))));
  return c;
}

namespace detail {

// In-place separable DFT of one component along `axis` (sign -1 forward, +1 inverse, unscaled).
inline void dft_axis(const GridSpec& g, std::vector<std::complex<double>>& data, std::size_t axis, int sign) {
  const std::size_t N = g.nodes()[axis];
  const std::size_t stride = g.stride(axis);
  std::vector<std::complex<double>> twiddle(N);
  for (std::size_t m = 0; m < N; ++m)
    twiddle[m] = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(N));
  std::vector<std::complex<double>> line(N), out(N);
  for (std::size_t start = 0; start < g.node_count(); ++start) {
    if (g.coordinate_index(start, axis) != 0) continue;
    for (std::size_t j = 0; j < N; ++j) line[j] = data[start + j * stride];
    for (std::size_t q = 0; q < N; ++q) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t j = 0; j < N; ++j) acc += line[j] * twiddle[(q * j) % N];
      out[q] = acc;
    }
    for (std::size_t j = 0; j < N; ++j) data[start + j * stride] = out[j];
  }
}

}  // namespace detail

/// Zero-mean solution of laplacian(u) = f, computed mode by mode with a discrete Fourier
/// transform. Intended as a reference solver for manufactured-solution tests.
inline Field solve_linear_poisson(const Field& f) {
  const auto& g = f.spec();
  const double norm = l2_norm(f);
  const auto m = mean(f);
  for (std::size_t i = 0; i < g.n(); ++i)
    if (std::abs(m[i]) > 1e-10 * norm)
      throw PreconditionError("right-hand side component " + std::to_string(i + 1) + " has nonzero mean");

  Field u(g);
  std::vector<std::complex<double>> buf(g.node_count());
  for (std::size_t i = 0; i < g.n(); ++i) {
    for (std::size_t k = 0; k < g.node_count(); ++k) buf[k] = f(k, i);
    for (std::size_t a = 0; a < g.p(); ++a) detail::dft_axis(g, buf, a, -1);
    for (std::size_t k = 0; k < g.node_count(); ++k) {
      const auto kappa = g.multi_index(k);
      const double lambda = laplacian_symbol(g, kappa);
      buf[k] = (k == 0) ? std::complex<double>{0.0, 0.0} : buf[k] / lambda;
    }
    for (std::size_t a = 0; a < g.p(); ++a) detail::dft_axis(g, buf, a, +1);
    const double scale = 1.0 / static_cast<double>(g.node_count());
    for (std::size_t k = 0; k < g.node_count(); ++k) u(k, i) = buf[k].real() * scale;
  }
  return u;
}

}  // namespace pgrad
