#pragma once

#include "recon/types.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace recon {

/// A coordinate whose value is part of the model known to the adversary
/// (e.g. a regression intercept). It is stored in every point but never
/// optimised.
struct FrozenCoord {
  Index index = 0;
  double value = 0.0;
};

/// Describes how the coordinates of a data point split into the regressor
/// x-part, an optional response y, and frozen coordinates.
class DataLayout {
 public:
  DataLayout() = default;

  DataLayout(Index dim, std::vector<Index> x_coords, std::optional<Index> y_coord,
             std::vector<FrozenCoord> frozen = {}, std::vector<std::string> names = {})
      : dim_(dim),
        x_coords_(std::move(x_coords)),
        y_coord_(y_coord),
        frozen_(std::move(frozen)),
        names_(std::move(names)) {
    if (dim_ < 1) throw ShapeError("DataLayout: dimension must be >= 1");
    std::vector<int> seen(static_cast<std::size_t>(dim_), 0);
    auto mark = [&](Index i, const char* what) {
      if (i < 0 || i >= dim_)
        throw ShapeError(std::string("DataLayout: ") + what + " index " + std::to_string(i) +
                         " out of range for dimension " + std::to_string(dim_));
      if (seen[static_cast<std::size_t>(i)]++)
        throw ShapeError("DataLayout: coordinate " + std::to_string(i) + " assigned twice");
    };
    if (x_coords_.empty()) throw ShapeError("DataLayout: x-part must be non-empty");
    for (Index i : x_coords_) mark(i, "x");
    if (y_coord_) mark(*y_coord_, "y");
    for (const auto& f : frozen_) {
      if (f.index < 0 || f.index >= dim_)
        throw ShapeError("DataLayout: frozen index " + std::to_string(f.index) + " out of range");
      if (!std::isfinite(f.value)) throw ShapeError("DataLayout: frozen value not finite");
    }
    if (names_.empty()) {
      for (Index i = 0; i < dim_; ++i) names_.push_back("c" + std::to_string(i));
    } else if (static_cast<Index>(names_.size()) != dim_) {
      throw ShapeError("DataLayout: names size does not match dimension");
    }
    for (Index i = 0; i < dim_; ++i)
      if (!is_frozen(i)) free_.push_back(i);
    if (free_.empty()) throw ShapeError("DataLayout: every coordinate is frozen");
  }

  /// All coordinates form the x-part; nothing is frozen.
  static DataLayout pure_x(Index dim, std::vector<std::string> names = {}) {
    std::vector<Index> xs(static_cast<std::size_t>(dim));
    for (Index i = 0; i < dim; ++i) xs[static_cast<std::size_t>(i)] = i;
    return DataLayout(dim, std::move(xs), std::nullopt, {}, std::move(names));
  }

  /// Coordinates (1, x_1..x_k, y) when `intercept`, else (x_1..x_k, y).
  static DataLayout regression(Index x_dim, bool intercept, std::vector<std::string> names = {}) {
    const Index lead = intercept ? 1 : 0;
    std::vector<Index> xs;
    for (Index i = 0; i < x_dim + lead; ++i) xs.push_back(i);
    std::vector<FrozenCoord> frozen;
    if (intercept) frozen.push_back({0, 1.0});
    return DataLayout(x_dim + lead + 1, std::move(xs), x_dim + lead, std::move(frozen),
                      std::move(names));
  }

  Index dim() const { return dim_; }
  const std::vector<Index>& x_coords() const { return x_coords_; }
  Index x_dim() const { return static_cast<Index>(x_coords_.size()); }
  const std::optional<Index>& y_coord() const { return y_coord_; }
  bool has_y() const { return y_coord_.has_value(); }
  const std::vector<FrozenCoord>& frozen() const { return frozen_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(Index i) const { return names_[static_cast<std::size_t>(i)]; }

  bool is_frozen(Index i) const {
    return std::any_of(frozen_.begin(), frozen_.end(),
                       [i](const FrozenCoord& f) { return f.index == i; });
  }

  /// Coordinates the attack optimises, in increasing order.
  const std::vector<Index>& free_coords() const { return free_; }
  Index free_dim() const { return static_cast<Index>(free_.size()); }

  /// Position of coordinate `i` in free_coords(), or -1 when frozen.
  Index free_slot(Index i) const {
    auto it = std::find(free_.begin(), free_.end(), i);
    return it == free_.end() ? Index(-1) : static_cast<Index>(it - free_.begin());
  }

 private:
  Index dim_ = 0;
  std::vector<Index> x_coords_;
  std::optional<Index> y_coord_;
  std::vector<FrozenCoord> frozen_;
  std::vector<std::string> names_;
  std::vector<Index> free_;
};

/// Un-normalised measure sum_m w_m delta_{z_m}. Points are stored row-wise.
template <typename Scalar>
class WeightedMeasure {
 public:
  WeightedMeasure() = default;
  WeightedMeasure(Vector<Scalar> weights, Matrix<Scalar> points)
      : weights_(std::move(weights)), points_(std::move(points)) {
    if (points_.rows() < 1) throw ShapeError("measure: empty point list");
    if (weights_.size() != points_.rows())
      throw ShapeError("measure: " + std::to_string(weights_.size()) + " weights for " +
                       std::to_string(points_.rows()) + " points");
    if (!weights_.allFinite()) throw ShapeError("measure: non-finite weight");
    if (!points_.allFinite()) throw ShapeError("measure: non-finite point coordinate");
  }

  Index size() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }
  const Vector<Scalar>& weights() const { return weights_; }
  const Matrix<Scalar>& points() const { return points_; }
  Vector<Scalar>& weights() { return weights_; }
  Matrix<Scalar>& points() { return points_; }
  Scalar weight(Index m) const { return weights_(m); }
  auto point(Index m) const { return points_.row(m).transpose(); }

 private:
  Vector<Scalar> weights_;
  Matrix<Scalar> points_;
};

using Measure = WeightedMeasure<double>;

/// P_X when `weights` is omitted, otherwise P_{w,Z}.
template <typename Scalar>
WeightedMeasure<Scalar> build_measure(const Matrix<Scalar>& points,
                                      const std::optional<Vector<Scalar>>& weights = std::nullopt) {
  if (points.rows() < 1) throw ShapeError("build_measure: empty point list");
  Vector<Scalar> w = weights ? *weights : Vector<Scalar>::Ones(points.rows());
  return WeightedMeasure<Scalar>(std::move(w), points);
}

/// Statistics a zero-divergence reconstruction must reproduce for linear
/// Gaussian models: mass, first and second weighted moments of the x-part and
/// the response.
template <typename Scalar>
struct ReconStats {
  Scalar total_mass{0};
  Vector<Scalar> weighted_sum;    // sum w z   (x-part)
  Matrix<Scalar> weighted_gram;   // sum w z z^T
  bool has_y = false;
  Scalar weighted_y_sum{0};       // sum w u
  Vector<Scalar> weighted_xy;     // sum w z u
  Scalar weighted_yy{0};          // sum w u^2
};

template <typename Scalar>
ReconStats<Scalar> recon_statistics(const WeightedMeasure<Scalar>& measure, const DataLayout& layout) {
  if (measure.dim() != layout.dim())
    throw ShapeError("recon_statistics: layout dimension " + std::to_string(layout.dim()) +
                     " does not match point dimension " + std::to_string(measure.dim()));
  const Index px = layout.x_dim();
  const Index n = measure.size();
  ReconStats<Scalar> s;
  s.has_y = layout.has_y();
  s.weighted_sum = Vector<Scalar>::Zero(px);
  s.weighted_gram = Matrix<Scalar>::Zero(px, px);
  s.weighted_xy = Vector<Scalar>::Zero(s.has_y ? px : 0);

  std::vector<Scalar> mass(static_cast<std::size_t>(n)), ysum(mass.size()), yy(mass.size());
  std::vector<Vector<Scalar>> sums(mass.size()), xys(mass.size());
  std::vector<Matrix<Scalar>> grams(mass.size());
  for (Index m = 0; m < n; ++m) {
    const auto k = static_cast<std::size_t>(m);
    const Scalar w = measure.weight(m);
    Vector<Scalar> x(px);
    for (Index j = 0; j < px; ++j) x(j) = measure.points()(m, layout.x_coords()[static_cast<std::size_t>(j)]);
    mass[k] = w;
    sums[k] = w * x;
    grams[k] = w * x * x.transpose();
    if (s.has_y) {
      const Scalar u = measure.points()(m, *layout.y_coord());
      ysum[k] = w * u;
      xys[k] = (w * u) * x;
      yy[k] = w * u * u;
    }
  }
  s.total_mass = pairwise_sum(mass);
  s.weighted_sum = pairwise_sum_dense(sums);
  s.weighted_gram = pairwise_sum_dense(grams);
  if (s.has_y) {
    s.weighted_y_sum = pairwise_sum(ysum);
    s.weighted_xy = pairwise_sum_dense(xys);
    s.weighted_yy = pairwise_sum(yy);
  }
  return s;
}

/// Normalised weighted mean and variance of one coordinate.
template <typename Scalar>
struct CoordMoments {
  Scalar mean{0};
  Scalar variance{0};
};

template <typename Scalar>
CoordMoments<Scalar> normalized_moments(Scalar mass, Scalar first, Scalar second) {
  CoordMoments<Scalar> c;
  c.mean = first / mass;
  c.variance = second / mass - c.mean * c.mean;
  return c;
}

/// Moments of x-part coordinate `j` (position within layout.x_coords()).
template <typename Scalar>
CoordMoments<Scalar> x_moments(const ReconStats<Scalar>& s, Index j) {
  return normalized_moments(s.total_mass, s.weighted_sum(j), s.weighted_gram(j, j));
}

template <typename Scalar>
CoordMoments<Scalar> y_moments(const ReconStats<Scalar>& s) {
  return normalized_moments(s.total_mass, s.weighted_y_sum, s.weighted_yy);
}

inline constexpr double kRelErrorFloor = 1e-12;

template <typename Scalar>
Scalar relative_error(Scalar target, Scalar recon) {
  using std::abs;
  return abs(target - recon) / std::max(abs(target), Scalar(kRelErrorFloor));
}

template <typename Scalar>
struct StatError {
  std::string name;
  Scalar target{0};
  Scalar recon{0};
  Scalar rel_error{0};
};

template <typename Scalar>
struct StatErrorReport {
  std::vector<StatError<Scalar>> entries;

  const StatError<Scalar>* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
  Scalar max_error() const {
    Scalar m(0);
    for (const auto& e : entries) m = std::max(m, e.rel_error);
    return m;
  }
};

/// Per-field relative errors, raw sums first and then the derived normalised
/// moments (count, mean and variance of every free coordinate). Derived
/// moments of frozen coordinates are omitted.
template <typename Scalar>
StatErrorReport<Scalar> stat_errors(const ReconStats<Scalar>& target, const ReconStats<Scalar>& recon,
                                    const DataLayout& layout) {
  const Index px = layout.x_dim();
  if (target.weighted_gram.rows() != px || recon.weighted_gram.rows() != px ||
      target.has_y != recon.has_y || target.has_y != layout.has_y())
    throw ShapeError("stat_errors: statistics do not match the layout");
  StatErrorReport<Scalar> r;
  auto add = [&](std::string name, Scalar a, Scalar b) {
    r.entries.push_back({std::move(name), a, b, relative_error(a, b)});
  };
  auto xname = [&](Index j) { return layout.name(layout.x_coords()[static_cast<std::size_t>(j)]); };

  add("total_mass", target.total_mass, recon.total_mass);
  for (Index j = 0; j < px; ++j) add("sum_" + xname(j), target.weighted_sum(j), recon.weighted_sum(j));
  for (Index i = 0; i < px; ++i)
    for (Index j = i; j < px; ++j)
      add("gram_" + xname(i) + "_" + xname(j), target.weighted_gram(i, j), recon.weighted_gram(i, j));
  if (target.has_y) {
    const std::string yn = layout.name(*layout.y_coord());
    add("sum_" + yn, target.weighted_y_sum, recon.weighted_y_sum);
    for (Index j = 0; j < px; ++j) add("xy_" + xname(j), target.weighted_xy(j), recon.weighted_xy(j));
    add("yy", target.weighted_yy, recon.weighted_yy);
  }
  for (Index j = 0; j < px; ++j) {
    if (layout.is_frozen(layout.x_coords()[static_cast<std::size_t>(j)])) continue;
    const auto a = x_moments(target, j);
    const auto b = x_moments(recon, j);
    add("mean_" + xname(j), a.mean, b.mean);
    add("var_" + xname(j), a.variance, b.variance);
  }
  if (target.has_y && !layout.is_frozen(*layout.y_coord())) {
    const std::string yn = layout.name(*layout.y_coord());
    const auto a = y_moments(target);
    const auto b = y_moments(recon);
    add("mean_" + yn, a.mean, b.mean);
    add("var_" + yn, a.variance, b.variance);
  }
  return r;
}

}  // namespace recon
