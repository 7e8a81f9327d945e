#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>

namespace maghyst {

/// Fixed-capacity vector for field quantities (H, B, J).
/// The spatial dimension d <= 3 is chosen at runtime and stays fixed for the
/// lifetime of a model instance; storage is inline so Vec is cheap to copy.
class Vec {
 public:
  static constexpr int kMaxDim = 3;

  Vec() = default;
  explicit Vec(int dim) : dim_(check_dim(dim)) { data_.fill(0.0); }
  Vec(std::initializer_list<double> xs) : dim_(check_dim(static_cast<int>(xs.size()))) {
    data_.fill(0.0);
    int i = 0;
    for (double x : xs) data_[i++] = x;
  }

  [[nodiscard]] int dim() const { return dim_; }

  double& operator[](int i) {
    assert(i >= 0 && i < dim_);
    return data_[static_cast<std::size_t>(i)];
  }
  double operator[](int i) const {
    assert(i >= 0 && i < dim_);
    return data_[static_cast<std::size_t>(i)];
  }

  [[nodiscard]] double dot(const Vec& o) const {
    assert(dim_ == o.dim_);
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += data_[i] * o.data_[i];
    return s;
  }
  [[nodiscard]] double norm_sq() const { return dot(*this); }
  [[nodiscard]] double norm() const { return std::sqrt(norm_sq()); }

  Vec& operator+=(const Vec& o) {
    assert(dim_ == o.dim_);
    for (int i = 0; i < dim_; ++i) data_[i] += o.data_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    assert(dim_ == o.dim_);
    for (int i = 0; i < dim_; ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < dim_; ++i) data_[i] *= s;
    return *this;
  }

  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator*(Vec a, double s) { return a *= s; }
  friend Vec operator-(Vec a) { return a *= -1.0; }

  /// a + s*b without a temporary per component pass.
  [[nodiscard]] Vec axpy(double s, const Vec& b) const {
    assert(dim_ == b.dim_);
    Vec r(dim_);
    for (int i = 0; i < dim_; ++i) r.data_[i] = data_[i] + s * b.data_[i];
    return r;
  }

 private:
  static int check_dim(int d) {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("Vec: dimension must be 1, 2 or 3");
    return d;
  }

  std::array<double, kMaxDim> data_{};
  int dim_ = 0;
};

/// Dense d x d matrix (d <= 3) with closed-form solve/inverse.
/// All Newton systems per pinning cell are this size, so direct inversion via
/// cofactors is both exact in cost and branch-free enough for the hot path.
class Mat {
 public:
  Mat() = default;
  explicit Mat(int dim) : dim_(dim) {
    assert(dim >= 1 && dim <= Vec::kMaxDim);
    data_.fill(0.0);
  }

  [[nodiscard]] static Mat identity(int dim) {
    Mat m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
  [[nodiscard]] static Mat outer(const Vec& a, const Vec& b) {
    assert(a.dim() == b.dim());
    Mat m(a.dim());
    for (int i = 0; i < a.dim(); ++i)
      for (int j = 0; j < a.dim(); ++j) m(i, j) = a[i] * b[j];
    return m;
  }

  [[nodiscard]] int dim() const { return dim_; }

  double& operator()(int i, int j) {
    assert(i >= 0 && i < dim_ && j >= 0 && j < dim_);
    return data_[static_cast<std::size_t>(i * dim_ + j)];
  }
  double operator()(int i, int j) const {
    assert(i >= 0 && i < dim_ && j >= 0 && j < dim_);
    return data_[static_cast<std::size_t>(i * dim_ + j)];
  }

  Mat& operator+=(const Mat& o) {
    assert(dim_ == o.dim_);
    for (int i = 0; i < dim_ * dim_; ++i) data_[i] += o.data_[i];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    assert(dim_ == o.dim_);
    for (int i = 0; i < dim_ * dim_; ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Mat& operator*=(double s) {
    for (int i = 0; i < dim_ * dim_; ++i) data_[i] *= s;
    return *this;
  }
  friend Mat operator+(Mat a, const Mat& b) { return a += b; }
  friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
  friend Mat operator*(double s, Mat a) { return a *= s; }

  /// Add s to every diagonal entry.
  Mat& add_diag(double s) {
    for (int i = 0; i < dim_; ++i) (*this)(i, i) += s;
    return *this;
  }

  [[nodiscard]] Vec apply(const Vec& x) const {
    assert(dim_ == x.dim());
    Vec y(dim_);
    for (int i = 0; i < dim_; ++i) {
      double s = 0.0;
      for (int j = 0; j < dim_; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  [[nodiscard]] Mat matmul(const Mat& o) const {
    assert(dim_ == o.dim_);
    Mat r(dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) {
        double s = 0.0;
        for (int k = 0; k < dim_; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }

  [[nodiscard]] double det() const {
    switch (dim_) {
      case 1:
        return data_[0];
      case 2:
        return data_[0] * data_[3] - data_[1] * data_[2];
      default: {
        const auto& a = data_;
        return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
               a[2] * (a[3] * a[7] - a[4] * a[6]);
      }
    }
  }

  /// Closed-form inverse (cofactor expansion). Throws on a numerically
  /// singular block; all callers pass symmetric positive definite matrices.
  [[nodiscard]] Mat inverse() const {
    const double d = det();
    if (d == 0.0 || !std::isfinite(d)) throw std::runtime_error("Mat::inverse: singular block");
    Mat r(dim_);
    const double inv = 1.0 / d;
    switch (dim_) {
      case 1:
        r.data_[0] = inv;
        break;
      case 2:
        r.data_[0] = data_[3] * inv;
        r.data_[1] = -data_[1] * inv;
        r.data_[2] = -data_[2] * inv;
        r.data_[3] = data_[0] * inv;
        break;
      default: {
        const auto& a = data_;
        r.data_[0] = (a[4] * a[8] - a[5] * a[7]) * inv;
        r.data_[1] = (a[2] * a[7] - a[1] * a[8]) * inv;
        r.data_[2] = (a[1] * a[5] - a[2] * a[4]) * inv;
        r.data_[3] = (a[5] * a[6] - a[3] * a[8]) * inv;
        r.data_[4] = (a[0] * a[8] - a[2] * a[6]) * inv;
        r.data_[5] = (a[2] * a[3] - a[0] * a[5]) * inv;
        r.data_[6] = (a[3] * a[7] - a[4] * a[6]) * inv;
        r.data_[7] = (a[1] * a[6] - a[0] * a[7]) * inv;
        r.data_[8] = (a[0] * a[4] - a[1] * a[3]) * inv;
      }
    }
    return r;
  }

  [[nodiscard]] Vec solve(const Vec& rhs) const { return inverse().apply(rhs); }

  [[nodiscard]] double frobenius_norm() const {
    double s = 0.0;
    for (int i = 0; i < dim_ * dim_; ++i) s += data_[i] * data_[i];
    return std::sqrt(s);
  }

 private:
  std::array<double, static_cast<std::size_t>(Vec::kMaxDim* Vec::kMaxDim)> data_{};
  int dim_ = 0;
};

}  // namespace maghyst
