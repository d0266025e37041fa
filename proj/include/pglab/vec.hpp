#ifndef PGLAB_VEC_HPP_
#define PGLAB_VEC_HPP_

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pglab {

// Flat parameter-space vector. Gradients, parameter updates and statistics
// all share this currency; coordinate (row, token) lives at row * vocab + token.
using Vec = std::vector<double>;

inline void check_same_size(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

inline void add_scaled(Vec& dst, const Vec& src, double c) {
  check_same_size(dst, src, "add_scaled");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += c * src[i];
}

inline Vec scaled(const Vec& v, double c) {
  Vec out(v);
  for (double& x : out) x *= c;
  return out;
}

inline double norm2(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double max_abs(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  check_same_size(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Neumaier compensated summation. Aggregations that must not depend on worker
// count reduce fixed-order blocks through this.
class Neumaier {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace pglab

#endif  // PGLAB_VEC_HPP_
