#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/distributions/uniform.hpp>

#include "bootdelta/error.hpp"

namespace bootdelta {

/// A continuous reference distribution with closed-form cdf, quantile and density.
class ModelCDF {
 public:
  enum class Kind { Normal, Uniform, StudentT };

  static ModelCDF normal(double mean = 0.0, double sd = 1.0) {
    require(sd > 0.0 && std::isfinite(mean) && std::isfinite(sd), "ModelCDF::normal: need finite mean and sd > 0");
    return ModelCDF(Kind::Normal, mean, sd);
  }
  static ModelCDF uniform(double lower = 0.0, double upper = 1.0) {
    require(lower < upper && std::isfinite(lower) && std::isfinite(upper), "ModelCDF::uniform: need lower < upper");
    return ModelCDF(Kind::Uniform, lower, upper);
  }
  static ModelCDF student_t(double dof) {
    require(dof > 0.0 && std::isfinite(dof), "ModelCDF::student_t: degrees of freedom must be positive");
    return ModelCDF(Kind::StudentT, dof, 0.0);
  }

  Kind kind() const noexcept { return kind_; }
  double param1() const noexcept { return a_; }
  double param2() const noexcept { return b_; }

  double cdf(double t) const {
    switch (kind_) {
      case Kind::Normal:
        if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
        return boost::math::cdf(boost::math::normal_distribution<double>(a_, b_), t);
      case Kind::Uniform:
        if (t <= a_) return 0.0;
        if (t >= b_) return 1.0;
        return (t - a_) / (b_ - a_);
      case Kind::StudentT:
        if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
        return boost::math::cdf(boost::math::students_t_distribution<double>(a_), t);
    }
    return 0.0;
  }

  /// Upper tail 1 - F(t) without cancellation.
  double survival(double t) const {
    switch (kind_) {
      case Kind::Normal:
        if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
        return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(a_, b_), t));
      case Kind::Uniform: return 1.0 - cdf(t);
      case Kind::StudentT:
        if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
        return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(a_), t));
    }
    return 0.0;
  }

  double quantile(double p) const {
    require(p >= 0.0 && p <= 1.0, "ModelCDF::quantile: probability outside [0,1]");
    switch (kind_) {
      case Kind::Normal:
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        return boost::math::quantile(boost::math::normal_distribution<double>(a_, b_), p);
      case Kind::Uniform: return a_ + p * (b_ - a_);
      case Kind::StudentT:
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        return boost::math::quantile(boost::math::students_t_distribution<double>(a_), p);
    }
    return 0.0;
  }

  double density(double t) const {
    switch (kind_) {
      case Kind::Normal: return boost::math::pdf(boost::math::normal_distribution<double>(a_, b_), t);
      case Kind::Uniform: return (t >= a_ && t <= b_) ? 1.0 / (b_ - a_) : 0.0;
      case Kind::StudentT: return boost::math::pdf(boost::math::students_t_distribution<double>(a_), t);
    }
    return 0.0;
  }

  double lower_support() const noexcept {
    return kind_ == Kind::Uniform ? a_ : -std::numeric_limits<double>::infinity();
  }
  double upper_support() const noexcept {
    return kind_ == Kind::Uniform ? b_ : std::numeric_limits<double>::infinity();
  }
  bool bounded_support() const noexcept { return kind_ == Kind::Uniform; }

  /// Largest k with finite k-th absolute moment (+inf for thin tails).
  double tail_exponent() const noexcept {
    return kind_ == Kind::StudentT ? a_ : std::numeric_limits<double>::infinity();
  }

  bool has_mean() const noexcept { return tail_exponent() > 1.0; }

  double mean() const {
    if (!has_mean()) fail(ErrorCode::Divergent, "ModelCDF::mean: mean does not exist for " + name());
    switch (kind_) {
      case Kind::Normal: return a_;
      case Kind::Uniform: return 0.5 * (a_ + b_);
      case Kind::StudentT: return 0.0;
    }
    return 0.0;
  }

  double variance() const {
    switch (kind_) {
      case Kind::Normal: return b_ * b_;
      case Kind::Uniform: return (b_ - a_) * (b_ - a_) / 12.0;
      case Kind::StudentT:
        if (a_ <= 2.0) fail(ErrorCode::Divergent, "ModelCDF::variance: variance does not exist for " + name());
        return a_ / (a_ - 2.0);
    }
    return 0.0;
  }

  std::string name() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
      case Kind::Normal: os << "normal(" << a_ << "," << b_ << ")"; break;
      case Kind::Uniform: os << "uniform(" << a_ << "," << b_ << ")"; break;
      case Kind::StudentT: os << "student_t(" << a_ << ")"; break;
    }
    return os.str();
  }

  bool operator==(const ModelCDF&) const = default;

 private:
  ModelCDF(Kind k, double a, double b) : kind_(k), a_(a), b_(b) {}

  Kind kind_;
  // Normal: mean, sd. Uniform: lower, upper. StudentT: dof, unused.
  double a_;
  double b_;
};

}  // namespace bootdelta
