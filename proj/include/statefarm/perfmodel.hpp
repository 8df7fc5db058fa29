#pragma once

// Analytical farm model. All times are microseconds.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>

namespace statefarm::perfmodel {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct CostParams {
  double t_a = 0;  // inter-arrival time
  double t_f = 0;  // task function
  double t_s = 0;  // state update
  double m = 0;    // task count
  double n_w = 1;  // parallelism degree

  void validate() const {
    if (t_a < 0 || t_f < 0 || t_s < 0) throw std::invalid_argument("times must be >= 0");
    if (m < 0) throw std::invalid_argument("task count must be >= 0");
    if (n_w < 1) throw std::invalid_argument("parallelism degree must be >= 1");
  }
};

/// max(t_a, t_f / n_w)
inline double service_time(const CostParams& p) {
  p.validate();
  return std::max(p.t_a, p.t_f / p.n_w);
}

struct CompletionTime {
  double stateful;   // m (t_f + t_s) / n_w
  double stateless;  // m * service_time
};

inline CompletionTime completion_time(const CostParams& p) {
  p.validate();
  return {p.m * (p.t_f + p.t_s) / p.n_w, p.m * service_time(p)};
}

/// Asymptotic speedup of the separate task/state pattern: t_f / t_s + 1.
inline double speedup_bound_separate(double t_f, double t_s) {
  if (t_f < 0 || t_s < 0) throw std::invalid_argument("times must be >= 0");
  if (t_s == 0) return kUnbounded;
  return t_f / t_s + 1.0;
}

/// n_w (t_f + t_s) / (n_w t_s + t_f)
inline double predicted_speedup_separate(double t_f, double t_s, double n_w) {
  if (t_f < 0 || t_s < 0) throw std::invalid_argument("times must be >= 0");
  if (t_f == 0 && t_s == 0) throw std::invalid_argument("t_f and t_s cannot both be zero");
  if (n_w < 1) throw std::invalid_argument("parallelism degree must be >= 1");
  return n_w * (t_f + t_s) / (n_w * t_s + t_f);
}

/// Flush frequency above which collector updates stop limiting the
/// accumulator pattern: t_f n_w / t_s. Zero when t_s is zero.
inline double min_flush_frequency(double t_f, double t_s, double n_w) {
  if (t_f < 0 || t_s < 0) throw std::invalid_argument("times must be >= 0");
  if (n_w < 1) throw std::invalid_argument("parallelism degree must be >= 1");
  if (t_s == 0) return 0.0;
  return t_f * n_w / t_s;
}

}  // namespace statefarm::perfmodel
