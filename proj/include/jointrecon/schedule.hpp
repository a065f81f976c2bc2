#pragma once

#include <cmath>

#include <json.hpp>

#include "jointrecon/errors.hpp"

namespace jointrecon {

/// Geometric noise ladder sigma_i = sigma_min * (sigma_max / sigma_min)^(i / N),
/// i = 0..N.
struct NoiseSchedule {
  double sigma_min = 0.01;
  double sigma_max = 10.0;
  int n_steps = 100;

  void validate() const {
    if (!(sigma_min > 0.0 && sigma_max > sigma_min)) {
      throw ParameterError("schedule: require 0 < sigma_min < sigma_max");
    }
    if (n_steps < 1) throw ParameterError("schedule: n_steps must be >= 1");
  }

  bool operator==(const NoiseSchedule&) const = default;
};

inline double sigma_at(int i, const NoiseSchedule& s) {
  s.validate();
  if (i < 0 || i > s.n_steps) {
    throw ParameterError("sigma_at: level " + std::to_string(i) + " outside [0, " +
                         std::to_string(s.n_steps) + "]");
  }
  if (i == 0) return s.sigma_min;
  if (i == s.n_steps) return s.sigma_max;
  return s.sigma_min * std::pow(s.sigma_max / s.sigma_min, static_cast<double>(i) / s.n_steps);
}

inline void to_json(nlohmann::json& j, const NoiseSchedule& s) {
  j = nlohmann::json{{"sigma_min", s.sigma_min}, {"sigma_max", s.sigma_max}, {"n_steps", s.n_steps}};
}

inline void from_json(const nlohmann::json& j, NoiseSchedule& s) {
  j.at("sigma_min").get_to(s.sigma_min);
  j.at("sigma_max").get_to(s.sigma_max);
  j.at("n_steps").get_to(s.n_steps);
  s.validate();
}

}  // namespace jointrecon
