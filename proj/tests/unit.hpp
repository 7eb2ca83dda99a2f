#pragma once

// Helpers shared by the doctest suites.

#include <random>
#include <string_view>

#include <doctest.h>

#include "bodyfit/body_model.hpp"
#include "suite.hpp"

namespace bodyfit::testing {

inline void require_examples(std::string_view prefix) {
  const auto results = example_checks(prefix);
  REQUIRE(!results.empty());
  for (const auto& r : results) CHECK_MESSAGE(r.pass, r.name << ": " << r.detail);
}

inline const BodyModel& shared_model() {
  static const BodyModel m = make_default_model(0);
  return m;
}

inline ShapeParams random_beta(std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  ShapeParams s;
  for (Eigen::Index i = 0; i < s.beta.size(); ++i) s.beta[i] = n(gen);
  return s;
}

inline PoseParams random_theta(const BodyModel& model, std::mt19937_64& gen, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  PoseParams p = PoseParams::rest(model.num_joints());
  for (Eigen::Index i = 0; i < p.joint_rotations.size(); ++i) p.joint_rotations.data()[i] = n(gen);
  for (int d = 0; d < 3; ++d) p.root_translation[d] = 0.1 * n(gen);
  return p;
}

}  // namespace bodyfit::testing
