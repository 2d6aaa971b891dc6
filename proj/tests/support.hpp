#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "phishguard/dataset.hpp"
#include "phishguard/features.hpp"
#include "phishguard/random.hpp"

namespace pgtest {

inline std::vector<std::string> names(int d) {
  std::vector<std::string> out;
  for (int j = 0; j < d; ++j) out.push_back("f" + std::to_string(j));
  return out;
}

// Ternary features; the label follows a fixed linear rule plus seeded noise.
inline phishguard::Dataset ternary_dataset(int n, int d, std::uint64_t seed, double noise = 0.3) {
  phishguard::Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    double z = 0.0;
    for (int j = 0; j < d; ++j) {
      x(i, j) = static_cast<double>(phishguard::uniform_index(rng, 3)) - 1.0;
      z += (j % 3 == 0 ? 1.5 : (j % 3 == 1 ? -0.7 : 0.1)) * x(i, j);
    }
    z += noise * phishguard::uniform_real(rng, -3.0, 3.0);
    y(i) = z > 0 ? 1 : 0;
  }
  return phishguard::make_dataset(names(d), std::move(x), std::move(y));
}

// Same, with the 23 canonical names and URL_Length drawn as a count.
inline phishguard::Dataset canonical_dataset(int n, std::uint64_t seed) {
  auto ds = ternary_dataset(n, static_cast<int>(phishguard::kFeatureCount), seed);
  ds.feature_names = phishguard::canonical_feature_names();
  const auto len = static_cast<Eigen::Index>(*phishguard::feature_index("URL_Length"));
  phishguard::Rng rng(seed ^ 0xabcdefULL);
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    ds.features(i, len) = 14.0 + static_cast<double>(phishguard::uniform_index(rng, 90));
  }
  return ds;
}

}  // namespace pgtest
