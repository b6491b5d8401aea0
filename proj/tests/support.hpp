// Copyright 2026 The attrunlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Fixtures and reference implementations shared by the unit tests and the
// acceptance runner. The reference code here is deliberately naive: it
// recomputes quantities from their definitions instead of calling into the
// library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"

namespace attrunlearn::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                            double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

// Random binary labels with at least one member in each group.
inline AttributeTable random_labels(std::size_t n, std::uint64_t seed, double p_one = 0.5) {
  Rng rng(seed);
  std::bernoulli_distribution coin(p_one);
  std::vector<Label> y(n);
  for (auto& l : y) l = coin(rng) ? 1 : 0;
  y[0] = 0;
  y[n - 1] = 1;
  return AttributeTable::from_labels(std::move(y));
}

// Central differences of a scalar function of a matrix.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                               double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double keep = probe(r, c);
      probe(r, c) = keep + h;
      const double up = f(probe);
      probe(r, c) = keep - h;
      const double down = f(probe);
      probe(r, c) = keep;
      g(r, c) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

// max |a - b| / max(1, max |b|).
inline double relative_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Sum over all ordered pairs of differing labels of |theta_i - theta_j|^2.
inline double u2u_reference(const Matrix& theta, std::span<const Label> y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    for (Eigen::Index j = 0; j < theta.rows(); ++j) {
      if (y[static_cast<std::size_t>(i)] != y[static_cast<std::size_t>(j)]) {
        total += (theta.row(i) - theta.row(j)).squaredNorm();
      }
    }
  }
  return total;
}

// Biased MMD^2 with a Gaussian kernel exp(-d^2 / (2 sigma^2)), from the
// three kernel means.
inline double mmd_reference(const Matrix& x, const Matrix& y, double sigma) {
  auto mean_kernel = [sigma](const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < b.rows(); ++j) {
        s += std::exp(-(a.row(i) - b.row(j)).squaredNorm() / (2.0 * sigma * sigma));
      }
    }
    return s / static_cast<double>(a.rows() * b.rows());
  };
  return mean_kernel(x, x) + mean_kernel(y, y) - 2.0 * mean_kernel(x, y);
}

// AUC by enumerating every (positive, negative) pair; ties count 1/2.
inline double auc_pairwise(std::span<const double> scores, std::span<const Label> labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline double mean_dimension_variance(const Matrix& theta) {
  const Eigen::RowVectorXd mean = theta.colwise().mean();
  const Matrix centered = theta.rowwise() - mean;
  return centered.colwise().squaredNorm().mean() / static_cast<double>(theta.rows());
}

// Two isotropic Gaussians in `dim` dimensions whose means are `separation`
// standard deviations apart along the first axis; the label is the
// component.
struct GaussianFixture {
  Matrix theta;
  AttributeTable labels;
};

inline GaussianFixture two_gaussians(int n, int dim, double separation, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  GaussianFixture f;
  f.theta.resize(n, dim);
  std::vector<Label> y(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    y[static_cast<std::size_t>(u)] = u % 2 == 0 ? 0 : 1;
    for (int k = 0; k < dim; ++k) f.theta(u, k) = normal(rng);
    if (y[static_cast<std::size_t>(u)] == 1) f.theta(u, 0) += separation;
  }
  f.labels = AttributeTable::from_labels(std::move(y));
  return f;
}

// Two isotropic Gaussians with standard deviation `sigma` whose means differ
// by `separation` standard deviations on every axis.
inline GaussianFixture separated_gaussians(int n, int dim, double separation, double sigma,
                                           std::uint64_t seed) {
  GaussianFixture f = two_gaussians(n, dim, 0.0, seed);
  for (int u = 0; u < n; ++u) {
    if (u % 2 == 1) f.theta.row(u).array() += separation;
  }
  f.theta *= sigma;
  return f;
}

// Implicit-feedback interactions where the two groups prefer different
// halves of the catalog, so the label leaks into learned embeddings.
struct SyntheticRatings {
  std::vector<RawInteraction> raw;
  LabelMap labels;
};

inline SyntheticRatings synthetic_ratings(int n_users, int n_items, int per_user,
                                          std::uint64_t seed, double preference = 0.8) {
  Rng rng(seed);
  std::bernoulli_distribution prefers(preference);
  std::uniform_int_distribution<int> half(0, n_items / 2 - 1);
  SyntheticRatings s;
  for (int u = 0; u < n_users; ++u) {
    const Label g = u % 3 == 0 ? 1 : 0;
    const std::string id = std::to_string(u + 1);
    s.labels[id] = g;
    std::set<int> items;
    while (static_cast<int>(items.size()) < per_user) {
      const bool own = prefers(rng);
      const int offset = (g == 1) == own ? n_items / 2 : 0;
      items.insert(offset + half(rng));
    }
    std::int64_t ts = 880000000 + u;
    for (int i : items) {
      s.raw.push_back({id, std::to_string(i + 1), 4.0, ts++});
    }
  }
  return s;
}

// Writes `ratings` and `labels` in the ML-100K layouts (u.data, u.user).
inline void write_ml100k_files(const std::filesystem::path& dir, const SyntheticRatings& s) {
  std::filesystem::create_directories(dir);
  std::ofstream data(dir / "u.data");
  for (const auto& r : s.raw) {
    data << r.user << '\t' << r.item << '\t' << r.rating << '\t' << r.timestamp << '\n';
  }
  std::ofstream users(dir / "u.user");
  for (const auto& [id, g] : s.labels) {
    users << id << "|30|" << (g == kFemale ? 'F' : 'M') << "|other|00000\n";
  }
}

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            str_cat("attrunlearn-", tag, "-", hex64((std::uint64_t{rd()} << 32) | rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path ml100k_dir() {
  return std::filesystem::path(ATTRUNLEARN_DATA_DIR) / "ml-100k";
}

}  // namespace attrunlearn::testing
