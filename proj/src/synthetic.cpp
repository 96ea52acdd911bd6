// Copyright 2026 The DGN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dgn/mvbn.hpp"

#include <cstdio>
#include <random>

namespace dgn {

namespace {

void validate(const SynthConfig& c) {
  if (c.subjects <= 0 || c.rois <= 1 || c.views <= 0 || c.latent_rank <= 0) {
    throw ConfigError("synthetic population needs subjects >= 1, rois >= 2, views >= 1, rank >= 1");
  }
  if (!c.view_scales.empty() && static_cast<Index>(c.view_scales.size()) != c.views) {
    throw ConfigError("expected " + std::to_string(c.views) + " view scales, got " +
                      std::to_string(c.view_scales.size()));
  }
  for (double s : c.view_scales) {
    if (!(s > 0) || !std::isfinite(s)) throw ConfigError("view scales must be positive");
  }
  if (c.latent_spread < 0 || c.noise < 0 || c.effect_size < 0) {
    throw ConfigError("spread, noise and effect size must be non-negative");
  }
  for (Index p : c.planted_nodes) {
    if (p < 0 || p >= c.rois) throw ConfigError("planted node " + std::to_string(p) + " out of range");
  }
}

}  // namespace

Population generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  validate(config);
  const Index n = config.rois;
  const Index rank = config.latent_rank;
  std::vector<double> scales = config.view_scales;
  if (scales.empty()) scales.assign(static_cast<std::size_t>(config.views), 1.0);

  std::vector<char> planted(static_cast<std::size_t>(n), 0);
  for (Index p : config.planted_nodes) planted[static_cast<std::size_t>(p)] = 1;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix shared(n, rank);
  for (Index j = 0; j < rank; ++j)
    for (Index i = 0; i < n; ++i) shared(i, j) = unit(rng);

  std::vector<SubjectTensor> subjects;
  subjects.reserve(static_cast<std::size_t>(config.subjects));
  for (Index s = 0; s < config.subjects; ++s) {
    Matrix latent = shared;
    for (Index j = 0; j < rank; ++j)
      for (Index i = 0; i < n; ++i) latent(i, j) += config.latent_spread * gauss(rng);
    const Matrix structure = latent * latent.transpose() / static_cast<double>(rank);

    std::vector<Matrix> views;
    for (Index v = 0; v < config.views; ++v) {
      const double scale = scales[static_cast<std::size_t>(v)];
      Matrix m(n, n);
      for (Index j = 0; j < n; ++j) {
        m(j, j) = 0.0;
        for (Index i = j + 1; i < n; ++i) {
          double x = scale * std::abs(structure(i, j) + config.noise * gauss(rng));
          if (planted[static_cast<std::size_t>(i)] || planted[static_cast<std::size_t>(j)]) {
            x += config.effect_size * scale;
          }
          m(i, j) = x;
          m(j, i) = x;
        }
      }
      views.push_back(std::move(m));
    }
    char id[32];
    std::snprintf(id, sizeof id, "s%03lld", static_cast<long long>(s));
    subjects.emplace_back(id, std::move(views));
  }
  return Population(std::move(subjects));
}

}  // namespace dgn
