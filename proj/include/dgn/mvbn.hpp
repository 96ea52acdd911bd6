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

// Multi-view network populations: data model, validation, file I/O,
// view statistics, fold splitting and synthetic generation.

#ifndef DGN_MVBN_HPP
#define DGN_MVBN_HPP

#include "dgn/core.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dgn {

/// Tolerance under which an asymmetric input matrix is repaired by (A + A^T) / 2.
inline constexpr double kSymmetryTolerance = 1e-8;

/// One subject: n_v stacked n_r x n_r connectivity views.
///
/// Every view is symmetric, non-negative, finite, with a zero diagonal.
class SubjectTensor {
 public:
  /// Validates the views; throws DataError naming the subject, view and cell
  /// of the first violation. Tolerably asymmetric input is symmetrized and the
  /// diagonal is zeroed before the invariants are checked.
  SubjectTensor(std::string id, std::vector<Matrix> views);

  const std::string& id() const { return id_; }
  Index n_rois() const { return views_.front().rows(); }
  Index n_views() const { return static_cast<Index>(views_.size()); }
  const Matrix& view(Index v) const { return views_[static_cast<std::size_t>(v)]; }
  const std::vector<Matrix>& views() const { return views_; }

  /// The n_v attributes of edge (i, j).
  Vector edge(Index i, Index j) const;

 private:
  std::string id_;
  std::vector<Matrix> views_;
};

/// Ordered subjects sharing (n_r, n_v), plus per-view statistics.
class Population {
 public:
  /// Throws DataError on empty input or inconsistent dimensions, and on a
  /// degenerate view (zero mean).
  Population(std::vector<SubjectTensor> subjects, std::vector<std::string> view_names = {});

  Index size() const { return static_cast<Index>(subjects_.size()); }
  Index n_rois() const { return n_rois_; }
  Index n_views() const { return n_views_; }
  const std::vector<SubjectTensor>& subjects() const { return subjects_; }
  const SubjectTensor& subject(Index s) const { return subjects_[static_cast<std::size_t>(s)]; }
  const std::vector<std::string>& view_names() const { return view_names_; }

  /// mu_v: mean off-diagonal weight of view v over all subjects.
  const Vector& view_means() const { return view_means_; }
  /// lambda_v = (1 / mu_v) / max_j (1 / mu_j).
  const Vector& view_lambdas() const { return view_lambdas_; }

  /// A new population holding the subjects at `positions`, with statistics
  /// recomputed on those subjects only.
  Population subset(std::span<const Index> positions) const;

 private:
  std::vector<SubjectTensor> subjects_;
  std::vector<std::string> view_names_;
  Index n_rois_ = 0;
  Index n_views_ = 0;
  Vector view_means_;
  Vector view_lambdas_;
};

/// Per-view off-diagonal means over the given subjects.
Vector compute_view_means(std::span<const SubjectTensor> subjects);

/// Normalization weights from view means. Throws DataError naming the first
/// view whose mean is not strictly positive.
Vector lambdas_from_means(const Vector& means);

Vector compute_view_lambdas(const Population& population);

/// Statistics restricted to the subjects at `positions` (a training fold).
Vector compute_view_lambdas(const Population& population, std::span<const Index> positions);

struct FoldSplit {
  int fold_id = 0;
  std::vector<Index> train_indices;
  std::vector<Index> test_indices;
};

/// Deterministic shuffled partition of 0..n-1 into k folds whose test sizes
/// differ by at most one. Index lists are sorted ascending.
std::vector<FoldSplit> kfold_split(Index n_subjects, int k, std::uint64_t seed);
std::vector<FoldSplit> kfold_split(const Population& population, int k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// File format

/// Reads an n x n whitespace-separated numeric grid, one row per line.
/// Throws DataError naming the file on ragged, non-square or unparsable input.
Matrix read_matrix(const std::filesystem::path& path);

/// Writes with 17 significant digits, which round-trips doubles exactly.
void write_matrix(const std::filesystem::path& path, const Matrix& m);

/// Loads a population from a JSON manifest:
///
///   { "format": "mvbn-manifest", "version": 1,
///     "n_rois": 35, "n_views": 4, "view_names": [...],
///     "subjects": [ { "id": "s000", "views": ["s000_v0.txt", ...] }, ... ] }
///
/// Paths are relative to the manifest's directory.
Population load_population(const std::filesystem::path& manifest_path);

/// Writes `manifest.json` plus one matrix file per (subject, view) under
/// `directory`; returns the manifest path.
std::filesystem::path save_population(const Population& population,
                                      const std::filesystem::path& directory);

// ---------------------------------------------------------------------------
// Synthetic populations

struct SynthConfig {
  Index subjects = 40;
  Index rois = 20;
  Index views = 4;
  /// One scale per view; empty means all ones.
  std::vector<double> view_scales = {1.0, 10.0, 0.1, 5.0};
  Index latent_rank = 3;
  /// Standard deviation of each subject's latent factor around the shared one.
  double latent_spread = 0.15;
  /// Standard deviation of the symmetric per-view noise.
  double noise = 0.05;
  std::vector<Index> planted_nodes;
  /// Shift added to every edge incident to a planted node, in units of the view scale.
  double effect_size = 0.0;
};

/// Each view is scale_v * |L_s L_s^T / rank + E_sv| symmetrized with a zero
/// diagonal, where L_s = L_0 + latent_spread * N(0, 1) around a shared factor
/// L_0 ~ U(0, 1) and E_sv is symmetric N(0, noise^2). Edges incident to planted
/// nodes are then raised by effect_size * scale_v.
Population generate_synthetic(const SynthConfig& config, std::uint64_t seed);

}  // namespace dgn

#endif  // DGN_MVBN_HPP
