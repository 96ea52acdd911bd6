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

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace dgn {

namespace fs = std::filesystem;

std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

namespace {

std::string cell_string(Index i, Index j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

std::string where(const std::string& id, Index v) {
  return "subject '" + id + "' view " + std::to_string(v);
}

}  // namespace

SubjectTensor::SubjectTensor(std::string id, std::vector<Matrix> views)
    : id_(std::move(id)), views_(std::move(views)) {
  if (views_.empty()) throw DataError("subject '" + id_ + "' has no views");
  const Index n = views_.front().rows();
  for (std::size_t v = 0; v < views_.size(); ++v) {
    Matrix& m = views_[v];
    const auto vi = static_cast<Index>(v);
    if (m.rows() != m.cols()) {
      throw DataError(where(id_, vi) + ": matrix is not square (" + shape_string(m) + ")");
    }
    if (m.rows() != n) {
      throw DataError(where(id_, vi) + ": " + std::to_string(m.rows()) +
                      " nodes, expected " + std::to_string(n));
    }
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) {
        const double x = m(i, j);
        if (!std::isfinite(x)) {
          throw DataError(where(id_, vi) + ": non-finite entry at " + cell_string(i, j));
        }
        if (x < 0) {
          throw DataError(where(id_, vi) + ": negative entry " + std::to_string(x) + " at " +
                          cell_string(i, j));
        }
      }
    }
    for (Index j = 0; j < n; ++j) {
      for (Index i = j + 1; i < n; ++i) {
        const double gap = std::abs(m(i, j) - m(j, i));
        if (gap > kSymmetryTolerance) {
          throw DataError(where(id_, vi) + ": asymmetry " + std::to_string(gap) + " at " +
                          cell_string(i, j) + " exceeds tolerance");
        }
        const double avg = 0.5 * (m(i, j) + m(j, i));
        m(i, j) = avg;
        m(j, i) = avg;
      }
    }
    m.diagonal().setZero();
  }
}

Vector SubjectTensor::edge(Index i, Index j) const {
  Vector e(n_views());
  for (Index v = 0; v < n_views(); ++v) e(v) = view(v)(i, j);
  return e;
}

Population::Population(std::vector<SubjectTensor> subjects, std::vector<std::string> view_names)
    : subjects_(std::move(subjects)), view_names_(std::move(view_names)) {
  if (subjects_.empty()) throw DataError("population has no subjects");
  n_rois_ = subjects_.front().n_rois();
  n_views_ = subjects_.front().n_views();
  for (const auto& s : subjects_) {
    if (s.n_rois() != n_rois_ || s.n_views() != n_views_) {
      throw DataError("subject '" + s.id() + "' has " + std::to_string(s.n_rois()) + " nodes x " +
                      std::to_string(s.n_views()) + " views, expected " +
                      std::to_string(n_rois_) + " x " + std::to_string(n_views_));
    }
  }
  if (view_names_.empty()) {
    for (Index v = 0; v < n_views_; ++v) view_names_.push_back("view" + std::to_string(v));
  }
  if (static_cast<Index>(view_names_.size()) != n_views_) {
    throw DataError("expected " + std::to_string(n_views_) + " view names, got " +
                    std::to_string(view_names_.size()));
  }
  view_means_ = compute_view_means(subjects_);
  view_lambdas_ = lambdas_from_means(view_means_);
}

Population Population::subset(std::span<const Index> positions) const {
  std::vector<SubjectTensor> picked;
  picked.reserve(positions.size());
  for (Index p : positions) {
    if (p < 0 || p >= size()) {
      throw std::out_of_range("subject position " + std::to_string(p) + " out of range");
    }
    picked.push_back(subject(p));
  }
  return Population(std::move(picked), view_names_);
}

Vector compute_view_means(std::span<const SubjectTensor> subjects) {
  if (subjects.empty()) throw DataError("view means of an empty subject set");
  const Index n_views = subjects.front().n_views();
  Vector means = Vector::Zero(n_views);
  for (const auto& s : subjects) {
    for (Index v = 0; v < n_views; ++v) means(v) += off_diagonal_mean(s.view(v));
  }
  return means / static_cast<double>(subjects.size());
}

Vector lambdas_from_means(const Vector& means) {
  Vector reciprocal(means.size());
  for (Index v = 0; v < means.size(); ++v) {
    if (!(means(v) > 0) || !std::isfinite(means(v))) {
      throw DataError("degenerate view " + std::to_string(v) + ": mean connectivity " +
                      std::to_string(means(v)) + " is not strictly positive");
    }
    reciprocal(v) = 1.0 / means(v);
  }
  return reciprocal / reciprocal.maxCoeff();
}

Vector compute_view_lambdas(const Population& population) {
  return lambdas_from_means(compute_view_means(population.subjects()));
}

Vector compute_view_lambdas(const Population& population, std::span<const Index> positions) {
  std::vector<SubjectTensor> picked;
  picked.reserve(positions.size());
  for (Index p : positions) picked.push_back(population.subject(p));
  return lambdas_from_means(compute_view_means(picked));
}

std::vector<FoldSplit> kfold_split(Index n_subjects, int k, std::uint64_t seed) {
  if (k < 2 || k > n_subjects) {
    throw ConfigError("fold count " + std::to_string(k) + " must lie in [2, " +
                      std::to_string(n_subjects) + "]");
  }
  std::vector<Index> order(static_cast<std::size_t>(n_subjects));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  const Index base = n_subjects / k;
  const Index extra = n_subjects % k;
  Index start = 0;
  for (int f = 0; f < k; ++f) {
    const Index len = base + (f < extra ? 1 : 0);
    FoldSplit& fold = folds[static_cast<std::size_t>(f)];
    fold.fold_id = f;
    fold.test_indices.assign(order.begin() + start, order.begin() + start + len);
    std::sort(fold.test_indices.begin(), fold.test_indices.end());
    std::vector<char> in_test(static_cast<std::size_t>(n_subjects), 0);
    for (Index t : fold.test_indices) in_test[static_cast<std::size_t>(t)] = 1;
    for (Index p = 0; p < n_subjects; ++p) {
      if (!in_test[static_cast<std::size_t>(p)]) fold.train_indices.push_back(p);
    }
    start += len;
  }
  return folds;
}

std::vector<FoldSplit> kfold_split(const Population& population, int k, std::uint64_t seed) {
  return kfold_split(population.size(), k, seed);
}

Matrix read_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open matrix file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r' || *p == ',')) ++p;
      if (p == end) break;
      double x = 0;
      auto [next, ec] = std::from_chars(p, end, x);
      if (ec != std::errc() || next == p) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" +
                        std::string(p, std::find(p, end, ' ')) + "' as a number");
      }
      row.push_back(x);
      p = next;
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  const auto n = static_cast<Index>(rows.size());
  if (n == 0) throw DataError(path.string() + ": empty matrix file");
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Index>(row.size()) != n) {
      throw DataError(path.string() + ": row " + std::to_string(i) + " has " +
                      std::to_string(row.size()) + " entries, expected " + std::to_string(n) +
                      " for a square " + shape_string(n, n) + " matrix");
    }
    for (Index j = 0; j < n; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
  }
  return m;
}

void write_matrix(const fs::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Population load_population(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("manifest not found: " + manifest_path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  try {
    const auto n_rois = doc.at("n_rois").get<Index>();
    const auto n_views = doc.at("n_views").get<Index>();
    std::vector<std::string> names;
    if (doc.contains("view_names")) names = doc.at("view_names").get<std::vector<std::string>>();

    std::vector<SubjectTensor> subjects;
    for (const auto& entry : doc.at("subjects")) {
      const auto id = entry.at("id").get<std::string>();
      const auto files = entry.at("views").get<std::vector<std::string>>();
      if (static_cast<Index>(files.size()) != n_views) {
        throw DataError("subject '" + id + "' lists " + std::to_string(files.size()) +
                        " view files, manifest declares " + std::to_string(n_views));
      }
      std::vector<Matrix> views;
      for (std::size_t v = 0; v < files.size(); ++v) {
        const fs::path file = base / files[v];
        if (!fs::exists(file)) {
          throw DataError(where(id, static_cast<Index>(v)) + ": missing file " + file.string());
        }
        Matrix m = read_matrix(file);
        if (m.rows() != n_rois) {
          throw DataError(where(id, static_cast<Index>(v)) + ": " + file.string() + " is " +
                          shape_string(m) + ", manifest declares " + std::to_string(n_rois) +
                          " nodes");
        }
        views.push_back(std::move(m));
      }
      subjects.emplace_back(id, std::move(views));
    }
    return Population(std::move(subjects), std::move(names));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
}

fs::path save_population(const Population& population, const fs::path& directory) {
  fs::create_directories(directory);
  nlohmann::json doc;
  doc["format"] = "mvbn-manifest";
  doc["version"] = 1;
  doc["n_rois"] = population.n_rois();
  doc["n_views"] = population.n_views();
  doc["view_names"] = population.view_names();
  doc["subjects"] = nlohmann::json::array();
  for (const auto& s : population.subjects()) {
    nlohmann::json files = nlohmann::json::array();
    for (Index v = 0; v < s.n_views(); ++v) {
      const std::string name = s.id() + "_v" + std::to_string(v) + ".txt";
      write_matrix(directory / name, s.view(v));
      files.push_back(name);
    }
    doc["subjects"].push_back({{"id", s.id()}, {"views", files}});
  }
  const fs::path manifest = directory / "manifest.json";
  std::ofstream out(manifest);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + manifest.string());
  return manifest;
}

}  // namespace dgn
