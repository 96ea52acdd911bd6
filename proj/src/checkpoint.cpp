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

#include "dgn/model.hpp"

#include <json.hpp>

#include <fstream>

namespace dgn {

namespace fs = std::filesystem;
using nlohmann::json;

void save_checkpoint(const DgnModel& model, const fs::path& path) {
  json doc;
  doc["format"] = "dgn-checkpoint";
  doc["version"] = 1;
  doc["seed"] = model.seed();
  doc["config"] = {{"dims", model.config().dims},
                   {"n_views", model.config().n_views},
                   {"filter_hidden", model.config().filter_hidden}};
  const auto names = model.parameter_names();
  const auto tensors = model.parameter_tensors();
  doc["parameters"] = json::array();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    std::vector<double> values(tensors[k].data(), tensors[k].data() + tensors[k].size());
    doc["parameters"].push_back({{"name", names[k]}, {"shape", tensors[k].shape()}, {"values", values}});
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << doc.dump(1) << '\n';
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

DgnModel load_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("checkpoint not found: " + path.string());
  try {
    json doc;
    in >> doc;
    if (doc.at("format") != "dgn-checkpoint") throw DataError(path.string() + " is not a dgn checkpoint");
    ModelConfig config;
    config.dims = doc.at("config").at("dims").get<std::vector<Index>>();
    config.n_views = doc.at("config").at("n_views").get<Index>();
    config.filter_hidden = doc.at("config").at("filter_hidden").get<Index>();
    const auto seed = doc.at("seed").get<std::uint64_t>();

    DgnModel model = init_parameters(config, seed);
    const auto names = model.parameter_names();
    const auto& params = doc.at("parameters");
    if (params.size() != names.size()) {
      throw DataError(path.string() + ": expected " + std::to_string(names.size()) + " parameter tensors");
    }
    const auto expected = model.parameter_tensors();
    std::vector<ad::Tensor> tensors;
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto& p = params[k];
      if (p.at("name") != names[k]) {
        throw DataError(path.string() + ": parameter " + std::to_string(k) + " should be " + names[k]);
      }
      if (p.at("shape").get<ad::Shape>() != expected[k].shape()) {
        throw DataError(path.string() + ": " + names[k] + " should have shape " + ad::to_string(expected[k].shape()));
      }
      const auto values = p.at("values").get<std::vector<double>>();
      tensors.emplace_back(p.at("shape").get<ad::Shape>(),
                           Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size())));
    }
    model.set_parameters(tensors);
    return model;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace dgn
