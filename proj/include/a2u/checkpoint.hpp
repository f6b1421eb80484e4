/* Copyright (c) 2026 The a2u-lab Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#ifndef A2U_CHECKPOINT_HPP_
#define A2U_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "a2u/nn.hpp"

namespace a2u {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float32; big-endian hosts need a swap pass");

/// Checkpoint layout: a UTF-8 JSON manifest mapping each parameter name to
/// {shape, dtype, offset, nbytes}, plus one raw blob of little-endian float32
/// values concatenated in manifest order.
template <typename T>
void save_checkpoint(const ParamRegistry<T>& params, const std::string& manifest_path,
                     const std::string& blob_path) {
  nlohmann::ordered_json manifest = nlohmann::ordered_json::object();
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot open checkpoint blob for writing: " + blob_path);
  int64_t offset = 0;
  for (const auto& e : params.entries()) {
    const int64_t nbytes = e.tensor.size() * static_cast<int64_t>(sizeof(float));
    manifest[e.name] = {{"shape", e.tensor.shape()},
                        {"dtype", "f32"},
                        {"offset", offset},
                        {"nbytes", nbytes}};
    for (int64_t i = 0; i < e.tensor.size(); ++i) {
      const float v = static_cast<float>(e.tensor[i]);
      blob.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
    offset += nbytes;
  }
  if (!blob) throw IoError("short write on checkpoint blob: " + blob_path);
  std::ofstream mf(manifest_path);
  if (!mf) throw IoError("cannot open checkpoint manifest for writing: " + manifest_path);
  mf << manifest.dump(2) << "\n";
  if (!mf) throw IoError("short write on checkpoint manifest: " + manifest_path);
}

template <typename T>
void load_checkpoint(ParamRegistry<T>& params, const std::string& manifest_path,
                     const std::string& blob_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw IoError("cannot open checkpoint manifest: " + manifest_path);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest " + manifest_path + ": " + e.what());
  }
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot open checkpoint blob: " + blob_path);

  for (auto& e : params.entries()) {
    A2U_CHECK(manifest.contains(e.name), "checkpoint is missing parameter '" << e.name << "'");
    const auto& desc = manifest.at(e.name);
    const Shape shape = desc.at("shape").get<Shape>();
    A2U_CHECK(shape == e.tensor.shape(), "checkpoint shape " << shape_str(shape) << " vs model "
                                                             << shape_str(e.tensor.shape())
                                                             << " for '" << e.name << "'");
    A2U_CHECK(desc.at("dtype").get<std::string>() == "f32",
              "unsupported dtype for '" << e.name << "'");
    const int64_t offset = desc.at("offset").get<int64_t>();
    const int64_t nbytes = desc.at("nbytes").get<int64_t>();
    A2U_CHECK(nbytes == e.tensor.size() * static_cast<int64_t>(sizeof(float)),
              "checkpoint byte length mismatch for '" << e.name << "'");
    blob.seekg(offset);
    for (int64_t i = 0; i < e.tensor.size(); ++i) {
      float v;
      blob.read(reinterpret_cast<char*>(&v), sizeof(float));
      e.tensor[i] = static_cast<T>(v);
    }
    if (!blob) throw IoError("truncated checkpoint blob: " + blob_path);
  }
}

}  // namespace a2u

#endif  // A2U_CHECKPOINT_HPP_
