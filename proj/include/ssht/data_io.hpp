/**
 * Copyright 2026 The SSHT Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Dataset file "ssht-data/1": generator spec and sizes, the source set, the
// target pool and the three split index lists into the pool.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "ssht/fileio.hpp"
#include "ssht/model_io.hpp"
#include "ssht/synthdata.hpp"

namespace ssht {

inline constexpr const char* kDataFormat = "ssht-data/1";

namespace detail {

inline nlohmann::json set_to_json(const LabeledSet& s) {
  return {{"x", matrix_to_json(s.x)}, {"y", s.y}};
}

inline LabeledSet set_from_json(const nlohmann::json& j, const std::string& what) {
  LabeledSet s{matrix_from_json(j.at("x"), what), j.at("y").get<std::vector<int>>()};
  if (s.x.rows() != s.y.size())
    throw ParseError(what + ": " + std::to_string(s.x.rows()) + " samples but " +
                     std::to_string(s.y.size()) + " labels");
  return s;
}

}  // namespace detail

inline nlohmann::json domain_spec_to_json(const DomainShiftSpec& s) {
  return {{"num_classes", s.num_classes},
          {"input_dim", s.input_dim},
          {"class_geometry", to_string(s.geometry)},
          {"ring_radius", s.ring_radius},
          {"shift_rotation", s.shift_rotation},
          {"shift_translation", s.shift_translation},
          {"shift_scale", s.shift_scale},
          {"source_imbalance_ratio", s.source_imbalance_ratio},
          {"noise_std", s.noise_std}};
}

inline DomainShiftSpec domain_spec_from_json(const nlohmann::json& j) {
  DomainShiftSpec s;
  s.num_classes = j.at("num_classes").get<std::size_t>();
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.geometry = parse_geometry(j.at("class_geometry").get<std::string>());
  s.ring_radius = j.at("ring_radius").get<double>();
  s.shift_rotation = j.at("shift_rotation").get<double>();
  s.shift_translation = j.at("shift_translation").get<std::vector<double>>();
  s.shift_scale = j.at("shift_scale").get<double>();
  s.source_imbalance_ratio = j.at("source_imbalance_ratio").get<double>();
  s.noise_std = j.at("noise_std").get<double>();
  return s;
}

inline std::string serialize_task(const DomainTask& t) {
  const auto& sz = t.sizes();
  nlohmann::json doc = {
      {"format", kDataFormat},
      {"seed", t.seed()},
      {"spec", domain_spec_to_json(t.spec())},
      {"sizes",
       {{"source", sz.source}, {"shots", sz.shots}, {"unlabeled", sz.unlabeled}, {"test", sz.test}}},
      {"source", detail::set_to_json(t.raw_source())},
      {"target", detail::set_to_json(t.raw_target())},
      {"splits",
       {{"labeled", t.labeled_indices()},
        {"unlabeled", t.unlabeled_indices()},
        {"test", t.test_indices()}}}};
  return doc.dump(1) + "\n";
}

inline DomainTask deserialize_task(const std::string& bytes) {
  return detail::rethrow_as_parse_error("data file", [&] {
    const auto doc = nlohmann::json::parse(bytes);
    const auto format = doc.at("format").get<std::string>();
    if (format != kDataFormat)
      throw ParseError("data file: unsupported format '" + format + "', expected " + kDataFormat);
    const auto& sz = doc.at("sizes");
    TaskSizes sizes{sz.at("source").get<std::size_t>(), sz.at("shots").get<std::size_t>(),
                    sz.at("unlabeled").get<std::size_t>(), sz.at("test").get<std::size_t>()};
    const auto& splits = doc.at("splits");
    try {
      return DomainTask(domain_spec_from_json(doc.at("spec")), sizes,
                        doc.at("seed").get<std::uint64_t>(),
                        detail::set_from_json(doc.at("source"), "source"),
                        detail::set_from_json(doc.at("target"), "target"),
                        splits.at("labeled").get<std::vector<std::size_t>>(),
                        splits.at("unlabeled").get<std::vector<std::size_t>>(),
                        splits.at("test").get<std::vector<std::size_t>>());
    } catch (const ValidationError& e) {
      throw ParseError(std::string("data file: ") + e.what());
    }
  });
}

inline void save_task(const DomainTask& t, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_task(t));
}

inline DomainTask load_task(const std::filesystem::path& path) {
  return deserialize_task(read_file(path));
}

}  // namespace ssht
