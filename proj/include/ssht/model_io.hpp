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

// Model file "ssht-model/1": a JSON document holding the network spec, the
// init seed, header annotations and every parameter tensor as a row-major
// array of doubles. Doubles are written in shortest round-trip form, so
// parse(serialize(net)) is bit-exact.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "ssht/diffnet.hpp"
#include "ssht/error.hpp"
#include "ssht/fileio.hpp"

namespace ssht {

inline constexpr const char* kModelFormat = "ssht-model/1";

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  if (rows == 0 || cols == 0 || data.size() != rows * cols)
    throw ParseError(concat(what, ": declared shape ", rows, "x", cols, " does not match ",
                            data.size(), " stored values"));
  return Matrix(rows, cols, std::move(data));
}

inline nlohmann::json spec_to_json(const NetworkSpec& s) {
  return {{"input_dim", s.input_dim},
          {"hidden_dims", s.hidden_dims},
          {"feature_dim", s.feature_dim},
          {"num_classes", s.num_classes},
          {"activation", to_string(s.activation)}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  s.feature_dim = j.at("feature_dim").get<std::size_t>();
  s.num_classes = j.at("num_classes").get<std::size_t>();
  s.activation = parse_activation(j.at("activation").get<std::string>());
  return s;
}

template <typename Fn>
auto rethrow_as_parse_error(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

}  // namespace detail

inline std::string serialize(const Network& net) {
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    auto p = detail::matrix_to_json(net.params[i]);
    p["name"] = net.param_name(i);
    params.push_back(std::move(p));
  }
  nlohmann::json doc = {{"format", kModelFormat},
                        {"spec", detail::spec_to_json(net.spec)},
                        {"seed", net.seed},
                        {"info", net.info},
                        {"params", std::move(params)}};
  return doc.dump(1) + "\n";
}

inline Network deserialize(const std::string& bytes) {
  return detail::rethrow_as_parse_error("model file", [&] {
    const auto doc = nlohmann::json::parse(bytes);
    const auto format = doc.at("format").get<std::string>();
    if (format != kModelFormat)
      throw ParseError("model file: unsupported format '" + format + "', expected " +
                       kModelFormat);
    Network net;
    net.spec = detail::spec_from_json(doc.at("spec"));
    net.spec.validate();
    net.seed = doc.at("seed").get<std::uint64_t>();
    net.info = doc.at("info").get<std::map<std::string, std::string>>();
    const auto& params = doc.at("params");
    for (std::size_t i = 0; i < params.size(); ++i)
      net.params.push_back(detail::matrix_from_json(params[i], "param " + std::to_string(i)));
    try {
      net.validate();
    } catch (const ValidationError& e) {
      throw ParseError(std::string("model file: ") + e.what());
    }
    return net;
  });
}

inline void save_model(const Network& net, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(net));
}

inline Network load_model(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace ssht
