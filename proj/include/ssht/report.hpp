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

// Run report "ssht-report/1" (JSON) and its per-epoch CSV sidecar, plus the
// ablation table CSVs.

#include <charconv>
#include <filesystem>
#include <sstream>
#include <string>

#include "json.hpp"
#include "ssht/fileio.hpp"
#include "ssht/model_io.hpp"
#include "ssht/pipeline.hpp"

namespace ssht {

inline constexpr const char* kReportFormat = "ssht-report/1";

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline nlohmann::json policy_to_json(const AugmentPolicy& p) {
  std::vector<std::string> pool;
  for (auto op : p.strong_pool) pool.push_back(to_string(op));
  return {{"weak_noise_std", p.weak_noise_std}, {"weak_flip", p.weak_flip},
          {"strong_noise_std", p.strong_noise_std}, {"strong_num_ops", p.strong_num_ops},
          {"strong_pool", pool}, {"rotate_max", p.rotate_max},
          {"scale_range", {p.scale_lo, p.scale_hi}}};
}

inline StrongOp parse_strong_op(const std::string& s) {
  for (StrongOp op : {StrongOp::kJitter, StrongOp::kRotate, StrongOp::kScale,
                      StrongOp::kCoordinateDropout})
    if (to_string(op) == s) return op;
  throw ParseError("unknown strong augmentation '" + s + "'");
}

inline AugmentPolicy policy_from_json(const nlohmann::json& j) {
  AugmentPolicy p;
  p.weak_noise_std = j.at("weak_noise_std").get<double>();
  p.weak_flip = j.at("weak_flip").get<bool>();
  p.strong_noise_std = j.at("strong_noise_std").get<double>();
  p.strong_num_ops = j.at("strong_num_ops").get<int>();
  p.strong_pool.clear();
  for (const auto& s : j.at("strong_pool")) p.strong_pool.push_back(parse_strong_op(s.get<std::string>()));
  p.rotate_max = j.at("rotate_max").get<double>();
  p.scale_lo = j.at("scale_range").at(0).get<double>();
  p.scale_hi = j.at("scale_range").at(1).get<double>();
  return p;
}

inline nlohmann::json config_to_json(const AdaptConfig& c) {
  return {{"method", to_string(c.method)},
          {"tau", c.tau},
          {"lambda_u", c.lambda_u},
          {"lambda_d", c.lambda_d},
          {"lr", c.sgd.learning_rate},
          {"momentum", c.sgd.momentum},
          {"nesterov", c.sgd.nesterov},
          {"weight_decay", c.sgd.weight_decay},
          {"labeled_batch", c.labeled_batch},
          {"unlabeled_batch", c.unlabeled_batch},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"freeze_classifier", c.freeze_classifier},
          {"labeled_aug", to_string(c.labeled_aug)},
          {"augment", c.augment ? policy_to_json(*c.augment) : nlohmann::json(nullptr)},
          {"diversity_batch", c.diversity_batch},
          {"diversity_batches", c.diversity_batches}};
}

inline AdaptConfig config_from_json(const nlohmann::json& j) {
  AdaptConfig c;
  c.method = parse_method(j.at("method").get<std::string>());
  c.tau = j.at("tau").get<double>();
  c.lambda_u = j.at("lambda_u").get<double>();
  c.lambda_d = j.at("lambda_d").get<double>();
  c.sgd.learning_rate = j.at("lr").get<double>();
  c.sgd.momentum = j.at("momentum").get<double>();
  c.sgd.nesterov = j.at("nesterov").get<bool>();
  c.sgd.weight_decay = j.at("weight_decay").get<double>();
  c.labeled_batch = j.at("labeled_batch").get<std::size_t>();
  c.unlabeled_batch = j.at("unlabeled_batch").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.freeze_classifier = j.at("freeze_classifier").get<bool>();
  c.labeled_aug = parse_labeled_aug(j.at("labeled_aug").get<std::string>());
  if (!j.at("augment").is_null()) c.augment = policy_from_json(j.at("augment"));
  c.diversity_batch = j.at("diversity_batch").get<std::size_t>();
  c.diversity_batches = j.at("diversity_batches").get<std::size_t>();
  return c;
}

}  // namespace detail

inline std::string serialize_report(const RunReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"l_c", e.l_c},
                      {"l_u", e.l_u},
                      {"l_d", e.l_d},
                      {"total", e.total},
                      {"mask_rate", e.mask_rate},
                      {"train_accuracy", e.train_accuracy},
                      {"test_accuracy", e.test_accuracy},
                      {"diversity_ratio", e.diversity_ratio}});
  nlohmann::json doc = {
      {"format", kReportFormat},
      {"config", detail::config_to_json(r.config)},
      {"augment", detail::policy_to_json(r.augment)},
      {"epochs", std::move(epochs)},
      {"final",
       {{"accuracy", r.final_eval.accuracy},
        {"per_class_accuracy", r.final_eval.per_class_accuracy},
        {"confusion", r.final_eval.confusion}}},
      {"passes",
       {{"labeled", r.passes.labeled},
        {"unlabeled_weak", r.passes.unlabeled_weak},
        {"unlabeled_strong", r.passes.unlabeled_strong}}},
      {"model_fingerprint", r.model_fingerprint},
      {"status", r.status},
      {"log_clamps", r.log_clamps}};
  return doc.dump(1) + "\n";
}

inline RunReport deserialize_report(const std::string& bytes) {
  return detail::rethrow_as_parse_error("report file", [&] {
    const auto doc = nlohmann::json::parse(bytes);
    const auto format = doc.at("format").get<std::string>();
    if (format != kReportFormat)
      throw ParseError("report file: unsupported format '" + format + "', expected " +
                       kReportFormat);
    RunReport r;
    r.config = detail::config_from_json(doc.at("config"));
    r.augment = detail::policy_from_json(doc.at("augment"));
    for (const auto& e : doc.at("epochs"))
      r.epochs.push_back({e.at("epoch").get<std::size_t>(), e.at("l_c").get<double>(),
                          e.at("l_u").get<double>(), e.at("l_d").get<double>(),
                          e.at("total").get<double>(), e.at("mask_rate").get<double>(),
                          e.at("train_accuracy").get<double>(), e.at("test_accuracy").get<double>(),
                          e.at("diversity_ratio").get<double>()});
    const auto& f = doc.at("final");
    r.final_eval.accuracy = f.at("accuracy").get<double>();
    r.final_eval.per_class_accuracy = f.at("per_class_accuracy").get<std::vector<double>>();
    r.final_eval.confusion = f.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    const auto& p = doc.at("passes");
    r.passes = {p.at("labeled").get<std::size_t>(), p.at("unlabeled_weak").get<std::size_t>(),
                p.at("unlabeled_strong").get<std::size_t>()};
    r.model_fingerprint = doc.at("model_fingerprint").get<std::string>();
    r.status = doc.at("status").get<std::string>();
    r.log_clamps = doc.at("log_clamps").get<std::size_t>();
    return r;
  });
}

inline std::string epoch_csv(const RunReport& r) {
  std::ostringstream out;
  out << "epoch,l_c,l_u,l_d,total,mask_rate,test_acc,diversity_ratio\n";
  for (const auto& e : r.epochs)
    out << e.epoch << ',' << format_double(e.l_c) << ',' << format_double(e.l_u) << ','
        << format_double(e.l_d) << ',' << format_double(e.total) << ','
        << format_double(e.mask_rate) << ',' << format_double(e.test_accuracy) << ','
        << format_double(e.diversity_ratio) << '\n';
  return out.str();
}

/// Sidecar path: "run.json" -> "run.csv".
inline std::filesystem::path csv_sidecar(const std::filesystem::path& report_path) {
  auto p = report_path;
  p.replace_extension(".csv");
  return p;
}

inline void write_report(const RunReport& r, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_report(r));
  write_file_atomic(csv_sidecar(path), epoch_csv(r));
}

inline RunReport read_report(const std::filesystem::path& path) {
  return deserialize_report(read_file(path));
}

/// One row per (method, seed) cell.
inline std::string ablation_csv(const AblationTable& t) {
  std::ostringstream out;
  out << "method,seed,final_acc,diversity_ratio,minority_recall,majority_recall,model_fingerprint,"
         "status\n";
  for (const auto& c : t.cells) {
    std::string status = c.error.empty() ? (c.report ? c.report->status : "missing") : c.error;
    for (char& ch : status)
      if (ch == ',' || ch == '\n') ch = ';';
    out << to_string(c.method) << ',' << c.seed << ',' << format_double(c.final_accuracy) << ','
        << format_double(c.diversity_ratio) << ',' << format_double(c.minority_recall) << ','
        << format_double(c.majority_recall) << ','
        << (c.report ? c.report->model_fingerprint : std::string()) << ',' << status << '\n';
  }
  return out.str();
}

inline std::string ablation_summary_csv(const AblationTable& t) {
  std::ostringstream out;
  out << "method,runs,mean_acc,std_acc,mean_diversity,std_diversity,mean_minority_recall\n";
  for (const auto& s : t.summary)
    out << to_string(s.method) << ',' << s.runs << ',' << format_double(s.mean_accuracy) << ','
        << format_double(s.std_accuracy) << ',' << format_double(s.mean_diversity) << ','
        << format_double(s.std_diversity) << ',' << format_double(s.mean_minority_recall) << '\n';
  return out.str();
}

}  // namespace ssht
