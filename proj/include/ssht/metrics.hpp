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

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "ssht/diffnet.hpp"
#include "ssht/rng.hpp"
#include "ssht/synthdata.hpp"

namespace ssht {

struct DiversityRecord {
  std::size_t batch_index = 0;
  std::size_t predicted_categories = 0;
  std::size_t true_categories = 0;
  double ratio = 0.0;
};

/// Distinct predicted classes over distinct true classes in one batch.
inline DiversityRecord diversity_ratio(const std::vector<int>& predictions,
                                       const std::vector<int>& true_labels,
                                       std::size_t batch_index = 0) {
  SSHT_REQUIRE(!predictions.empty(), "diversity_ratio: empty batch");
  SSHT_REQUIRE(predictions.size() == true_labels.size(), "diversity_ratio: ", predictions.size(),
               " predictions vs ", true_labels.size(), " labels");
  const std::set<int> pred(predictions.begin(), predictions.end());
  const std::set<int> truth(true_labels.begin(), true_labels.end());
  return {batch_index, pred.size(), truth.size(),
          static_cast<double>(pred.size()) / static_cast<double>(truth.size())};
}

inline std::vector<int> predict(const Network& net, const Matrix& x) {
  return argmax_rows(forward(net, x).logits);
}

/// Mean diversity ratio over `num_batches` batches drawn without
/// replacement (within a batch) from (x, labels).
inline double aggregate_diversity(const Network& net, const Matrix& x,
                                  const std::vector<int>& labels, std::size_t batch_size,
                                  std::size_t num_batches, Rng& rng) {
  SSHT_REQUIRE(x.rows() == labels.size(), "aggregate_diversity: inputs/labels differ in length");
  SSHT_REQUIRE(batch_size >= 1 && batch_size <= labels.size(), "aggregate_diversity: batch size ",
               batch_size, " must be in [1, ", labels.size(), "]");
  SSHT_REQUIRE(num_batches >= 1, "aggregate_diversity: need at least one batch");
  const auto pred = predict(net, x);
  std::vector<std::size_t> idx(labels.size());
  double sum = 0.0;
  for (std::size_t b = 0; b < num_batches; ++b) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<int> p, t;
    for (std::size_t i = 0; i < batch_size; ++i) {
      p.push_back(pred[idx[i]]);
      t.push_back(labels[idx[i]]);
    }
    sum += diversity_ratio(p, t, b).ratio;
  }
  return sum / static_cast<double>(num_batches);
}

/// Diversity over D^u using its private labels. Evaluation-only.
inline double aggregate_diversity(const Network& net, const DomainTask& task,
                                  std::size_t batch_size, std::size_t num_batches, Rng& rng) {
  return aggregate_diversity(net, task.unlabeled_inputs(), task.unlabeled_labels(), batch_size,
                             num_batches, rng);
}

struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;

  friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

inline Evaluation evaluate_predictions(const std::vector<int>& pred, const std::vector<int>& truth,
                                       std::size_t num_classes) {
  SSHT_REQUIRE(pred.size() == truth.size() && !pred.empty(),
               "evaluate: predictions and labels must be equal-length and non-empty");
  Evaluation e;
  e.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++e.confusion.at(static_cast<std::size_t>(truth[i])).at(static_cast<std::size_t>(pred[i]));
    correct += pred[i] == truth[i];
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto total = std::accumulate(e.confusion[c].begin(), e.confusion[c].end(), std::size_t{0});
    // Classes absent from the set score 0.
    e.per_class_accuracy.push_back(
        total == 0 ? 0.0 : static_cast<double>(e.confusion[c][c]) / static_cast<double>(total));
  }
  return e;
}

inline Evaluation evaluate(const Network& net, const LabeledSet& data) {
  SSHT_REQUIRE(data.x.cols() == net.spec.input_dim, "evaluate: data has ", data.x.cols(),
               " features, model expects ", net.spec.input_dim);
  return evaluate_predictions(predict(net, data.x), data.y, net.spec.num_classes);
}

}  // namespace ssht
