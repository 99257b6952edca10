// Copyright 2026 The OHD Toolkit Authors.
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

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ohd/corpus.hpp"
#include "ohd/encoder.hpp"

namespace ohd {

struct LossConfig {
  double tau1 = 2.0;       // positive-vs-negative margin
  double tau2 = 2.0;       // enhanced-vs-in-batch margin
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  int negatives_per_image = -1;  // -1 = all
  bool learn_logit_scale = true;
  int epochs = 10;
  int batch_size = 8;
  double learning_rate = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;  // throws ValidationError
};

// Similarity logits for one training batch: pos[i][j] = image i vs the
// positive text of sample j (B x B); neg[i][k] = image i vs its own k-th
// enhanced negative (B x K).
struct BatchScores {
  std::size_t b = 0;
  std::size_t k = 0;
  std::vector<double> pos;
  std::vector<double> neg;

  double pos_at(std::size_t i, std::size_t j) const { return pos[i * b + j]; }
  double neg_at(std::size_t i, std::size_t kk) const { return neg[i * k + kk]; }
};

struct LossBreakdown {
  double l_i2t = 0.0;
  double l_t2i = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

// Image-to-text contrastive term; the denominator pools the in-batch
// positives with the image's own enhanced negatives. With k = 0 this is the
// vanilla bidirectional loss's i2t half.
double loss_i2t(const BatchScores& batch);

// Text-to-image term over in-batch images only (enhanced negatives have no
// image side).
double loss_t2i(const BatchScores& batch);

// Hinge pushing each positive pair tau1 above every negative (in-batch and
// enhanced); mean over all applicable pairs, 0 on an empty set.
double margin_positive(const BatchScores& batch, double tau1);

// Hinge pushing enhanced negatives tau2 above in-batch negatives.
double margin_enhanced(const BatchScores& batch, double tau2);

// total = (l_i2t + l_t2i)/2 + lambda1*l1 + lambda2*l2.
LossBreakdown total_loss(const BatchScores& batch, const LossConfig& cfg);

// d(total)/d(score entry), same layout as BatchScores.
struct ScoreGrad {
  std::vector<double> d_pos;
  std::vector<double> d_neg;
};

ScoreGrad total_loss_score_grad(const BatchScores& batch,
                                const LossConfig& cfg);

// Dense gradient of total_loss through the toy encoder.
struct ParamGradient {
  LossBreakdown loss;
  std::vector<double> image_table;
  std::vector<double> text_table;
  double log_logit_scale = 0.0;
};

// negatives[i] holds the enhanced-negative texts of image i; all rows must
// have equal length (rectangular batch).
ParamGradient loss_and_gradient(const ToyEncoderParams& params,
                                std::span<const ImageRecord> images,
                                std::span<const std::string> positives,
                                const std::vector<std::vector<std::string>>& negatives,
                                const LossConfig& cfg);

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;  // mean over the epoch's steps
  std::optional<double> dev_accuracy;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int steps_run = 0;
};

struct TrainOptions {
  int max_steps = 0;  // 0 = run cfg.epochs full epochs
  // Evaluated on a parameter snapshot at each epoch boundary.
  std::function<double(const ToyEncoderParams&)> dev_eval;
};

// Mini-batch SGD over shuffled samples; deterministic given cfg.seed.
TrainResult train(std::span<const ImageRecord> records,
                  const BenchmarkSet& train_set, ToyEncoderParams& params,
                  const LossConfig& cfg, const TrainOptions& options = {});

std::string loss_log_to_string(const TrainResult& result);

}  // namespace ohd
