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

#include "ohd/objective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "ohd/errors.hpp"
#include "ohd/rng.hpp"

namespace ohd {

void LossConfig::validate() const {
  if (tau1 < 0.0 || tau2 < 0.0) throw ValidationError("margins must be >= 0");
  if (lambda1 < 0.0 || lambda2 < 0.0) {
    throw ValidationError("loss weights must be >= 0");
  }
  if (!(learning_rate >= 0.0)) {
    throw ValidationError("learning_rate must be >= 0");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
}

namespace {

void check_finite(const BatchScores& batch) {
  for (const auto* v : {&batch.pos, &batch.neg}) {
    for (double x : *v) {
      if (!std::isfinite(x)) throw NumericError("non-finite score in batch");
    }
  }
  if (batch.pos.size() != batch.b * batch.b ||
      batch.neg.size() != batch.b * batch.k) {
    throw ValidationError("batch score shape mismatch");
  }
}

// log(sum(exp(x))) over pos row i plus neg row i, stable.
double row_logsumexp(const BatchScores& batch, std::size_t i) {
  double mx = -HUGE_VAL;
  for (std::size_t j = 0; j < batch.b; ++j) mx = std::max(mx, batch.pos_at(i, j));
  for (std::size_t kk = 0; kk < batch.k; ++kk) {
    mx = std::max(mx, batch.neg_at(i, kk));
  }
  double s = 0.0;
  for (std::size_t j = 0; j < batch.b; ++j) {
    s += std::exp(batch.pos_at(i, j) - mx);
  }
  for (std::size_t kk = 0; kk < batch.k; ++kk) {
    s += std::exp(batch.neg_at(i, kk) - mx);
  }
  return mx + std::log(s);
}

double col_logsumexp(const BatchScores& batch, std::size_t j) {
  double mx = -HUGE_VAL;
  for (std::size_t i = 0; i < batch.b; ++i) mx = std::max(mx, batch.pos_at(i, j));
  double s = 0.0;
  for (std::size_t i = 0; i < batch.b; ++i) {
    s += std::exp(batch.pos_at(i, j) - mx);
  }
  return mx + std::log(s);
}

}  // namespace

double loss_i2t(const BatchScores& batch) {
  check_finite(batch);
  if (batch.b == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.b; ++i) {
    total += row_logsumexp(batch, i) - batch.pos_at(i, i);
  }
  return total / static_cast<double>(batch.b);
}

double loss_t2i(const BatchScores& batch) {
  check_finite(batch);
  if (batch.b == 0) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < batch.b; ++j) {
    total += col_logsumexp(batch, j) - batch.pos_at(j, j);
  }
  return total / static_cast<double>(batch.b);
}

double margin_positive(const BatchScores& batch, double tau1) {
  check_finite(batch);
  const std::size_t per_image = (batch.b > 0 ? batch.b - 1 : 0) + batch.k;
  const std::size_t n = batch.b * per_image;
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.b; ++i) {
    const double pos_ii = batch.pos_at(i, i);
    for (std::size_t j = 0; j < batch.b; ++j) {
      if (j == i) continue;
      total += std::max(0.0, tau1 - pos_ii + batch.pos_at(i, j));
    }
    for (std::size_t kk = 0; kk < batch.k; ++kk) {
      total += std::max(0.0, tau1 - pos_ii + batch.neg_at(i, kk));
    }
  }
  return total / static_cast<double>(n);
}

double margin_enhanced(const BatchScores& batch, double tau2) {
  check_finite(batch);
  if (batch.k == 0 || batch.b < 2) return 0.0;
  const std::size_t n = batch.b * batch.k * (batch.b - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.b; ++i) {
    for (std::size_t kk = 0; kk < batch.k; ++kk) {
      const double neg_ik = batch.neg_at(i, kk);
      for (std::size_t j = 0; j < batch.b; ++j) {
        if (j == i) continue;
        total += std::max(0.0, tau2 - neg_ik + batch.pos_at(i, j));
      }
    }
  }
  return total / static_cast<double>(n);
}

LossBreakdown total_loss(const BatchScores& batch, const LossConfig& cfg) {
  LossBreakdown out;
  out.l_i2t = loss_i2t(batch);
  out.l_t2i = loss_t2i(batch);
  out.l1 = margin_positive(batch, cfg.tau1);
  out.l2 = margin_enhanced(batch, cfg.tau2);
  out.total = 0.5 * (out.l_i2t + out.l_t2i) + cfg.lambda1 * out.l1 +
              cfg.lambda2 * out.l2;
  return out;
}

ScoreGrad total_loss_score_grad(const BatchScores& batch,
                                const LossConfig& cfg) {
  check_finite(batch);
  const std::size_t b = batch.b, k = batch.k;
  ScoreGrad g;
  g.d_pos.assign(b * b, 0.0);
  g.d_neg.assign(b * k, 0.0);
  if (b == 0) return g;
  const double inv_b = 1.0 / static_cast<double>(b);

  // i2t: per-row softmax over {pos row, neg row}, weight 1/2 in the total.
  for (std::size_t i = 0; i < b; ++i) {
    const double lse = row_logsumexp(batch, i);
    for (std::size_t j = 0; j < b; ++j) {
      const double p = std::exp(batch.pos_at(i, j) - lse);
      g.d_pos[i * b + j] += 0.5 * inv_b * (p - (i == j ? 1.0 : 0.0));
    }
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double p = std::exp(batch.neg_at(i, kk) - lse);
      g.d_neg[i * k + kk] += 0.5 * inv_b * p;
    }
  }

  // t2i: per-column softmax over images.
  for (std::size_t j = 0; j < b; ++j) {
    const double lse = col_logsumexp(batch, j);
    for (std::size_t i = 0; i < b; ++i) {
      const double p = std::exp(batch.pos_at(i, j) - lse);
      g.d_pos[i * b + j] += 0.5 * inv_b * (p - (i == j ? 1.0 : 0.0));
    }
  }

  // L1 hinge: active terms move pos[i][i] up and the offending score down.
  const std::size_t per_image = (b - 1) + k;
  if (cfg.lambda1 > 0.0 && per_image > 0) {
    const double w = cfg.lambda1 / static_cast<double>(b * per_image);
    for (std::size_t i = 0; i < b; ++i) {
      const double pos_ii = batch.pos_at(i, i);
      for (std::size_t j = 0; j < b; ++j) {
        if (j == i) continue;
        if (cfg.tau1 - pos_ii + batch.pos_at(i, j) > 0.0) {
          g.d_pos[i * b + i] -= w;
          g.d_pos[i * b + j] += w;
        }
      }
      for (std::size_t kk = 0; kk < k; ++kk) {
        if (cfg.tau1 - pos_ii + batch.neg_at(i, kk) > 0.0) {
          g.d_pos[i * b + i] -= w;
          g.d_neg[i * k + kk] += w;
        }
      }
    }
  }

  // L2 hinge between enhanced and in-batch negatives.
  if (cfg.lambda2 > 0.0 && k > 0 && b >= 2) {
    const double w = cfg.lambda2 / static_cast<double>(b * k * (b - 1));
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double neg_ik = batch.neg_at(i, kk);
        for (std::size_t j = 0; j < b; ++j) {
          if (j == i) continue;
          if (cfg.tau2 - neg_ik + batch.pos_at(i, j) > 0.0) {
            g.d_neg[i * k + kk] -= w;
            g.d_pos[i * b + j] += w;
          }
        }
      }
    }
  }
  return g;
}

ParamGradient loss_and_gradient(const ToyEncoderParams& params,
                                std::span<const ImageRecord> images,
                                std::span<const std::string> positives,
                                const std::vector<std::vector<std::string>>& negatives,
                                const LossConfig& cfg) {
  const std::size_t b = images.size();
  if (positives.size() != b || negatives.size() != b) {
    throw ValidationError("batch arrays must have equal length");
  }
  const std::size_t k = b > 0 ? negatives.front().size() : 0;
  for (const auto& row : negatives) {
    if (row.size() != k) {
      throw ValidationError("ragged enhanced-negative batch");
    }
  }
  const std::size_t d = params.embed_dim;
  const double g_scale = params.logit_scale();
  const bool clamped = std::exp(params.log_logit_scale) > 100.0;

  std::vector<EncodedTrace> img_traces, txt_traces;
  std::vector<std::vector<EncodedTrace>> neg_traces(b);
  img_traces.reserve(b);
  txt_traces.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    img_traces.push_back(encode_image_traced(images[i], params));
    txt_traces.push_back(encode_text_traced(positives[i], params));
    for (const auto& t : negatives[i]) {
      neg_traces[i].push_back(encode_text_traced(t, params));
    }
  }

  BatchScores batch;
  batch.b = b;
  batch.k = k;
  batch.pos.resize(b * b);
  batch.neg.resize(b * k);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      batch.pos[i * b + j] =
          g_scale * img_traces[i].embedding.dot(txt_traces[j].embedding);
    }
    for (std::size_t kk = 0; kk < k; ++kk) {
      batch.neg[i * k + kk] =
          g_scale * img_traces[i].embedding.dot(neg_traces[i][kk].embedding);
    }
  }

  ParamGradient out;
  out.loss = total_loss(batch, cfg);
  out.image_table.assign(params.image_table.size(), 0.0);
  out.text_table.assign(params.text_table.size(), 0.0);

  const ScoreGrad sg = total_loss_score_grad(batch, cfg);

  // d(total)/d(log_logit_scale): scores scale linearly with exp(ls) below
  // the clamp, so the chain factor is the score itself.
  if (!clamped) {
    double d_ls = 0.0;
    for (std::size_t idx = 0; idx < batch.pos.size(); ++idx) {
      d_ls += sg.d_pos[idx] * batch.pos[idx];
    }
    for (std::size_t idx = 0; idx < batch.neg.size(); ++idx) {
      d_ls += sg.d_neg[idx] * batch.neg[idx];
    }
    out.log_logit_scale = d_ls;
  }

  std::vector<double> d_emb(d);
  for (std::size_t i = 0; i < b; ++i) {
    // image embedding gradient
    std::fill(d_emb.begin(), d_emb.end(), 0.0);
    for (std::size_t j = 0; j < b; ++j) {
      const double w = g_scale * sg.d_pos[i * b + j];
      const auto& t = txt_traces[j].embedding.values;
      for (std::size_t c = 0; c < d; ++c) d_emb[c] += w * t[c];
    }
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double w = g_scale * sg.d_neg[i * k + kk];
      const auto& u = neg_traces[i][kk].embedding.values;
      for (std::size_t c = 0; c < d; ++c) d_emb[c] += w * u[c];
    }
    accumulate_table_grad(img_traces[i], d_emb, out.image_table, d);

    // enhanced-negative text gradients
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double w = g_scale * sg.d_neg[i * k + kk];
      const auto& e = img_traces[i].embedding.values;
      for (std::size_t c = 0; c < d; ++c) d_emb[c] = w * e[c];
      accumulate_table_grad(neg_traces[i][kk], d_emb, out.text_table, d);
    }
  }
  for (std::size_t j = 0; j < b; ++j) {
    std::fill(d_emb.begin(), d_emb.end(), 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      const double w = g_scale * sg.d_pos[i * b + j];
      const auto& e = img_traces[i].embedding.values;
      for (std::size_t c = 0; c < d; ++c) d_emb[c] += w * e[c];
    }
    accumulate_table_grad(txt_traces[j], d_emb, out.text_table, d);
  }
  return out;
}

TrainResult train(std::span<const ImageRecord> records,
                  const BenchmarkSet& train_set, ToyEncoderParams& params,
                  const LossConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_id[records[i].image_id] = i;
  }
  for (const auto& sample : train_set.samples) {
    const auto it = by_id.find(sample.image_id);
    if (it == by_id.end() || records[it->second].objects.empty()) {
      throw ValidationError("sample " + sample.image_id +
                            " has no annotated image record");
    }
  }

  Rng rng(cfg.seed);
  TrainResult result;
  const std::size_t n = train_set.samples.size();
  if (n == 0) return result;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  // With max_steps set, epochs repeat until the step budget is spent.
  for (int epoch = 0; options.max_steps > 0 ? result.steps_run < options.max_steps
                                            : epoch < cfg.epochs;
       ++epoch) {
    rng.shuffle(order);
    LossBreakdown epoch_sum;
    int epoch_steps = 0;
    for (std::size_t begin = 0; begin < n;
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
      std::vector<ImageRecord> images;
      std::vector<std::string> positives;
      std::vector<std::vector<std::string>> negatives;
      for (std::size_t s = begin; s < end; ++s) {
        const auto& sample = train_set.samples[order[s]];
        images.push_back(records[by_id.at(sample.image_id)]);
        positives.push_back(sample.positive);
        std::vector<std::string> negs;
        const std::size_t total = sample.negatives.size();
        std::size_t keep = cfg.negatives_per_image < 0
                               ? total
                               : std::min<std::size_t>(
                                     static_cast<std::size_t>(
                                         cfg.negatives_per_image),
                                     total);
        if (keep == total) {
          for (const auto& neg : sample.negatives) negs.push_back(neg.text);
        } else {
          auto idx = rng.sample_indices(total, keep);
          std::sort(idx.begin(), idx.end());
          for (auto i : idx) negs.push_back(sample.negatives[i].text);
        }
        negatives.push_back(std::move(negs));
      }
      // pad ragged rows down to the batch minimum so scores stay rectangular
      std::size_t k_min = negatives.empty() ? 0 : negatives.front().size();
      for (const auto& row : negatives) k_min = std::min(k_min, row.size());
      for (auto& row : negatives) row.resize(k_min);

      const ParamGradient grad =
          loss_and_gradient(params, images, positives, negatives, cfg);
      if (!std::isfinite(grad.loss.total)) {
        throw NumericError("non-finite loss at epoch " +
                           std::to_string(epoch) + ", step " +
                           std::to_string(epoch_steps));
      }
      const double lr = cfg.learning_rate;
      for (std::size_t i = 0; i < params.image_table.size(); ++i) {
        params.image_table[i] -= lr * grad.image_table[i];
      }
      for (std::size_t i = 0; i < params.text_table.size(); ++i) {
        params.text_table[i] -= lr * grad.text_table[i];
      }
      if (cfg.learn_logit_scale) {
        params.log_logit_scale -= lr * grad.log_logit_scale;
      }

      epoch_sum.l_i2t += grad.loss.l_i2t;
      epoch_sum.l_t2i += grad.loss.l_t2i;
      epoch_sum.l1 += grad.loss.l1;
      epoch_sum.l2 += grad.loss.l2;
      epoch_sum.total += grad.loss.total;
      ++epoch_steps;
      ++result.steps_run;
      if (options.max_steps > 0 && result.steps_run >= options.max_steps) {
        break;
      }
    }
    EpochLog log;
    log.epoch = epoch;
    if (epoch_steps > 0) {
      const double inv = 1.0 / epoch_steps;
      log.loss = {epoch_sum.l_i2t * inv, epoch_sum.l_t2i * inv,
                  epoch_sum.l1 * inv, epoch_sum.l2 * inv,
                  epoch_sum.total * inv};
    }
    if (options.dev_eval) log.dev_accuracy = options.dev_eval(params);
    result.log.push_back(log);
    if (options.max_steps > 0 && result.steps_run >= options.max_steps) break;
  }
  return result;
}

std::string loss_log_to_string(const TrainResult& result) {
  std::string out;
  char buf[256];
  for (const auto& e : result.log) {
    std::snprintf(buf, sizeof(buf),
                  "{\"epoch\":%d,\"l_i2t\":%.10g,\"l_t2i\":%.10g,"
                  "\"l1\":%.10g,\"l2\":%.10g,\"total\":%.10g,"
                  "\"selection_accuracy_dev\":",
                  e.epoch, e.loss.l_i2t, e.loss.l_t2i, e.loss.l1, e.loss.l2,
                  e.loss.total);
    out += buf;
    if (e.dev_accuracy) {
      std::snprintf(buf, sizeof(buf), "%.10g}", *e.dev_accuracy);
      out += buf;
    } else {
      out += "null}";
    }
    out += '\n';
  }
  return out;
}

}  // namespace ohd
