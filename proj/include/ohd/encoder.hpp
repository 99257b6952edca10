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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ohd/corpus.hpp"
#include "ohd/rng.hpp"

namespace ohd {

struct Embedding {
  std::vector<double> values;  // unit Euclidean norm

  double dot(const Embedding& other) const;
};

// images x texts similarity logits: scores[i][j] = logit_scale * <img_i, txt_j>.
struct ScoreMatrix {
  std::size_t n_images = 0;
  std::size_t n_texts = 0;
  std::vector<double> scores;  // row-major
  double logit_scale = 1.0;

  double at(std::size_t i, std::size_t j) const {
    return scores[i * n_texts + j];
  }
};

// Bag-of-hashed-features stand-in for a real dual encoder. Text embeds as
// the normalized sum of text_table rows over hashed tokens; an image embeds
// as the normalized sum of image_table rows over its annotated object names,
// so the image "is" its object multiset.
struct ToyEncoderParams {
  std::size_t vocab_hash_size = 4096;
  std::size_t embed_dim = 32;
  std::vector<double> image_table;  // row-major [vocab_hash_size x embed_dim]
  std::vector<double> text_table;
  double log_logit_scale = 0.0;

  static ToyEncoderParams random_init(std::size_t vocab_hash_size,
                                      std::size_t embed_dim,
                                      std::uint64_t seed);

  // exp(log_logit_scale) clamped to (0, 100].
  double logit_scale() const;

  std::span<double> image_row(std::size_t bucket);
  std::span<const double> image_row(std::size_t bucket) const;
  std::span<double> text_row(std::size_t bucket);
  std::span<const double> text_row(std::size_t bucket) const;
};

// Lowercase whitespace tokenization.
std::vector<std::string> tokenize(std::string_view text);
std::size_t hash_bucket(std::string_view token, std::size_t vocab_hash_size);

Embedding encode_text(const std::string& text, const ToyEncoderParams& params);
std::vector<Embedding> encode_text(std::span<const std::string> texts,
                                   const ToyEncoderParams& params);
Embedding encode_image(const ImageRecord& record,
                       const ToyEncoderParams& params);
std::vector<Embedding> encode_image(std::span<const ImageRecord> records,
                                    const ToyEncoderParams& params);

ScoreMatrix score(std::span<const Embedding> images,
                  std::span<const Embedding> texts, double logit_scale);

// Forward trace kept for backprop through the L2 normalization.
struct EncodedTrace {
  std::vector<std::size_t> buckets;  // contributing table rows (multiset)
  double raw_norm = 0.0;
  Embedding embedding;
};

EncodedTrace encode_text_traced(const std::string& text,
                                const ToyEncoderParams& params);
EncodedTrace encode_image_traced(const ImageRecord& record,
                                 const ToyEncoderParams& params);

// Accumulates dL/d(table rows) from dL/d(embedding) through normalization:
// dL/draw = (dL/de - (dL/de . e) e) / ||raw||, added to each contributing row.
void accumulate_table_grad(const EncodedTrace& trace,
                           std::span<const double> d_embedding,
                           std::span<double> table_grad,
                           std::size_t embed_dim);

// Text checkpoint: shape header then row-major tables. Loading validates
// shapes.
void save_params(const ToyEncoderParams& params,
                 const std::filesystem::path& path);
ToyEncoderParams load_params(const std::filesystem::path& path);

// Contract every scoreable model satisfies; the toy encoder is one
// implementation, adapters for real checkpoints are another.
class DualEncoder {
 public:
  virtual ~DualEncoder() = default;
  virtual Embedding embed_image(const ImageRecord& record) const = 0;
  virtual Embedding embed_text(const std::string& text) const = 0;
  virtual double logit_scale() const = 0;
};

class ToyEncoder final : public DualEncoder {
 public:
  explicit ToyEncoder(const ToyEncoderParams& params) : params_(params) {}
  Embedding embed_image(const ImageRecord& record) const override {
    return encode_image(record, params_);
  }
  Embedding embed_text(const std::string& text) const override {
    return encode_text(text, params_);
  }
  double logit_scale() const override { return params_.logit_scale(); }

 private:
  const ToyEncoderParams& params_;
};

}  // namespace ohd
