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

#include "ohd/encoder.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ohd/errors.hpp"
#include "ohd/ioutil.hpp"

namespace ohd {

double Embedding::dot(const Embedding& other) const {
  if (values.size() != other.values.size()) {
    throw ValidationError("embedding dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * other.values[i];
  return s;
}

ToyEncoderParams ToyEncoderParams::random_init(std::size_t vocab_hash_size,
                                               std::size_t embed_dim,
                                               std::uint64_t seed) {
  ToyEncoderParams p;
  p.vocab_hash_size = vocab_hash_size;
  p.embed_dim = embed_dim;
  p.image_table.resize(vocab_hash_size * embed_dim);
  p.text_table.resize(vocab_hash_size * embed_dim);
  p.log_logit_scale = std::log(10.0);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  for (auto& v : p.image_table) v = rng.normal() * scale;
  for (auto& v : p.text_table) v = rng.normal() * scale;
  return p;
}

double ToyEncoderParams::logit_scale() const {
  const double g = std::exp(log_logit_scale);
  return g > 100.0 ? 100.0 : g;
}

std::span<double> ToyEncoderParams::image_row(std::size_t bucket) {
  return {image_table.data() + bucket * embed_dim, embed_dim};
}
std::span<const double> ToyEncoderParams::image_row(std::size_t bucket) const {
  return {image_table.data() + bucket * embed_dim, embed_dim};
}
std::span<double> ToyEncoderParams::text_row(std::size_t bucket) {
  return {text_table.data() + bucket * embed_dim, embed_dim};
}
std::span<const double> ToyEncoderParams::text_row(std::size_t bucket) const {
  return {text_table.data() + bucket * embed_dim, embed_dim};
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t hash_bucket(std::string_view token, std::size_t vocab_hash_size) {
  return static_cast<std::size_t>(fnv1a(token) % vocab_hash_size);
}

namespace {

EncodedTrace encode_buckets(const std::vector<std::size_t>& buckets,
                            const std::vector<double>& table,
                            std::size_t embed_dim, const std::string& what) {
  EncodedTrace trace;
  trace.buckets = buckets;
  std::vector<double> raw(embed_dim, 0.0);
  for (auto b : buckets) {
    const double* row = table.data() + b * embed_dim;
    for (std::size_t i = 0; i < embed_dim; ++i) raw[i] += row[i];
  }
  double norm2 = 0.0;
  for (double v : raw) norm2 += v * v;
  const double norm = std::sqrt(norm2);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericError(what + ": degenerate (zero or non-finite) embedding");
  }
  trace.raw_norm = norm;
  trace.embedding.values.resize(embed_dim);
  for (std::size_t i = 0; i < embed_dim; ++i) {
    trace.embedding.values[i] = raw[i] / norm;
  }
  return trace;
}

}  // namespace

EncodedTrace encode_text_traced(const std::string& text,
                                const ToyEncoderParams& params) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw ValidationError("cannot encode empty text");
  std::vector<std::size_t> buckets;
  buckets.reserve(tokens.size());
  for (const auto& t : tokens) {
    buckets.push_back(hash_bucket(t, params.vocab_hash_size));
  }
  return encode_buckets(buckets, params.text_table, params.embed_dim,
                        "text \"" + text + "\"");
}

EncodedTrace encode_image_traced(const ImageRecord& record,
                                 const ToyEncoderParams& params) {
  if (record.objects.empty()) {
    throw ValidationError("image " + record.image_id +
                          ": toy encoder requires object annotations");
  }
  std::vector<std::size_t> buckets;
  buckets.reserve(record.objects.size());
  for (const auto& o : record.objects) {
    buckets.push_back(hash_bucket(o.name, params.vocab_hash_size));
  }
  return encode_buckets(buckets, params.image_table, params.embed_dim,
                        "image " + record.image_id);
}

Embedding encode_text(const std::string& text, const ToyEncoderParams& params) {
  return encode_text_traced(text, params).embedding;
}

std::vector<Embedding> encode_text(std::span<const std::string> texts,
                                   const ToyEncoderParams& params) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(encode_text(t, params));
  return out;
}

Embedding encode_image(const ImageRecord& record,
                       const ToyEncoderParams& params) {
  return encode_image_traced(record, params).embedding;
}

std::vector<Embedding> encode_image(std::span<const ImageRecord> records,
                                    const ToyEncoderParams& params) {
  std::vector<Embedding> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(encode_image(r, params));
  return out;
}

ScoreMatrix score(std::span<const Embedding> images,
                  std::span<const Embedding> texts, double logit_scale) {
  if (!(logit_scale > 0.0)) throw ValidationError("logit_scale must be positive");
  ScoreMatrix m;
  m.n_images = images.size();
  m.n_texts = texts.size();
  m.logit_scale = logit_scale;
  m.scores.resize(m.n_images * m.n_texts);
  for (std::size_t i = 0; i < m.n_images; ++i) {
    for (std::size_t j = 0; j < m.n_texts; ++j) {
      m.scores[i * m.n_texts + j] = logit_scale * images[i].dot(texts[j]);
    }
  }
  return m;
}

void accumulate_table_grad(const EncodedTrace& trace,
                           std::span<const double> d_embedding,
                           std::span<double> table_grad,
                           std::size_t embed_dim) {
  const auto& e = trace.embedding.values;
  double proj = 0.0;
  for (std::size_t i = 0; i < embed_dim; ++i) proj += d_embedding[i] * e[i];
  std::vector<double> d_raw(embed_dim);
  for (std::size_t i = 0; i < embed_dim; ++i) {
    d_raw[i] = (d_embedding[i] - proj * e[i]) / trace.raw_norm;
  }
  for (auto b : trace.buckets) {
    double* row = table_grad.data() + b * embed_dim;
    for (std::size_t i = 0; i < embed_dim; ++i) row[i] += d_raw[i];
  }
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void append_table(std::string& out, const std::vector<double>& table,
                  std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out += ' ';
      append_double(out, table[r * cols + c]);
    }
    out += '\n';
  }
}

}  // namespace

void save_params(const ToyEncoderParams& params,
                 const std::filesystem::path& path) {
  std::string out = "ohd-toy-params 1\n";
  out += std::to_string(params.vocab_hash_size) + " " +
         std::to_string(params.embed_dim) + "\n";
  append_double(out, params.log_logit_scale);
  out += '\n';
  append_table(out, params.image_table, params.vocab_hash_size,
               params.embed_dim);
  append_table(out, params.text_table, params.vocab_hash_size,
               params.embed_dim);
  atomic_write_file(path, out);
}

ToyEncoderParams load_params(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "ohd-toy-params" || version != 1) {
    throw ParseError(path.string() + ": not a toy parameter checkpoint");
  }
  ToyEncoderParams p;
  in >> p.vocab_hash_size >> p.embed_dim >> p.log_logit_scale;
  if (!in || p.vocab_hash_size == 0 || p.embed_dim == 0) {
    throw ParseError(path.string() + ": bad shape header");
  }
  const std::size_t n = p.vocab_hash_size * p.embed_dim;
  p.image_table.resize(n);
  p.text_table.resize(n);
  for (auto* table : {&p.image_table, &p.text_table}) {
    for (auto& v : *table) {
      if (!(in >> v)) {
        throw ParseError(path.string() + ": truncated parameter table");
      }
    }
  }
  double extra;
  if (in >> extra) {
    throw ParseError(path.string() + ": trailing data after parameter tables");
  }
  return p;
}

}  // namespace ohd
