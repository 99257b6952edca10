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

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ohd/corpus.hpp"
#include "ohd/rng.hpp"

namespace ohd {

enum class PromptTemplate { add, remove_object, alter_object };

struct PromptRequest {
  PromptTemplate template_id = PromptTemplate::add;
  std::string caption;
  std::vector<std::string> objects;
  std::string rendered;
};

struct LlmConfig {
  std::string endpoint;
  std::string model_id;
  int max_retries = 3;
  double timeout_s = 30.0;
};

// Minimal client contract: one prompt in, one rewritten caption out.
// API key comes from the OHD_LLM_API_KEY environment variable.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string send(const std::string& prompt) = 0;
  virtual const std::string& model_id() const = 0;
};

// POST {"model","prompt"} to the configured endpoint, bearer-authenticated,
// with exponential backoff on transient failures.
std::unique_ptr<LlmClient> make_http_llm_client(const LlmConfig& config);

// Picks k objects absent from the record: random = uniform over eligible
// vocabulary, popular = top-k by corpus frequency, adversarial = top-k by
// summed co-occurrence with the record's objects. Ties break
// lexicographically.
std::vector<std::string> select_hallucination_objects(
    const ImageRecord& record, const FrequencyTable& freq,
    const CooccurrenceTable& cooc, NegativeKind strategy, std::size_t k,
    Rng& rng);

// All 7 nonempty subsets of 3 names, ordered by (size, lexicographic).
std::vector<std::vector<std::string>> enumerate_insertion_subsets(
    std::span<const std::string> objects);

// All 6 subsets of size 1 or 2 of 3 names, same ordering.
std::vector<std::vector<std::string>> enumerate_removal_subsets(
    std::span<const std::string> objects);

PromptRequest render_prompt(PromptTemplate template_id,
                            const std::string& caption,
                            const std::vector<std::string>& objects);

struct RewriteResult {
  std::string text;
  Provenance provenance = Provenance::template_fallback;
  std::optional<std::string> model_id;
};

// LLM rewrite with validation (insert outputs must contain every requested
// object, remove outputs none of them); invalid or failed calls fall back to
// the deterministic template grammar. `variant` selects among the grammar's
// phrasing alternatives so collision retries stay deterministic.
RewriteResult rewrite_caption(const PromptRequest& request, LlmClient* client,
                              Rng& rng, int variant = 0,
                              bool allow_fallback = true);

// Template grammar, exposed for tests. Pure functions of their arguments.
std::string template_add(const std::string& caption,
                         const std::vector<std::string>& objects, int variant);
std::string template_remove(const std::string& caption,
                            const std::vector<std::string>& objects);
std::string template_alter(const std::string& caption, int variant);

// Whole-word, case-insensitive containment (multi-word objects supported).
bool caption_mentions_object(const std::string& caption,
                             const std::string& object);

struct GeneratorOptions {
  LlmClient* client = nullptr;  // null selects template mode
  bool allow_fallback = true;
};

// 21 insertion negatives (7 per strategy) + 6 remove/alter = 27.
BenchmarkSample generate_sample(const ImageRecord& record,
                                const std::string& caption,
                                const FrequencyTable& freq,
                                const CooccurrenceTable& cooc,
                                const GeneratorOptions& options, Rng& rng);

inline constexpr const char* kGeneratorVersion = "1.0.0";

// One sample per record, first caption as positive; per-image rng streams
// derived as seed ^ fnv1a(image_id).
BenchmarkSet generate_benchmark(std::span<const ImageRecord> records,
                                const std::string& name, std::int64_t seed,
                                const GeneratorOptions& options,
                                const std::string& source_corpus,
                                int jobs = 1);

}  // namespace ohd
