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
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ohd/corpus.hpp"
#include "ohd/encoder.hpp"
#include "ohd/rng.hpp"

namespace ohd {

struct SelectionDecision {
  enum class Outcome { win, tie, loss } outcome = Outcome::win;
  NegativeKind winning_kind = NegativeKind::alter;  // set for loss only
};

struct SelectionReport {
  double accuracy = 0.0;
  std::size_t n = 0;
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::map<NegativeKind, std::size_t> confusion;  // winner kind when positive lost
};

// 28 scores, one positive and 27 negatives. Win requires the positive to be
// the strict unique maximum; an exact tie at the top counts as failure.
// negative_kinds[k] is the kind of the k-th negative in score order
// (positions after positive_index are shifted by one).
SelectionDecision select_caption(std::span<const double> scores,
                                 std::size_t positive_index,
                                 std::span<const NegativeKind> negative_kinds);

SelectionReport benchmark_accuracy(const BenchmarkSet& set,
                                   std::span<const ImageRecord> records,
                                   const DualEncoder& encoder);

// Scorer variant: the callable returns 28 scores for one sample, positive
// first. Used for random/oracle baselines.
using SampleScorer =
    std::function<std::vector<double>(const BenchmarkSample&)>;
SelectionReport benchmark_accuracy(const BenchmarkSet& set,
                                   const SampleScorer& scorer);

// Labels rendered through prompt_pattern ("a photo of a {}" by default) and
// encoded once; each image takes the argmax label; returns accuracy vs gold.
double zero_shot_classify(std::span<const std::string> label_names,
                          const std::string& prompt_pattern,
                          std::span<const ImageRecord> images,
                          std::span<const std::string> gold_labels,
                          const DualEncoder& encoder);

struct ChairReport {
  double c_s = 0.0;    // hallucinated mentions / all mentions
  double c_i = 0.0;    // captions with a hallucination / all captions
  double cover = 0.0;  // covered ground-truth objects / all ground-truth objects
  std::size_t hallucinated_mentions = 0;
  std::size_t total_mentions = 0;
  std::size_t captions_with_hallucination = 0;
  std::size_t total_captions = 0;
  std::size_t covered_gt = 0;
  std::size_t total_gt = 0;
};

// Two Cover variants exist in the literature; "textual" is true coverage
// (covered ground truth over all ground truth), "paper" reuses the
// hallucinated-caption count in the numerator and is kept for auditing.
enum class CoverFormula { textual, paper };

using Lexicon = std::map<std::string, std::string>;  // surface -> canonical

// A small default lexicon for tests and demos.
Lexicon default_lexicon();

// Extracts canonical object mentions from text by longest-match lexicon
// lookup over lowercase tokens (multi-word surfaces supported).
std::set<std::string> extract_mentions(const std::string& text,
                                       const Lexicon& lexicon);

ChairReport chair(
    std::span<const std::pair<std::string, std::string>> captions,  // (image_id, text)
    const std::map<std::string, std::set<std::string>>& gold,
    const Lexicon& lexicon, CoverFormula formula = CoverFormula::textual);

struct PopeQuestion {
  std::string image_id;
  std::string object;
  bool label_yes = false;  // yes iff object is annotated on the image
  std::string text;        // "Is there a {object} in the image?"
};

struct PopeReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double yes_ratio = 0.0;
  std::size_t n = 0;
};

struct PopeBuildResult {
  std::vector<PopeQuestion> questions;
  std::size_t skipped_images = 0;
};

// per_image/2 present objects and per_image/2 absent objects per image; the
// absent half reuses the hallucination-object sampling strategies.
PopeBuildResult build_pope_questions(std::span<const ImageRecord> records,
                                     std::size_t per_image,
                                     NegativeKind sampler,
                                     const FrequencyTable& freq,
                                     const CooccurrenceTable& cooc, Rng& rng);

PopeReport pope_metrics(std::span<const PopeQuestion> questions,
                        std::span<const bool> answers_yes);

}  // namespace ohd
