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

#include "ohd/evalhall.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "ohd/countergen.hpp"
#include "ohd/errors.hpp"

namespace ohd {

SelectionDecision select_caption(std::span<const double> scores,
                                 std::size_t positive_index,
                                 std::span<const NegativeKind> negative_kinds) {
  if (scores.size() != 28 || negative_kinds.size() != 27 ||
      positive_index >= scores.size()) {
    throw ValidationError("select_caption expects 28 scores and 27 kinds");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("non-finite candidate score");
  }
  const double pos = scores[positive_index];
  double best_neg = -HUGE_VAL;
  std::size_t best_slot = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == positive_index) continue;
    if (scores[i] > best_neg) {
      best_neg = scores[i];
      best_slot = i;
    }
  }
  SelectionDecision d;
  if (pos > best_neg) {
    d.outcome = SelectionDecision::Outcome::win;
  } else if (pos == best_neg) {
    d.outcome = SelectionDecision::Outcome::tie;
  } else {
    d.outcome = SelectionDecision::Outcome::loss;
    const std::size_t k = best_slot > positive_index ? best_slot - 1 : best_slot;
    d.winning_kind = negative_kinds[k];
  }
  return d;
}

namespace {

SelectionReport aggregate(
    const BenchmarkSet& set,
    const std::function<std::vector<double>(const BenchmarkSample&)>& scores_of) {
  SelectionReport report;
  for (const auto& sample : set.samples) {
    std::vector<NegativeKind> kinds;
    kinds.reserve(sample.negatives.size());
    for (const auto& neg : sample.negatives) kinds.push_back(neg.spec.kind);
    const auto scores = scores_of(sample);
    const auto d = select_caption(scores, 0, kinds);
    ++report.n;
    switch (d.outcome) {
      case SelectionDecision::Outcome::win:
        ++report.wins;
        break;
      case SelectionDecision::Outcome::tie:
        ++report.ties;
        break;
      case SelectionDecision::Outcome::loss:
        ++report.confusion[d.winning_kind];
        break;
    }
  }
  report.accuracy =
      report.n == 0 ? 0.0
                    : static_cast<double>(report.wins) /
                          static_cast<double>(report.n);
  return report;
}

}  // namespace

SelectionReport benchmark_accuracy(const BenchmarkSet& set,
                                   std::span<const ImageRecord> records,
                                   const DualEncoder& encoder) {
  std::map<std::string, const ImageRecord*> by_id;
  for (const auto& rec : records) by_id[rec.image_id] = &rec;
  return aggregate(set, [&](const BenchmarkSample& sample) {
    const auto it = by_id.find(sample.image_id);
    if (it == by_id.end()) {
      throw ValidationError("no image record for sample " + sample.image_id);
    }
    std::vector<double> scores;
    scores.reserve(1 + sample.negatives.size());
    try {
      const Embedding img = encoder.embed_image(*it->second);
      const double g = encoder.logit_scale();
      scores.push_back(g * img.dot(encoder.embed_text(sample.positive)));
      for (const auto& neg : sample.negatives) {
        scores.push_back(g * img.dot(encoder.embed_text(neg.text)));
      }
    } catch (const std::exception& e) {
      throw ValidationError("encoding failed for image " + sample.image_id +
                            ": " + e.what());
    }
    return scores;
  });
}

SelectionReport benchmark_accuracy(const BenchmarkSet& set,
                                   const SampleScorer& scorer) {
  return aggregate(set, scorer);
}

double zero_shot_classify(std::span<const std::string> label_names,
                          const std::string& prompt_pattern,
                          std::span<const ImageRecord> images,
                          std::span<const std::string> gold_labels,
                          const DualEncoder& encoder) {
  if (label_names.size() < 2) {
    throw ValidationError("zero-shot classification needs at least 2 labels");
  }
  {
    std::set<std::string> uniq(label_names.begin(), label_names.end());
    if (uniq.size() != label_names.size()) {
      throw ValidationError("duplicate class labels");
    }
  }
  if (gold_labels.size() != images.size()) {
    throw ValidationError("gold labels must align with images");
  }
  std::vector<Embedding> label_embeddings;
  for (const auto& label : label_names) {
    std::string prompt = prompt_pattern;
    const auto pos = prompt.find("{}");
    if (pos == std::string::npos) {
      throw ValidationError("prompt pattern must contain {}");
    }
    prompt.replace(pos, 2, label);
    label_embeddings.push_back(encoder.embed_text(prompt));
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Embedding img = encoder.embed_image(images[i]);
    std::size_t best = 0;
    double best_score = -HUGE_VAL;
    for (std::size_t l = 0; l < label_embeddings.size(); ++l) {
      const double s = img.dot(label_embeddings[l]);
      if (s > best_score) {
        best_score = s;
        best = l;
      }
    }
    if (label_names[best] == gold_labels[i]) ++correct;
  }
  return images.empty() ? 0.0
                        : static_cast<double>(correct) /
                              static_cast<double>(images.size());
}

Lexicon default_lexicon() {
  return {
      {"dog", "dog"},       {"puppy", "dog"},    {"cat", "cat"},
      {"kitten", "cat"},    {"car", "car"},      {"automobile", "car"},
      {"bus", "bus"},       {"person", "person"},{"man", "person"},
      {"woman", "person"},  {"bicycle", "bicycle"}, {"bike", "bicycle"},
      {"tree", "tree"},     {"bird", "bird"},    {"horse", "horse"},
      {"cow", "cow"},       {"sheep", "sheep"},  {"boat", "boat"},
      {"chair", "chair"},   {"table", "table"},  {"dining table", "table"},
      {"traffic light", "traffic light"},        {"fire hydrant", "fire hydrant"},
      {"ball", "ball"},     {"frisbee", "frisbee"},
  };
}

namespace {

std::vector<std::string> lexicon_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      current.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace

std::set<std::string> extract_mentions(const std::string& text,
                                       const Lexicon& lexicon) {
  // normalize surfaces once per call; fine at these corpus sizes
  std::map<std::vector<std::string>, std::string> surfaces;
  std::size_t max_len = 1;
  for (const auto& [surface, canonical] : lexicon) {
    auto toks = lexicon_tokens(surface);
    if (toks.empty()) continue;
    max_len = std::max(max_len, toks.size());
    surfaces[std::move(toks)] = canonical;
  }
  const auto tokens = lexicon_tokens(text);
  std::set<std::string> mentions;
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    for (std::size_t len = std::min(max_len, tokens.size() - i); len >= 1;
         --len) {
      const std::vector<std::string> window(tokens.begin() + i,
                                            tokens.begin() + i + len);
      const auto it = surfaces.find(window);
      if (it != surfaces.end()) {
        mentions.insert(it->second);
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return mentions;
}

ChairReport chair(
    std::span<const std::pair<std::string, std::string>> captions,
    const std::map<std::string, std::set<std::string>>& gold,
    const Lexicon& lexicon, CoverFormula formula) {
  ChairReport report;
  std::map<std::string, std::set<std::string>> mentioned_by_image;
  for (const auto& [image_id, text] : captions) {
    const auto git = gold.find(image_id);
    if (git == gold.end()) {
      throw ValidationError("no ground truth for image " + image_id);
    }
    const auto mentions = extract_mentions(text, lexicon);
    std::size_t hallucinated = 0;
    for (const auto& m : mentions) {
      if (!git->second.count(m)) ++hallucinated;
    }
    report.total_mentions += mentions.size();
    report.hallucinated_mentions += hallucinated;
    ++report.total_captions;
    if (hallucinated > 0) ++report.captions_with_hallucination;
    mentioned_by_image[image_id].insert(mentions.begin(), mentions.end());
  }
  for (const auto& [image_id, mentions] : mentioned_by_image) {
    const auto& gt = gold.at(image_id);
    report.total_gt += gt.size();
    for (const auto& o : gt) {
      if (mentions.count(o)) ++report.covered_gt;
    }
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0
                    : static_cast<double>(num) / static_cast<double>(den);
  };
  report.c_s = ratio(report.hallucinated_mentions, report.total_mentions);
  report.c_i = ratio(report.captions_with_hallucination, report.total_captions);
  report.cover = formula == CoverFormula::textual
                     ? ratio(report.covered_gt, report.total_gt)
                     : ratio(report.captions_with_hallucination, report.total_gt);
  return report;
}

PopeBuildResult build_pope_questions(std::span<const ImageRecord> records,
                                     std::size_t per_image,
                                     NegativeKind sampler,
                                     const FrequencyTable& freq,
                                     const CooccurrenceTable& cooc, Rng& rng) {
  if (per_image == 0 || per_image % 2 != 0) {
    throw ValidationError("per_image must be a positive even count");
  }
  const std::size_t half = per_image / 2;
  PopeBuildResult result;
  for (const auto& rec : records) {
    auto names = rec.object_names();
    std::sort(names.begin(), names.end());
    if (names.size() < half) {
      ++result.skipped_images;
      continue;
    }
    std::vector<std::string> absent;
    try {
      absent = select_hallucination_objects(rec, freq, cooc, sampler, half, rng);
    } catch (const GenerationError&) {
      ++result.skipped_images;
      continue;
    }
    std::vector<std::string> present;
    for (auto i : rng.sample_indices(names.size(), half)) {
      present.push_back(names[i]);
    }
    auto push = [&](const std::string& object, bool yes) {
      PopeQuestion q;
      q.image_id = rec.image_id;
      q.object = object;
      q.label_yes = yes;
      q.text = "Is there a " + object + " in the image?";
      result.questions.push_back(std::move(q));
    };
    for (const auto& o : present) push(o, true);
    for (const auto& o : absent) push(o, false);
  }
  return result;
}

PopeReport pope_metrics(std::span<const PopeQuestion> questions,
                        std::span<const bool> answers_yes) {
  if (questions.size() != answers_yes.size()) {
    throw ValidationError("questions and answers must have equal length");
  }
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const bool gold = questions[i].label_yes;
    const bool pred = answers_yes[i];
    if (pred && gold) ++tp;
    else if (pred && !gold) ++fp;
    else if (!pred && !gold) ++tn;
    else ++fn;
  }
  PopeReport r;
  r.n = questions.size();
  if (r.n == 0) return r;
  const double n = static_cast<double>(r.n);
  r.accuracy = static_cast<double>(tp + tn) / n;
  r.precision = (tp + fp) == 0 ? 0.0
                               : static_cast<double>(tp) /
                                     static_cast<double>(tp + fp);
  r.recall = (tp + fn) == 0 ? 0.0
                            : static_cast<double>(tp) /
                                  static_cast<double>(tp + fn);
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  r.yes_ratio = static_cast<double>(tp + fp) / n;
  return r;
}

}  // namespace ohd
