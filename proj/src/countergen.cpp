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

#include "ohd/countergen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "ohd/errors.hpp"

namespace ohd {

namespace {

// Rewrite prompts sent to the LLM; {caption} and {objects} are substituted,
// objects rendered as a comma-separated bracketed list.
constexpr const char* kAddPrompt =
    "Given a sentence {caption}, generate a new sentence and includes each "
    "object from the list {objects}. Make the changes to the original "
    "sentence as minimal as possible. Ensure that the new sentence is "
    "coherent, natural, semantically smooth and free of grammatical errors.";

constexpr const char* kRemovePrompt =
    "Given a sentence {caption}, generate a new sentence and remove each "
    "object from list {objects} to make the semantics of the sentence "
    "different. Ensure that the new sentence is coherent, natural, "
    "semantically smooth and free of grammatical errors.";

constexpr const char* kAlterPrompt =
    "Given a sentence {caption}, choose to modify the objects, colors, "
    "attributes, etc., within the sentence to make the semantics of the "
    "sentence different. Make the changes to the original sentence as "
    "minimal as possible. Ensure that the new sentence is coherent, natural, "
    "semantically smooth and free of grammatical errors.";

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> tokens;
  std::string t;
  while (in >> t) tokens.push_back(t);
  return tokens;
}

// Token stripped of surrounding punctuation and lowercased, for matching.
std::string norm_token(const std::string& token) {
  std::size_t b = 0, e = token.size();
  auto is_punct = [](char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' ||
           c == '?' || c == '"' || c == '\'' || c == '(' || c == ')';
  };
  while (b < e && is_punct(token[b])) ++b;
  while (e > b && is_punct(token[e - 1])) --e;
  return to_lower(std::string_view(token).substr(b, e - b));
}

bool is_article(const std::string& norm) {
  return norm == "a" || norm == "an" || norm == "the";
}

std::string article_for(const std::string& noun) {
  if (noun.empty()) return "a";
  switch (noun.front()) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
      return "an";
    default:
      return "a";
  }
}

std::string join(const std::vector<std::string>& parts,
                 const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string replace_all(std::string text, const std::string& from,
                        const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

// Strip one trailing period so clauses can be appended; returns whether one
// was stripped.
bool strip_final_period(std::string& text) {
  if (!text.empty() && text.back() == '.') {
    text.pop_back();
    while (!text.empty() && text.back() == ' ') text.pop_back();
    return true;
  }
  return false;
}

constexpr std::array<const char*, 3> kAddConnectors = {"with", "alongside",
                                                       "featuring"};

// Fixed word-swap pairs used by the alter fallback.
const std::map<std::string, std::string>& alter_table() {
  static const std::map<std::string, std::string> table = {
      {"dog", "cat"},      {"cat", "dog"},      {"car", "bus"},
      {"bus", "car"},      {"man", "woman"},    {"woman", "man"},
      {"boy", "girl"},     {"girl", "boy"},     {"horse", "cow"},
      {"cow", "horse"},    {"bird", "fish"},    {"fish", "bird"},
      {"table", "chair"},  {"chair", "table"},  {"tree", "bush"},
      {"bush", "tree"},    {"red", "blue"},     {"blue", "red"},
      {"green", "yellow"}, {"yellow", "green"}, {"black", "white"},
      {"white", "black"},  {"orange", "purple"},{"purple", "orange"},
      {"large", "small"},  {"small", "large"},  {"big", "tiny"},
      {"old", "young"},    {"young", "old"},    {"two", "three"},
      {"three", "two"},    {"beach", "park"},   {"park", "beach"},
      {"house", "barn"},   {"barn", "house"},   {"street", "road"},
      {"road", "street"},  {"ball", "frisbee"}, {"sitting", "standing"},
      {"standing", "sitting"},
  };
  return table;
}

constexpr std::array<const char*, 6> kAlterPrefixes = {
    "a painting of",  "a sketch of",           "a cartoon of",
    "a blurry photo of", "an abstract depiction of", "a grainy picture of"};

// Lexicographic combinations of sizes [min_r, max_r] over sorted names.
std::vector<std::vector<std::string>> subsets_by_size(
    std::vector<std::string> names, std::size_t min_r, std::size_t max_r) {
  std::sort(names.begin(), names.end());
  std::vector<std::vector<std::string>> out;
  const std::size_t n = names.size();
  for (std::size_t r = min_r; r <= std::min(max_r, n); ++r) {
    std::vector<std::size_t> idx(r);
    for (std::size_t i = 0; i < r; ++i) idx[i] = i;
    while (true) {
      std::vector<std::string> subset;
      for (auto i : idx) subset.push_back(names[i]);
      out.push_back(std::move(subset));
      // advance combination
      std::size_t i = r;
      while (i > 0) {
        --i;
        if (idx[i] != i + n - r) {
          ++idx[i];
          for (std::size_t j = i + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
          break;
        }
        if (i == 0) {
          i = SIZE_MAX;
          break;
        }
      }
      if (i == SIZE_MAX || r == 0) break;
    }
  }
  return out;
}

void require_three_distinct(std::span<const std::string> objects) {
  if (objects.size() != 3) {
    throw ValidationError("expected exactly 3 object names, got " +
                          std::to_string(objects.size()));
  }
  std::set<std::string> uniq(objects.begin(), objects.end());
  if (uniq.size() != 3) throw ValidationError("object names must be distinct");
}

}  // namespace

bool caption_mentions_object(const std::string& caption,
                             const std::string& object) {
  const auto tokens = split_ws(caption);
  const auto obj_tokens = split_ws(to_lower(object));
  if (obj_tokens.empty() || tokens.size() < obj_tokens.size()) return false;
  for (std::size_t i = 0; i + obj_tokens.size() <= tokens.size(); ++i) {
    bool hit = true;
    for (std::size_t j = 0; j < obj_tokens.size(); ++j) {
      if (norm_token(tokens[i + j]) != obj_tokens[j]) {
        hit = false;
        break;
      }
    }
    if (hit) return true;
  }
  return false;
}

std::vector<std::string> select_hallucination_objects(
    const ImageRecord& record, const FrequencyTable& freq,
    const CooccurrenceTable& cooc, NegativeKind strategy, std::size_t k,
    Rng& rng) {
  if (strategy != NegativeKind::insert_random &&
      strategy != NegativeKind::insert_popular &&
      strategy != NegativeKind::insert_adversarial) {
    throw ValidationError("object selection requires an insert strategy");
  }
  std::vector<std::string> eligible;
  for (const auto& [name, count] : freq.counts) {
    (void)count;
    if (!record.has_object(name)) eligible.push_back(name);
  }
  if (eligible.size() < k) {
    throw GenerationError("image " + record.image_id + ": only " +
                          std::to_string(eligible.size()) +
                          " eligible objects in vocabulary, need " +
                          std::to_string(k));
  }
  std::vector<std::string> picked;
  if (strategy == NegativeKind::insert_random) {
    for (auto i : rng.sample_indices(eligible.size(), k)) {
      picked.push_back(eligible[i]);
    }
    return picked;
  }
  std::vector<std::pair<std::int64_t, std::string>> ranked;
  ranked.reserve(eligible.size());
  for (const auto& name : eligible) {
    std::int64_t score = 0;
    if (strategy == NegativeKind::insert_popular) {
      score = freq.counts.at(name);
    } else {
      for (const auto& o : record.objects) score += cooc.count(name, o.name);
    }
    ranked.emplace_back(score, name);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; i < k; ++i) picked.push_back(ranked[i].second);
  return picked;
}

std::vector<std::vector<std::string>> enumerate_insertion_subsets(
    std::span<const std::string> objects) {
  require_three_distinct(objects);
  return subsets_by_size({objects.begin(), objects.end()}, 1, 3);
}

std::vector<std::vector<std::string>> enumerate_removal_subsets(
    std::span<const std::string> objects) {
  require_three_distinct(objects);
  return subsets_by_size({objects.begin(), objects.end()}, 1, 2);
}

PromptRequest render_prompt(PromptTemplate template_id,
                            const std::string& caption,
                            const std::vector<std::string>& objects) {
  if (template_id != PromptTemplate::alter_object && objects.empty()) {
    throw ValidationError("add/remove prompts require at least one object");
  }
  if (template_id == PromptTemplate::alter_object && !objects.empty()) {
    throw ValidationError("alter prompt takes no objects");
  }
  PromptRequest req;
  req.template_id = template_id;
  req.caption = caption;
  req.objects = objects;
  const char* base = template_id == PromptTemplate::add        ? kAddPrompt
                     : template_id == PromptTemplate::remove_object
                         ? kRemovePrompt
                         : kAlterPrompt;
  std::string rendered = replace_all(base, "{caption}", caption);
  rendered = replace_all(rendered, "{objects}", "[" + join(objects, ", ") + "]");
  req.rendered = std::move(rendered);
  return req;
}

std::string template_add(const std::string& caption,
                         const std::vector<std::string>& objects,
                         int variant) {
  if (objects.empty()) throw ValidationError("template_add: no objects");
  std::string body = caption;
  const bool had_period = strip_final_period(body);
  std::vector<std::string> phrases;
  for (const auto& o : objects) phrases.push_back(article_for(o) + " " + o);
  std::string clause;
  if (phrases.size() == 1) {
    clause = phrases.front();
  } else {
    clause = join({phrases.begin(), phrases.end() - 1}, ", ") + " and " +
             phrases.back();
  }
  const char* connector =
      kAddConnectors[static_cast<std::size_t>(variant) % kAddConnectors.size()];
  std::string out = body + " " + connector + " " + clause;
  if (had_period) out += ".";
  return out;
}

std::string template_remove(const std::string& caption,
                            const std::vector<std::string>& objects) {
  std::string body = caption;
  const bool had_period = strip_final_period(body);
  auto tokens = split_ws(body);
  std::vector<bool> drop(tokens.size(), false);
  for (const auto& object : objects) {
    const auto obj_tokens = split_ws(to_lower(object));
    if (obj_tokens.empty()) continue;
    for (std::size_t i = 0; i + obj_tokens.size() <= tokens.size(); ++i) {
      bool hit = true;
      for (std::size_t j = 0; j < obj_tokens.size(); ++j) {
        if (drop[i + j] || norm_token(tokens[i + j]) != obj_tokens[j]) {
          hit = false;
          break;
        }
      }
      if (!hit) continue;
      for (std::size_t j = 0; j < obj_tokens.size(); ++j) drop[i + j] = true;
      // drop a leading article, then a conjunction left dangling on either side
      std::size_t prev = i;
      if (prev > 0 && !drop[prev - 1] && is_article(norm_token(tokens[prev - 1]))) {
        drop[--prev] = true;
      }
      if (prev > 0 && !drop[prev - 1] && norm_token(tokens[prev - 1]) == "and") {
        drop[prev - 1] = true;
      } else {
        const std::size_t next = i + obj_tokens.size();
        if (next < tokens.size() && !drop[next] &&
            norm_token(tokens[next]) == "and") {
          drop[next] = true;
        }
      }
    }
  }
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!drop[i]) kept.push_back(tokens[i]);
  }
  std::string out = join(kept, " ");
  if (had_period && !out.empty()) out += ".";
  return out;
}

std::string template_alter(const std::string& caption, int variant) {
  if (variant < 0) variant = 0;
  std::vector<std::string> candidates;
  const auto tokens = split_ws(caption);
  const auto& table = alter_table();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto it = table.find(norm_token(tokens[i]));
    if (it == table.end()) continue;
    auto swapped = tokens;
    // keep surrounding punctuation of the original token
    const std::string& tok = tokens[i];
    const std::string core = norm_token(tok);
    const std::size_t pos = to_lower(tok).find(core);
    std::string rebuilt = tok;
    rebuilt.replace(pos, core.size(), it->second);
    swapped[i] = rebuilt;
    candidates.push_back(join(swapped, " "));
  }
  for (const char* prefix : kAlterPrefixes) {
    candidates.push_back(std::string(prefix) + " " + caption);
  }
  for (const char* p1 : kAlterPrefixes) {
    for (const char* p2 : kAlterPrefixes) {
      if (std::string(p1) == p2) continue;
      candidates.push_back(std::string(p1) + " " + p2 + " " + caption);
    }
  }
  // dedup, preserving order
  std::set<std::string> seen;
  std::vector<std::string> uniq;
  for (auto& c : candidates) {
    if (c != caption && seen.insert(c).second) uniq.push_back(std::move(c));
  }
  if (static_cast<std::size_t>(variant) >= uniq.size()) {
    throw GenerationError("alter grammar exhausted at variant " +
                          std::to_string(variant));
  }
  return uniq[static_cast<std::size_t>(variant)];
}

namespace {

bool contains_ci(const std::string& haystack, const std::string& needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

bool llm_output_valid(const PromptRequest& request, const std::string& text) {
  if (text.empty() || text == request.caption) return false;
  switch (request.template_id) {
    case PromptTemplate::add:
      return std::all_of(request.objects.begin(), request.objects.end(),
                         [&](const std::string& o) {
                           return contains_ci(text, o);
                         });
    case PromptTemplate::remove_object:
      return std::none_of(request.objects.begin(), request.objects.end(),
                          [&](const std::string& o) {
                            return contains_ci(text, o);
                          });
    case PromptTemplate::alter_object:
      return true;
  }
  return false;
}

std::string template_rewrite(const PromptRequest& request, int variant) {
  switch (request.template_id) {
    case PromptTemplate::add:
      return template_add(request.caption, request.objects, variant);
    case PromptTemplate::remove_object:
      return template_remove(request.caption, request.objects);
    case PromptTemplate::alter_object:
      return template_alter(request.caption, variant);
  }
  throw ValidationError("unknown template");
}

}  // namespace

RewriteResult rewrite_caption(const PromptRequest& request, LlmClient* client,
                              Rng& rng, int variant, bool allow_fallback) {
  (void)rng;  // template grammar is deterministic; retry jitter lives in the client
  if (client != nullptr) {
    try {
      std::string text = client->send(request.rendered);
      if (llm_output_valid(request, text)) {
        return {std::move(text), Provenance::llm, client->model_id()};
      }
    } catch (const std::exception& e) {
      if (!allow_fallback) {
        throw GenerationError(std::string("llm rewrite failed: ") + e.what());
      }
    }
    if (!allow_fallback) {
      throw GenerationError("llm rewrite failed validation and fallback is disabled");
    }
  }
  return {template_rewrite(request, variant), Provenance::template_fallback,
          std::nullopt};
}

BenchmarkSample generate_sample(const ImageRecord& record,
                                const std::string& caption,
                                const FrequencyTable& freq,
                                const CooccurrenceTable& cooc,
                                const GeneratorOptions& options, Rng& rng) {
  if (std::find(record.captions.begin(), record.captions.end(), caption) ==
      record.captions.end()) {
    throw ValidationError("image " + record.image_id +
                          ": caption is not one of the record's captions");
  }
  BenchmarkSample sample;
  sample.image_id = record.image_id;
  sample.positive = caption;
  std::set<std::string> used{caption};

  auto emit = [&](NegativeKind kind, const std::vector<std::string>& objects,
                  int combo_index, PromptTemplate tmpl, int base_variant) {
    for (int attempt = 0; attempt < 3; ++attempt) {
      const auto request = render_prompt(tmpl, caption, objects);
      RewriteResult rr;
      try {
        rr = rewrite_caption(request, options.client, rng,
                             base_variant + attempt, options.allow_fallback);
      } catch (const GenerationError& e) {
        throw GenerationError("image " + record.image_id + " [" +
                              to_string(kind) + " #" +
                              std::to_string(combo_index) + "]: " + e.what());
      }
      if (!rr.text.empty() && rr.text != caption && !used.count(rr.text)) {
        used.insert(rr.text);
        NegativeCaption neg;
        neg.text = std::move(rr.text);
        neg.spec = {kind, objects, combo_index};
        neg.provenance = rr.provenance;
        neg.model_id = std::move(rr.model_id);
        sample.negatives.push_back(std::move(neg));
        return true;
      }
    }
    return false;
  };

  auto emit_or_throw = [&](NegativeKind kind,
                           const std::vector<std::string>& objects,
                           int combo_index, PromptTemplate tmpl,
                           int base_variant) {
    if (!emit(kind, objects, combo_index, tmpl, base_variant)) {
      throw GenerationError("image " + record.image_id + " [" +
                            to_string(kind) + " #" +
                            std::to_string(combo_index) +
                            "]: could not produce a distinct negative");
    }
  };

  for (auto strategy : {NegativeKind::insert_random, NegativeKind::insert_popular,
                        NegativeKind::insert_adversarial}) {
    const auto objects =
        select_hallucination_objects(record, freq, cooc, strategy, 3, rng);
    const auto subsets = enumerate_insertion_subsets(objects);
    int ci = 0;
    for (const auto& subset : subsets) {
      emit_or_throw(strategy, subset, ci++, PromptTemplate::add, 0);
    }
  }

  // Removal base: up to 3 annotated objects (uniform seeded subsample when
  // more exist); size-1/2 subsets; deficit filled by alter negatives.
  auto names = record.object_names();
  std::sort(names.begin(), names.end());
  if (names.size() > 3) {
    std::vector<std::string> picked;
    for (auto i : rng.sample_indices(names.size(), 3)) picked.push_back(names[i]);
    std::sort(picked.begin(), picked.end());
    names = std::move(picked);
  }
  const auto removal_subsets = subsets_by_size(names, 1, 2);
  int remove_ci = 0, alter_ci = 0;
  for (const auto& subset : removal_subsets) {
    const bool mentioned =
        std::any_of(subset.begin(), subset.end(), [&](const std::string& o) {
          return caption_mentions_object(caption, o);
        });
    // Objects absent from the caption text cannot be removed from it; those
    // slots use the alter path, matching the contingency for unremovable
    // objects.
    if (mentioned &&
        emit(NegativeKind::remove, subset, remove_ci, PromptTemplate::remove_object, 0)) {
      ++remove_ci;
    } else {
      emit_or_throw(NegativeKind::alter, {}, alter_ci, PromptTemplate::alter_object,
                    alter_ci * 3);
      ++alter_ci;
    }
  }
  for (std::size_t i = removal_subsets.size(); i < 6; ++i) {
    emit_or_throw(NegativeKind::alter, {}, alter_ci, PromptTemplate::alter_object,
                  alter_ci * 3);
    ++alter_ci;
  }

  validate_sample(sample);
  return sample;
}

BenchmarkSet generate_benchmark(std::span<const ImageRecord> records,
                                const std::string& name, std::int64_t seed,
                                const GeneratorOptions& options,
                                const std::string& source_corpus, int jobs) {
  BenchmarkSet set;
  set.name = name;
  set.seed = seed;
  set.generator_version = kGeneratorVersion;
  set.source_corpus = source_corpus;
  set.samples.resize(records.size());

  const FrequencyTable freq = build_frequency_table(records);
  const CooccurrenceTable cooc = build_cooccurrence_table(records);

  auto worker = [&](std::size_t begin, std::size_t end,
                    std::exception_ptr& error) {
    try {
      for (std::size_t i = begin; i < end; ++i) {
        const auto& rec = records[i];
        Rng rng(static_cast<std::uint64_t>(seed) ^ fnv1a(rec.image_id));
        set.samples[i] =
            generate_sample(rec, rec.captions.front(), freq, cooc, options, rng);
      }
    } catch (...) {
      error = std::current_exception();
    }
  };

  if (jobs <= 1 || records.size() < 2) {
    std::exception_ptr error;
    worker(0, records.size(), error);
    if (error) std::rethrow_exception(error);
  } else {
    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(jobs), records.size());
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(n_threads);
    const std::size_t chunk = (records.size() + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(records.size(), begin + chunk);
      threads.emplace_back(worker, begin, end, std::ref(errors[t]));
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return set;
}

}  // namespace ohd
