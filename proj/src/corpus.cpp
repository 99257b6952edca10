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

#include "ohd/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "ohd/errors.hpp"
#include "ohd/ioutil.hpp"

namespace ohd {

using ordered_json = nlohmann::ordered_json;

const char* to_string(NegativeKind kind) {
  switch (kind) {
    case NegativeKind::insert_random: return "insert_random";
    case NegativeKind::insert_popular: return "insert_popular";
    case NegativeKind::insert_adversarial: return "insert_adversarial";
    case NegativeKind::remove: return "remove";
    case NegativeKind::alter: return "alter";
  }
  return "?";
}

NegativeKind negative_kind_from_string(const std::string& s) {
  if (s == "insert_random") return NegativeKind::insert_random;
  if (s == "insert_popular") return NegativeKind::insert_popular;
  if (s == "insert_adversarial") return NegativeKind::insert_adversarial;
  if (s == "remove") return NegativeKind::remove;
  if (s == "alter") return NegativeKind::alter;
  throw ParseError("unknown negative kind: " + s);
}

const char* to_string(Provenance p) {
  return p == Provenance::llm ? "llm" : "template";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "llm") return Provenance::llm;
  if (s == "template") return Provenance::template_fallback;
  throw ParseError("unknown provenance: " + s);
}

std::string canonical_object_name(std::string_view raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out;
  out.reserve(e - b);
  for (std::size_t i = b; i < e; ++i) {
    out.push_back(static_cast<char>(
        std::tolower(static_cast<unsigned char>(raw[i]))));
  }
  if (out.empty()) throw ValidationError("empty object name");
  return out;
}

std::vector<std::string> ImageRecord::object_names() const {
  std::vector<std::string> names;
  names.reserve(objects.size());
  for (const auto& o : objects) names.push_back(o.name);
  return names;
}

bool ImageRecord::has_object(const std::string& name) const {
  return std::any_of(objects.begin(), objects.end(),
                     [&](const ObjectAnnotation& o) { return o.name == name; });
}

ImageRecord make_image_record(std::string image_id, std::string image_uri,
                              std::vector<ObjectAnnotation> objects,
                              std::vector<std::string> captions) {
  if (image_id.empty()) throw ValidationError("image_id must be nonempty");
  if (captions.empty()) {
    throw ValidationError("image " + image_id + ": at least one caption required");
  }
  ImageRecord rec;
  rec.image_id = std::move(image_id);
  rec.image_uri = std::move(image_uri);
  rec.captions = std::move(captions);
  std::unordered_set<std::string> seen;
  for (auto& o : objects) {
    o.name = canonical_object_name(o.name);
    for (auto v : {o.confidence, o.area_fraction}) {
      if (v && (*v < 0.0 || *v > 1.0)) {
        throw ValidationError("image " + rec.image_id + ": object " + o.name +
                              " has value outside [0,1]");
      }
    }
    if (seen.insert(o.name).second) rec.objects.push_back(std::move(o));
  }
  return rec;
}

namespace {

ImageRecord record_from_json(const ordered_json& j) {
  std::vector<ObjectAnnotation> objects;
  for (const auto& jo : j.at("objects")) {
    ObjectAnnotation o;
    o.name = jo.at("name").get<std::string>();
    if (jo.contains("confidence")) o.confidence = jo["confidence"].get<double>();
    if (jo.contains("area_fraction")) {
      o.area_fraction = jo["area_fraction"].get<double>();
    }
    objects.push_back(std::move(o));
  }
  return make_image_record(j.at("image_id").get<std::string>(),
                           j.value("image_uri", std::string{}),
                           std::move(objects),
                           j.at("captions").get<std::vector<std::string>>());
}

ordered_json record_to_json(const ImageRecord& rec) {
  ordered_json j;
  j["image_id"] = rec.image_id;
  j["image_uri"] = rec.image_uri;
  ordered_json objs = ordered_json::array();
  for (const auto& o : rec.objects) {
    ordered_json jo;
    jo["name"] = o.name;
    if (o.confidence) jo["confidence"] = *o.confidence;
    if (o.area_fraction) jo["area_fraction"] = *o.area_fraction;
    objs.push_back(std::move(jo));
  }
  j["objects"] = std::move(objs);
  j["captions"] = rec.captions;
  return j;
}

}  // namespace

std::vector<ImageRecord> load_annotations(const std::filesystem::path& path,
                                          AnnotationFormat /*format*/) {
  std::istringstream in(read_file(path));
  std::vector<ImageRecord> records;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ImageRecord rec;
    try {
      rec = record_from_json(ordered_json::parse(line));
    } catch (const ValidationError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " +
                       e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " +
                       e.what());
    }
    if (!ids.insert(rec.image_id).second) {
      throw ValidationError(path.string() + ": duplicate image_id " +
                            rec.image_id);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_annotations(std::span<const ImageRecord> records,
                      const std::filesystem::path& path) {
  std::string out;
  for (const auto& rec : records) {
    out += record_to_json(rec).dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

FrequencyTable build_frequency_table(std::span<const ImageRecord> records) {
  FrequencyTable table;
  for (const auto& rec : records) {
    for (const auto& o : rec.objects) {
      ++table.counts[o.name];
      ++table.total;
    }
  }
  return table;
}

void CooccurrenceTable::add(const std::string& a, const std::string& b,
                            std::int64_t n) {
  if (a == b) throw ValidationError("co-occurrence self-pair: " + a);
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  counts[key] += n;
}

std::int64_t CooccurrenceTable::count(const std::string& a,
                                      const std::string& b) const {
  if (a == b) return 0;
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  auto it = counts.find(key);
  return it == counts.end() ? 0 : it->second;
}

CooccurrenceTable build_cooccurrence_table(
    std::span<const ImageRecord> records) {
  CooccurrenceTable table;
  for (const auto& rec : records) {
    const auto names = rec.object_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t j = i + 1; j < names.size(); ++j) {
        table.add(names[i], names[j]);
      }
    }
  }
  return table;
}

void validate_sample(const BenchmarkSample& sample) {
  const std::string where = "sample " + sample.image_id;
  if (sample.positive.empty()) {
    throw ValidationError(where + ": empty positive caption");
  }
  if (sample.negatives.size() != 27) {
    throw ValidationError(where + ": expected 27 negatives, got " +
                          std::to_string(sample.negatives.size()));
  }
  std::map<NegativeKind, int> by_kind;
  std::set<std::string> texts;
  for (const auto& neg : sample.negatives) {
    ++by_kind[neg.spec.kind];
    if (neg.text.empty()) throw ValidationError(where + ": empty negative text");
    if (neg.text == sample.positive) {
      throw ValidationError(where + ": negative equals positive caption");
    }
    if (!texts.insert(neg.text).second) {
      throw ValidationError(where + ": duplicate negative text: " + neg.text);
    }
    std::set<std::string> objs(neg.spec.objects.begin(),
                               neg.spec.objects.end());
    if (objs.size() != neg.spec.objects.size()) {
      throw ValidationError(where + ": duplicate objects in negative spec");
    }
  }
  for (auto kind : {NegativeKind::insert_random, NegativeKind::insert_popular,
                    NegativeKind::insert_adversarial}) {
    if (by_kind[kind] != 7) {
      throw ValidationError(where + ": expected 7 " +
                            std::string(to_string(kind)) + " negatives, got " +
                            std::to_string(by_kind[kind]));
    }
  }
  if (by_kind[NegativeKind::remove] + by_kind[NegativeKind::alter] != 6) {
    throw ValidationError(where + ": remove+alter negatives must total 6");
  }
}

void validate_set(const BenchmarkSet& set) {
  if (set.generator_version.empty()) {
    throw ValidationError("benchmark set missing generator_version");
  }
  std::unordered_set<std::string> ids;
  for (const auto& sample : set.samples) {
    if (!ids.insert(sample.image_id).second) {
      throw ValidationError("duplicate sample image_id: " + sample.image_id);
    }
    validate_sample(sample);
  }
}

namespace {

ordered_json negative_to_json(const NegativeCaption& neg) {
  ordered_json j;
  j["text"] = neg.text;
  j["kind"] = to_string(neg.spec.kind);
  j["objects"] = neg.spec.objects;
  j["combo_index"] = neg.spec.combo_index;
  j["provenance"] = to_string(neg.provenance);
  if (neg.model_id) j["model_id"] = *neg.model_id;
  return j;
}

NegativeCaption negative_from_json(const ordered_json& j) {
  NegativeCaption neg;
  neg.text = j.at("text").get<std::string>();
  neg.spec.kind = negative_kind_from_string(j.at("kind").get<std::string>());
  neg.spec.objects = j.at("objects").get<std::vector<std::string>>();
  neg.spec.combo_index = j.value("combo_index", 0);
  neg.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  if (j.contains("model_id")) neg.model_id = j["model_id"].get<std::string>();
  return neg;
}

}  // namespace

std::string benchmark_to_string(const BenchmarkSet& set) {
  validate_set(set);
  ordered_json header;
  header["name"] = set.name;
  header["seed"] = set.seed;
  header["generator_version"] = set.generator_version;
  header["source_corpus"] = set.source_corpus;
  std::string out = header.dump();
  out += '\n';
  for (const auto& sample : set.samples) {
    ordered_json j;
    j["image_id"] = sample.image_id;
    j["positive"] = sample.positive;
    ordered_json negs = ordered_json::array();
    for (const auto& neg : sample.negatives) negs.push_back(negative_to_json(neg));
    j["negatives"] = std::move(negs);
    out += j.dump();
    out += '\n';
  }
  return out;
}

BenchmarkSet benchmark_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw ParseError("benchmark file: missing header line");
  }
  BenchmarkSet set;
  try {
    const auto header = ordered_json::parse(line);
    set.name = header.at("name").get<std::string>();
    set.seed = header.at("seed").get<std::int64_t>();
    set.generator_version = header.at("generator_version").get<std::string>();
    set.source_corpus = header.at("source_corpus").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("benchmark header: ") + e.what());
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    BenchmarkSample sample;
    try {
      const auto j = ordered_json::parse(line);
      sample.image_id = j.at("image_id").get<std::string>();
      sample.positive = j.at("positive").get<std::string>();
      for (const auto& jn : j.at("negatives")) {
        sample.negatives.push_back(negative_from_json(jn));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("benchmark line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    set.samples.push_back(std::move(sample));
  }
  validate_set(set);
  return set;
}

void persist_benchmark(const BenchmarkSet& set,
                       const std::filesystem::path& path) {
  atomic_write_file(path, benchmark_to_string(set));
}

BenchmarkSet load_benchmark(const std::filesystem::path& path) {
  return benchmark_from_string(read_file(path));
}

}  // namespace ohd
