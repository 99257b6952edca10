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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ohd/negatives.hpp"

namespace ohd {

// Canonical object label: trimmed, lowercase, nonempty. Throws
// ValidationError on an empty result. Singularization is not attempted;
// matching is exact-string.
std::string canonical_object_name(std::string_view raw);

struct ObjectAnnotation {
  std::string name;  // canonical lowercase label
  std::optional<double> confidence;     // in [0,1]
  std::optional<double> area_fraction;  // in [0,1]

  bool operator==(const ObjectAnnotation&) const = default;
};

// An image with its segmented-object ground truth. The core never
// dereferences image_uri.
struct ImageRecord {
  std::string image_id;
  std::string image_uri;
  std::vector<ObjectAnnotation> objects;  // names deduplicated
  std::vector<std::string> captions;      // nonempty

  std::vector<std::string> object_names() const;
  bool has_object(const std::string& name) const;
};

// Validates invariants, canonicalizes object names, dedups duplicates.
ImageRecord make_image_record(std::string image_id, std::string image_uri,
                              std::vector<ObjectAnnotation> objects,
                              std::vector<std::string> captions);

struct FrequencyTable {
  std::map<std::string, std::int64_t> counts;
  std::int64_t total = 0;  // sum of counts
};

// Unordered-pair co-occurrence counts; keys stored with first < second.
struct CooccurrenceTable {
  std::map<std::pair<std::string, std::string>, std::int64_t> counts;

  void add(const std::string& a, const std::string& b, std::int64_t n = 1);
  std::int64_t count(const std::string& a, const std::string& b) const;
};

struct BenchmarkSample {
  std::string image_id;
  std::string positive;
  std::vector<NegativeCaption> negatives;  // exactly 27 on valid samples
};

struct BenchmarkSet {
  std::string name;
  std::vector<BenchmarkSample> samples;
  std::int64_t seed = 0;
  std::string generator_version;
  std::string source_corpus;
};

enum class AnnotationFormat { jsonl };

// One JSON record per line:
// {"image_id","image_uri","objects":[{"name","confidence?","area_fraction?"}],"captions":[...]}
std::vector<ImageRecord> load_annotations(
    const std::filesystem::path& path,
    AnnotationFormat format = AnnotationFormat::jsonl);

void save_annotations(std::span<const ImageRecord> records,
                      const std::filesystem::path& path);

// counts[o] = number of records whose object set contains o (per-image
// presence, not per-mention).
FrequencyTable build_frequency_table(std::span<const ImageRecord> records);

// Each unordered pair of distinct objects within one record adds 1.
CooccurrenceTable build_cooccurrence_table(std::span<const ImageRecord> records);

// Throws ValidationError unless the sample has 27 pairwise-distinct
// negatives split 7/7/7 across insert kinds with remove+alter = 6.
void validate_sample(const BenchmarkSample& sample);
void validate_set(const BenchmarkSet& set);

// Line-delimited JSON with fixed key order: one header line, then one line
// per sample. Byte-deterministic; persist . load is the identity.
void persist_benchmark(const BenchmarkSet& set,
                       const std::filesystem::path& path);
BenchmarkSet load_benchmark(const std::filesystem::path& path);

// Serialization to strings, shared by persistence and the CLI.
std::string benchmark_to_string(const BenchmarkSet& set);
BenchmarkSet benchmark_from_string(const std::string& text);

}  // namespace ohd
