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

#include <optional>
#include <string>
#include <vector>

namespace ohd {

// Typed negative captions. insert_* kinds carry 1-3 objects absent from the
// image, remove carries 1-2 annotated objects, alter carries none.
enum class NegativeKind {
  insert_random,
  insert_popular,
  insert_adversarial,
  remove,
  alter,
};

enum class Provenance { llm, template_fallback };

const char* to_string(NegativeKind kind);
NegativeKind negative_kind_from_string(const std::string& s);
const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct NegativeSpec {
  NegativeKind kind = NegativeKind::alter;
  std::vector<std::string> objects;
  int combo_index = 0;  // ordinal within its kind

  bool operator==(const NegativeSpec&) const = default;
};

struct NegativeCaption {
  std::string text;
  NegativeSpec spec;
  Provenance provenance = Provenance::template_fallback;
  std::optional<std::string> model_id;

  bool operator==(const NegativeCaption&) const = default;
};

}  // namespace ohd
