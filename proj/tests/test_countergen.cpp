#include <doctest.h>

#include <map>
#include <set>

#include "ohd/countergen.hpp"
#include "ohd/errors.hpp"
#include "testutil.hpp"

using namespace ohd;
using namespace ohd::testutil;

namespace {

// Deterministic fake client for llm-path tests.
class FakeClient final : public LlmClient {
 public:
  explicit FakeClient(std::string reply, bool fail = false)
      : reply_(std::move(reply)), fail_(fail) {}
  std::string send(const std::string&) override {
    if (fail_) throw GenerationError("fake outage");
    return reply_;
  }
  const std::string& model_id() const override { return id_; }

 private:
  std::string reply_;
  bool fail_;
  std::string id_ = "fake-model";
};

struct Tables {
  FrequencyTable freq;
  CooccurrenceTable cooc;
};

Tables toy_tables(const std::vector<ImageRecord>& records) {
  return {build_frequency_table(records), build_cooccurrence_table(records)};
}

}  // namespace

TEST_CASE("popular selection ranks by frequency excluding present objects") {
  FrequencyTable freq;
  freq.counts = {{"dog", 9}, {"cat", 5}, {"car", 3}, {"tree", 1}};
  freq.total = 18;
  CooccurrenceTable cooc;
  const auto rec = make_record("i", {"dog"}, {"a dog."});
  Rng rng(0);
  const auto picked = select_hallucination_objects(
      rec, freq, cooc, NegativeKind::insert_popular, 3, rng);
  CHECK(picked == std::vector<std::string>{"cat", "car", "tree"});
}

TEST_CASE("random selection is seed-deterministic") {
  const auto records = make_toy_corpus(20, 1);
  const auto [freq, cooc] = toy_tables(records);
  Rng a(42), b(42);
  const auto r1 = select_hallucination_objects(
      records[0], freq, cooc, NegativeKind::insert_random, 3, a);
  const auto r2 = select_hallucination_objects(
      records[0], freq, cooc, NegativeKind::insert_random, 3, b);
  CHECK(r1 == r2);
  for (const auto& name : r1) CHECK(!records[0].has_object(name));
}

TEST_CASE("adversarial selection ranks by summed co-occurrence") {
  // leash co-occurs most with dog; bone less; moon never
  FrequencyTable freq;
  freq.counts = {{"dog", 3}, {"leash", 2}, {"bone", 1}, {"moon", 1}};
  freq.total = 7;
  CooccurrenceTable cooc;
  cooc.add("dog", "leash", 5);
  cooc.add("dog", "bone", 2);
  const auto rec = make_record("i", {"dog"}, {"a dog."});
  Rng rng(0);
  const auto picked = select_hallucination_objects(
      rec, freq, cooc, NegativeKind::insert_adversarial, 3, rng);
  REQUIRE(picked.size() == 3);
  CHECK(picked[0] == "leash");
  CHECK(picked[1] == "bone");
  CHECK(picked[2] == "moon");  // zero score, lexicographic among zeros
}

TEST_CASE("selection requires enough eligible vocabulary") {
  FrequencyTable freq;
  freq.counts = {{"dog", 1}, {"cat", 1}};
  freq.total = 2;
  CooccurrenceTable cooc;
  const auto rec = make_record("i", {"dog"}, {"a dog."});
  Rng rng(0);
  CHECK_THROWS_AS(select_hallucination_objects(
                      rec, freq, cooc, NegativeKind::insert_random, 3, rng),
                  GenerationError);
  CHECK_THROWS_AS(select_hallucination_objects(rec, freq, cooc,
                                               NegativeKind::remove, 3, rng),
                  ValidationError);
}

TEST_CASE("insertion subsets: 7 nonempty subsets in (size, lex) order") {
  const std::vector<std::string> objs{"c", "a", "b"};
  const auto subsets = enumerate_insertion_subsets(objs);
  REQUIRE(subsets.size() == 7);
  const std::vector<std::vector<std::string>> expected{
      {"a"}, {"b"}, {"c"}, {"a", "b"}, {"a", "c"}, {"b", "c"}, {"a", "b", "c"}};
  CHECK(subsets == expected);
}

TEST_CASE("removal subsets: 6 subsets of size 1 or 2") {
  const std::vector<std::string> objs{"a", "b", "c"};
  const auto subsets = enumerate_removal_subsets(objs);
  REQUIRE(subsets.size() == 6);
  const std::vector<std::vector<std::string>> expected{
      {"a"}, {"b"}, {"c"}, {"a", "b"}, {"a", "c"}, {"b", "c"}};
  CHECK(subsets == expected);
  for (const auto& s : subsets) CHECK(s.size() <= 2);
}

TEST_CASE("subset enumeration validates arity and distinctness") {
  CHECK_THROWS_AS(
      enumerate_insertion_subsets(std::vector<std::string>{"a", "b"}),
      ValidationError);
  CHECK_THROWS_AS(
      enumerate_insertion_subsets(std::vector<std::string>{"a", "a", "b"}),
      ValidationError);
  CHECK_THROWS_AS(
      enumerate_removal_subsets(std::vector<std::string>{"a", "a", "b"}),
      ValidationError);
}

TEST_CASE("render_prompt substitutes the templates") {
  const auto add = render_prompt(PromptTemplate::add, "a dog runs", {"cat"});
  CHECK(add.rendered.find("includes each object from the list") !=
        std::string::npos);
  CHECK(add.rendered.find("a dog runs") != std::string::npos);
  CHECK(add.rendered.find("[cat]") != std::string::npos);

  const auto alter = render_prompt(PromptTemplate::alter_object, "a dog", {});
  CHECK(alter.rendered.find("modify the objects, colors, attributes") !=
        std::string::npos);

  const auto rm =
      render_prompt(PromptTemplate::remove_object, "x", {"cat", "dog"});
  CHECK(rm.rendered.find("[cat, dog]") != std::string::npos);

  CHECK_THROWS_AS(render_prompt(PromptTemplate::add, "x", {}), ValidationError);
}

TEST_CASE("template add inserts a with-clause before the final period") {
  CHECK(template_add("a dog runs in a park.", {"cat"}, 0) ==
        "a dog runs in a park with a cat.");
  CHECK(template_add("a dog runs.", {"owl"}, 0) == "a dog runs with an owl.");
  const auto multi = template_add("a dog runs.", {"cat", "kite"}, 0);
  CHECK(multi == "a dog runs with a cat and a kite.");
}

TEST_CASE("template remove drops the noun phrase and dangling words") {
  const auto out = template_remove("a dog and a cat sit.", {"cat"});
  CHECK(out.find("cat") == std::string::npos);
  CHECK(out.find("dog") != std::string::npos);
  CHECK(out == "a dog sit.");
  // object absent from the caption leaves it unchanged
  CHECK(template_remove("a dog sits.", {"zebra"}) == "a dog sits.");
}

TEST_CASE("template alter yields distinct variants that differ from input") {
  const std::string caption = "a red dog sits on a chair.";
  std::set<std::string> seen;
  for (int v = 0; v < 8; ++v) {
    const auto out = template_alter(caption, v);
    CHECK(out != caption);
    CHECK(seen.insert(out).second);
  }
}

TEST_CASE("llm output missing an object falls back to the template") {
  FakeClient bad("a dog runs in a park.");  // no cat in reply
  Rng rng(0);
  const auto req = render_prompt(PromptTemplate::add, "a dog runs in a park.",
                                 {"cat"});
  const auto result = rewrite_caption(req, &bad, rng);
  CHECK(result.provenance == Provenance::template_fallback);
  CHECK(result.text == "a dog runs in a park with a cat.");
}

TEST_CASE("valid llm output is used with provenance and model id") {
  FakeClient good("a dog runs in a park beside a cat.");
  Rng rng(0);
  const auto req = render_prompt(PromptTemplate::add, "a dog runs in a park.",
                                 {"cat"});
  const auto result = rewrite_caption(req, &good, rng);
  CHECK(result.provenance == Provenance::llm);
  CHECK(result.model_id == "fake-model");
  CHECK(result.text == "a dog runs in a park beside a cat.");
}

TEST_CASE("client failure with fallback disabled raises a generation error") {
  FakeClient down("", /*fail=*/true);
  Rng rng(0);
  const auto req = render_prompt(PromptTemplate::add, "a dog.", {"cat"});
  CHECK_THROWS_AS(rewrite_caption(req, &down, rng, 0, /*allow_fallback=*/false),
                  GenerationError);
  // with fallback the template text comes back
  const auto result = rewrite_caption(req, &down, rng);
  CHECK(result.provenance == Provenance::template_fallback);
}

TEST_CASE("generate_sample yields 27 negatives with the full kind split") {
  const auto records = make_toy_corpus(30, 2);
  const auto [freq, cooc] = toy_tables(records);
  Rng rng(9);
  const auto sample = generate_sample(records[0], records[0].captions[0], freq,
                                      cooc, {}, rng);
  REQUIRE(sample.negatives.size() == 27);
  std::map<NegativeKind, int> by_kind;
  for (const auto& neg : sample.negatives) ++by_kind[neg.spec.kind];
  CHECK(by_kind[NegativeKind::insert_random] == 7);
  CHECK(by_kind[NegativeKind::insert_popular] == 7);
  CHECK(by_kind[NegativeKind::insert_adversarial] == 7);
  CHECK(by_kind[NegativeKind::remove] == 6);
  CHECK(by_kind[NegativeKind::alter] == 0);
  // insertion negatives never name an annotated object; remove only annotated
  for (const auto& neg : sample.negatives) {
    for (const auto& o : neg.spec.objects) {
      if (neg.spec.kind == NegativeKind::remove) {
        CHECK(records[0].has_object(o));
      } else {
        CHECK(!records[0].has_object(o));
      }
    }
    if (neg.provenance == Provenance::template_fallback &&
        neg.spec.kind != NegativeKind::remove &&
        neg.spec.kind != NegativeKind::alter) {
      for (const auto& o : neg.spec.objects) {
        CHECK(neg.text.find(o) != std::string::npos);
      }
    }
  }
}

TEST_CASE("records with 1-2 objects still yield 27 via the alter path") {
  auto records = make_toy_corpus(30, 4);
  records.push_back(make_record("one", {"dog"}, {"a photo of a dog."}));
  records.push_back(
      make_record("two", {"cat", "tree"}, {"a photo of a cat and a tree."}));
  const auto [freq, cooc] = toy_tables(records);
  for (const auto& id : {std::string("one"), std::string("two")}) {
    const auto& rec = *std::find_if(records.begin(), records.end(),
                                    [&](const auto& r) { return r.image_id == id; });
    Rng rng(5);
    const auto sample = generate_sample(rec, rec.captions[0], freq, cooc, {}, rng);
    REQUIRE(sample.negatives.size() == 27);
    std::map<NegativeKind, int> by_kind;
    for (const auto& neg : sample.negatives) ++by_kind[neg.spec.kind];
    CHECK(by_kind[NegativeKind::remove] + by_kind[NegativeKind::alter] == 6);
    CHECK(by_kind[NegativeKind::alter] > 0);
  }
}

TEST_CASE("template-mode generation is a pure function of the seed") {
  const auto records = make_toy_corpus(10, 6);
  const auto [freq, cooc] = toy_tables(records);
  Rng a(77), b(77);
  const auto s1 = generate_sample(records[3], records[3].captions[0], freq, cooc, {}, a);
  const auto s2 = generate_sample(records[3], records[3].captions[0], freq, cooc, {}, b);
  CHECK(s1.negatives == s2.negatives);
}

TEST_CASE("negative texts are pairwise distinct and differ from the positive") {
  const auto records = make_toy_corpus(40, 8);
  const auto [freq, cooc] = toy_tables(records);
  for (const auto& rec : records) {
    Rng rng(fnv1a(rec.image_id));
    const auto sample = generate_sample(rec, rec.captions[0], freq, cooc, {}, rng);
    std::set<std::string> texts;
    for (const auto& neg : sample.negatives) {
      CHECK(neg.text != sample.positive);
      CHECK(texts.insert(neg.text).second);
    }
  }
}

TEST_CASE("generate_sample rejects captions the record does not own") {
  const auto records = make_toy_corpus(5, 10);
  const auto [freq, cooc] = toy_tables(records);
  Rng rng(0);
  CHECK_THROWS_AS(
      generate_sample(records[0], "not a caption", freq, cooc, {}, rng),
      ValidationError);
}

TEST_CASE("generate_benchmark is parallel-stable") {
  const auto records = make_toy_corpus(12, 12);
  const auto serial = generate_benchmark(records, "bench", 3, {}, "toy", 1);
  const auto parallel = generate_benchmark(records, "bench", 3, {}, "toy", 4);
  CHECK(benchmark_to_string(serial) == benchmark_to_string(parallel));
}
