#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "mmlda/corpus.hpp"
#include "mmlda/text_io.hpp"

using namespace mmlda;

namespace {

void write(const std::filesystem::path& p, const std::string& s) { text::write_text(p, s); }

ModalityData modality(const std::string& name, std::size_t V, std::vector<Bag> bags, std::vector<std::string> ids = {}) {
  return {fixtures::vocab(name, V), std::move(bags), std::move(ids)};
}

}  // namespace

TEST_CASE("load_modality parses the sparse format") {
  fixtures::TempDir dir;
  write(dir.path() / "a.vocab", "x\ny\nz\n");
  write(dir.path() / "a.counts", "2 3 2\n0 0 4\n1 2 1\n");
  const auto data = load_modality(dir.path() / "a.counts", dir.path() / "a.vocab");
  CHECK(data.vocabulary.modality_name == "a");
  CHECK(data.vocabulary.size() == 3);
  REQUIRE(data.bags.size() == 2);
  CHECK(data.bags[0] == Bag{{0, 4}});
  CHECK(data.bags[1] == Bag{{2, 1}});
}

TEST_CASE("load_modality with an empty body yields empty documents") {
  fixtures::TempDir dir;
  write(dir.path() / "a.vocab", "x\ny\nz\n");
  write(dir.path() / "a.counts", "2 3 0\n");
  const auto data = load_modality(dir.path() / "a.counts", dir.path() / "a.vocab");
  REQUIRE(data.bags.size() == 2);
  CHECK(data.bags[0].empty());
  CHECK(data.bags[1].empty());
}

TEST_CASE("load_modality errors") {
  fixtures::TempDir dir;
  write(dir.path() / "a.vocab", "x\ny\nz\n");

  SUBCASE("word id out of range") {
    write(dir.path() / "a.counts", "2 3 1\n0 5 1\n");
    CHECK_THROWS_AS(load_modality(dir.path() / "a.counts", dir.path() / "a.vocab"), ValidationError);
  }
  SUBCASE("duplicate (doc, word)") {
    write(dir.path() / "a.counts", "2 3 2\n0 1 1\n0 1 3\n");
    CHECK_THROWS_WITH_AS(load_modality(dir.path() / "a.counts", dir.path() / "a.vocab"),
                         doctest::Contains("duplicate"), ValidationError);
  }
  SUBCASE("malformed line reports its line number") {
    write(dir.path() / "a.counts", "2 3 2\n0 1 1\n1 x 3\n");
    try {
      load_modality(dir.path() / "a.counts", dir.path() / "a.vocab");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("zero count") {
    write(dir.path() / "a.counts", "2 3 1\n0 1 0\n");
    CHECK_THROWS_AS(load_modality(dir.path() / "a.counts", dir.path() / "a.vocab"), ValidationError);
  }
  SUBCASE("header V differs from vocabulary") {
    write(dir.path() / "a.counts", "2 4 0\n");
    CHECK_THROWS_AS(load_modality(dir.path() / "a.counts", dir.path() / "a.vocab"), ValidationError);
  }
  SUBCASE("NNZ mismatch") {
    write(dir.path() / "a.counts", "2 3 2\n0 1 1\n");
    CHECK_THROWS_AS(load_modality(dir.path() / "a.counts", dir.path() / "a.vocab"), ParseError);
  }
  SUBCASE("duplicate vocabulary token") {
    write(dir.path() / "b.vocab", "x\nx\n");
    write(dir.path() / "b.counts", "1 2 0\n");
    CHECK_THROWS_AS(load_modality(dir.path() / "b.counts", dir.path() / "b.vocab"), ValidationError);
  }
}

TEST_CASE("assemble_corpus") {
  SUBCASE("two modalities over four shared documents") {
    std::vector<ModalityData> mods;
    mods.push_back(modality("a", 3, {{{0, 1}}, {}, {{2, 2}}, {{1, 1}}}));
    mods.push_back(modality("b", 2, {{}, {{1, 1}}, {}, {{0, 5}}}));
    const auto c = assemble_corpus(std::move(mods));
    CHECK(c.num_modalities() == 2);
    CHECK(c.size() == 4);
    CHECK(c.document(3).tokens_in(1) == 5);
    CHECK(c.doc_ids() == std::vector<std::string>{"0", "1", "2", "3"});
  }
  SUBCASE("labels are attached") {
    std::vector<ModalityData> mods;
    mods.push_back(modality("a", 2, {{{0, 1}}, {{1, 1}}}));
    const auto c = assemble_corpus(std::move(mods), {"s1", "s2"}, {{"s1", "rock"}, {"s2", "jazz"}});
    CHECK(c.has_labels());
    CHECK(c.document(0).label == "rock");
    CHECK(c.document(1).label == "jazz");
  }
  SUBCASE("empty documents are retained and flagged") {
    std::vector<ModalityData> mods;
    mods.push_back(modality("a", 2, {{{0, 1}}, {}}));
    const auto c = assemble_corpus(std::move(mods));
    CHECK(c.size() == 2);
    CHECK(c.empty_documents() == std::vector<std::size_t>{1});
  }
  SUBCASE("declared universes are realigned by id") {
    std::vector<ModalityData> mods;
    mods.push_back(modality("a", 2, {{{0, 1}}, {{1, 2}}}, {"x", "y"}));
    mods.push_back(modality("b", 2, {{{1, 7}}, {{0, 3}}}, {"y", "x"}));
    const auto c = assemble_corpus(std::move(mods));
    CHECK(c.document(0).doc_id == "x");
    CHECK(c.document(0).counts[1] == Bag{{0, 3}});
  }
  SUBCASE("conflicting universes list mismatched ids") {
    std::vector<ModalityData> mods;
    mods.push_back(modality("a", 2, {{{0, 1}}, {}}, {"x", "y"}));
    mods.push_back(modality("b", 2, {{}, {}}, {"y", "z"}));
    CHECK_THROWS_WITH_AS(assemble_corpus(std::move(mods)), doctest::Contains("x, z"), ValidationError);
  }
  SUBCASE("mismatched document counts") {
    std::vector<ModalityData> mods;
    mods.push_back(modality("a", 2, {{}, {}, {}}));
    mods.push_back(modality("b", 2, {{}, {}}));
    CHECK_THROWS_AS(assemble_corpus(std::move(mods)), ValidationError);
  }
  SUBCASE("label for an unknown document") {
    std::vector<ModalityData> mods;
    mods.push_back(modality("a", 2, {{}}));
    CHECK_THROWS_AS(assemble_corpus(std::move(mods), {}, {{"nope", "x"}}), ValidationError);
  }
}

TEST_CASE("save then load reproduces the corpus") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto c = fixtures::random_corpus(seed, 12, {4, 7}, 6);
    std::vector<Document> docs = c.documents();
    for (std::size_t d = 0; d < docs.size(); d += 2) docs[d].label = "L" + std::to_string(d % 3);
    c = c.with_documents(docs);
    fixtures::TempDir dir;
    save_corpus(c, dir.path());
    const auto back = load_corpus(dir.path());
    CHECK(back.vocabularies() == c.vocabularies());
    CHECK(back.documents() == c.documents());
    CHECK(back.name() == c.name());
  }
}

TEST_CASE("cv_split partitions the corpus") {
  const auto c = fixtures::random_corpus(3, 10, {3}, 4);
  const auto folds = cv_split(c, 5, 42);
  REQUIRE(folds.size() == 5);
  std::map<std::string, int> seen;
  for (const auto& f : folds) {
    CHECK(f.heldout_ids.size() == 2);
    std::set<std::string> all(f.train_ids.begin(), f.train_ids.end());
    for (const auto& id : f.heldout_ids) {
      CHECK(all.count(id) == 0);
      all.insert(id);
      ++seen[id];
    }
    CHECK(all.size() == c.size());
  }
  CHECK(seen.size() == c.size());
  for (const auto& [id, n] : seen) CHECK(n == 1);

  const auto again = cv_split(c, 5, 42);
  for (std::size_t k = 0; k < 5; ++k) CHECK(again[k].heldout_ids == folds[k].heldout_ids);
  const auto other = cv_split(c, 5, 43);
  bool differs = false;
  for (std::size_t k = 0; k < 5; ++k) differs |= other[k].heldout_ids != folds[k].heldout_ids;
  CHECK(differs);
}

TEST_CASE("cv_split is stratified by label and balanced") {
  auto c = fixtures::random_corpus(4, 47, {3}, 2);
  auto docs = c.documents();
  for (std::size_t d = 0; d < docs.size(); ++d) docs[d].label = "g" + std::to_string(d % 3);
  c = c.with_documents(docs);
  const auto folds = cv_split(c, 10, 7);
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& f : folds) {
    lo = std::min(lo, f.heldout_ids.size());
    hi = std::max(hi, f.heldout_ids.size());
    std::map<std::string, int> per_label;
    for (const auto& id : f.heldout_ids) ++per_label[*c.document(*c.find(id)).label];
    for (const auto& [label, n] : per_label) CHECK(n <= 2);  // 15-16 docs per label over 10 folds
  }
  CHECK(hi - lo <= 1);
}

TEST_CASE("cv_split rejects bad fold counts") {
  const auto c = fixtures::random_corpus(3, 4, {3}, 4);
  CHECK_THROWS_AS(cv_split(c, 5, 0), ValidationError);
  CHECK_THROWS_AS(cv_split(c, 1, 0), ValidationError);
}

TEST_CASE("augment_empty_documents") {
  const auto c = fixtures::corpus({3, 5, 2}, {{{}, {}, {{0, 2}}}, {{{1, 1}}, {}, {}}});
  const std::vector<std::string> both{"m0", "m1"};

  const auto out = augment_empty_documents(c, both);
  const auto& pseudo = out.document(0);
  CHECK(pseudo.augmented);
  CHECK(pseudo.counts[0].size() == 3);
  CHECK(pseudo.counts[1].size() == 5);
  CHECK(pseudo.tokens_in(0) + pseudo.tokens_in(1) == 8);
  for (const auto& wc : pseudo.counts[1]) CHECK(wc.count == 1);
  CHECK(pseudo.counts[2] == Bag{{0, 2}});  // modalities outside the subset untouched
  CHECK(out.document(1) == c.document(1));

  SUBCASE("idempotent") { CHECK(augment_empty_documents(out, both) == out); }
  SUBCASE("empty subset is a no-op") { CHECK(augment_empty_documents(c, {}) == c); }
  SUBCASE("unknown modality") {
    const std::vector<std::string> bad{"nope"};
    CHECK_THROWS_AS(augment_empty_documents(c, bad), ValidationError);
  }
}

TEST_CASE("corpus views") {
  const auto c = fixtures::random_corpus(9, 6, {3, 4}, 5);
  const std::vector<std::string> ids{"d4", "d1"};
  const auto sub = c.subset(ids);
  CHECK(sub.doc_ids() == ids);
  const std::vector<std::string> mods{"m1"};
  const auto one = c.select_modalities(mods);
  CHECK(one.num_modalities() == 1);
  CHECK(one.document(2).counts[0] == c.document(2).counts[1]);
  CHECK_THROWS_AS(c.subset(std::vector<std::string>{"zz"}), ValidationError);
}
