#ifndef MMLDA_TESTS_FIXTURES_HPP_
#define MMLDA_TESTS_FIXTURES_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "mmlda/corpus.hpp"
#include "mmlda/random.hpp"
#include "mmlda/sampler.hpp"

namespace fixtures {

inline mmlda::Vocabulary vocab(const std::string& name, std::size_t size) {
  mmlda::Vocabulary v{name, {}};
  for (std::size_t i = 0; i < size; ++i) v.tokens.push_back(name + std::to_string(i));
  return v;
}

// docs[d][m] is the bag of document d in modality m.
inline mmlda::Corpus corpus(const std::vector<std::size_t>& vocab_sizes,
                            const std::vector<std::vector<mmlda::Bag>>& docs) {
  std::vector<mmlda::Vocabulary> vocabs;
  for (std::size_t m = 0; m < vocab_sizes.size(); ++m) vocabs.push_back(vocab("m" + std::to_string(m), vocab_sizes[m]));
  std::vector<mmlda::Document> documents;
  for (std::size_t d = 0; d < docs.size(); ++d) documents.push_back({"d" + std::to_string(d), docs[d], {}, false});
  return mmlda::Corpus("fixture", std::move(vocabs), std::move(documents));
}

// Random corpus with Poisson-ish lengths; some documents may be empty.
inline mmlda::Corpus random_corpus(std::uint64_t seed, std::size_t docs, const std::vector<std::size_t>& vocab_sizes,
                                   std::size_t max_tokens) {
  mmlda::Rng rng(seed);
  std::vector<std::vector<mmlda::Bag>> out(docs);
  for (auto& doc : out) {
    for (auto v : vocab_sizes) {
      std::vector<std::uint32_t> counts(v, 0);
      const auto n = mmlda::uniform_below(rng, max_tokens + 1);
      for (std::size_t i = 0; i < n; ++i) ++counts[mmlda::uniform_below(rng, v)];
      mmlda::Bag bag;
      for (std::uint32_t w = 0; w < v; ++w) {
        if (counts[w]) bag.push_back({w, counts[w]});
      }
      doc.push_back(std::move(bag));
    }
  }
  return corpus(vocab_sizes, out);
}

// Reassigns every token of document d to the given topics.
inline void set_topics(mmlda::ModelState& st, std::size_t d, const std::vector<std::uint32_t>& topics) {
  for (std::size_t i = 0; i < topics.size(); ++i) {
    st.remove_token(d, i);
    st.assign_token(d, i, topics[i]);
  }
}

// State whose doc-topic table equals `counts` (one modality, one word).
inline mmlda::ModelState state_with_doc_topic_counts(const std::vector<std::vector<int>>& counts, double alpha_init = 1.0,
                                                     double beta_init = 0.5) {
  std::vector<std::vector<mmlda::Bag>> docs;
  for (const auto& row : counts) {
    std::uint32_t n = 0;
    for (int c : row) n += static_cast<std::uint32_t>(c);
    docs.push_back({n ? mmlda::Bag{{0, n}} : mmlda::Bag{}});
  }
  auto st = mmlda::init_state(corpus({1}, docs), counts.front().size(), 1, alpha_init, beta_init);
  for (std::size_t d = 0; d < counts.size(); ++d) {
    std::vector<std::uint32_t> topics;
    for (std::uint32_t t = 0; t < counts[d].size(); ++t) topics.insert(topics.end(), counts[d][t], t);
    set_topics(st, d, topics);
  }
  return st;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mmlda_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures

#endif  // MMLDA_TESTS_FIXTURES_HPP_
