#ifndef MMLDA_CORPUS_HPP_
#define MMLDA_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmlda/common.hpp"

namespace mmlda {

struct WordCount {
  std::uint32_t word = 0;
  std::uint32_t count = 0;
  bool operator==(const WordCount&) const = default;
};

// Sparse count bag of one document in one modality, sorted by word id.
using Bag = std::vector<WordCount>;

std::uint64_t bag_total(const Bag& bag);

struct Vocabulary {
  std::string modality_name;
  std::vector<std::string> tokens;  // index = word id

  std::size_t size() const { return tokens.size(); }
  // Throws ValidationError on duplicate tokens or an empty vocabulary.
  void validate() const;
  bool operator==(const Vocabulary&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<Bag> counts;  // one bag per corpus modality
  std::optional<std::string> label;
  bool augmented = false;  // replaced by the uniform pseudo-document

  std::uint64_t tokens_in(std::size_t modality) const;
  std::uint64_t total_tokens() const;
  bool operator==(const Document&) const = default;
};

// One modality as read from disk: vocabulary plus a bag per document index.
// `doc_ids`, when non-empty, declares the modality's document universe.
struct ModalityData {
  Vocabulary vocabulary;
  std::vector<Bag> bags;
  std::vector<std::string> doc_ids;
};

// Immutable after construction.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::string name, std::vector<Vocabulary> vocabularies, std::vector<Document> documents);

  const std::string& name() const { return name_; }
  const std::vector<Vocabulary>& vocabularies() const { return vocabularies_; }
  const std::vector<Document>& documents() const { return documents_; }
  const Document& document(std::size_t i) const { return documents_.at(i); }
  std::size_t size() const { return documents_.size(); }
  std::size_t num_modalities() const { return vocabularies_.size(); }
  std::vector<std::string> modality_names() const;
  std::vector<std::size_t> vocab_sizes() const;

  std::size_t modality_index(const std::string& name) const;
  std::optional<std::size_t> find(const std::string& doc_id) const;
  std::vector<std::string> doc_ids() const;
  bool has_labels() const;
  std::map<std::string, std::string> labels() const;
  std::uint64_t total_tokens() const;

  // Documents with zero tokens in every modality.
  std::vector<std::size_t> empty_documents() const;

  // Documents with the given ids, in the order given.
  Corpus subset(std::span<const std::string> ids) const;
  // Same documents restricted to the named modalities, in the order given.
  Corpus select_modalities(std::span<const std::string> names) const;
  Corpus with_documents(std::vector<Document> documents) const;

  bool operator==(const Corpus&) const = default;

 private:
  void validate() const;

  std::string name_;
  std::vector<Vocabulary> vocabularies_;
  std::vector<Document> documents_;
  std::map<std::string, std::size_t> index_;
};

struct FoldSplit {
  std::size_t fold_index = 0;
  std::vector<std::string> train_ids;    // corpus order
  std::vector<std::string> heldout_ids;  // corpus order
};

Vocabulary load_vocabulary(const std::filesystem::path& path, std::string modality_name);

// Reads one modality in the sparse "D V NNZ" + "doc word count" format.
ModalityData load_modality(const std::filesystem::path& counts_path,
                           const std::filesystem::path& vocab_path, std::string modality_name = {});

void save_modality(const ModalityData& data, const std::filesystem::path& counts_path,
                   const std::filesystem::path& vocab_path);

std::map<std::string, std::string> load_labels(const std::filesystem::path& path);

// Fuses modalities into one corpus. If modalities declare their own doc_ids,
// the universes must agree (documents are realigned by id); otherwise the
// bag counts must agree and `doc_ids` (or "0".."D-1") names the documents.
Corpus assemble_corpus(std::vector<ModalityData> modalities,
                       const std::vector<std::string>& doc_ids = {},
                       const std::map<std::string, std::string>& labels = {},
                       std::string name = "corpus");

// Directory layout: corpus.txt, docs.txt, <modality>.vocab, <modality>.counts,
// optional labels.tsv.
Corpus load_corpus(const std::filesystem::path& dir);
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// K folds, held-out sizes within one of each other, stratified by label when
// labels are present.
std::vector<FoldSplit> cv_split(const Corpus& corpus, std::size_t folds, std::uint64_t seed);

// Replaces documents that are empty across `modality_subset` with a pseudo
// document holding one occurrence of every word of those modalities.
Corpus augment_empty_documents(const Corpus& corpus, std::span<const std::string> modality_subset);

}  // namespace mmlda

#endif  // MMLDA_CORPUS_HPP_
