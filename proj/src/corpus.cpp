#include "mmlda/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <iterator>
#include <numeric>
#include <set>

#include "mmlda/random.hpp"
#include "mmlda/text_io.hpp"

namespace mmlda {

namespace {

bool valid_identifier(std::string_view s, bool allow_dots) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
    if (!allow_dots && (c == '/' || c == '\\')) return false;
  }
  return true;
}

void check_modality_name(const std::string& name) {
  const bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
  if (!ok) throw ValidationError("invalid modality name '" + name + "' (use [A-Za-z0-9_-])");
}

}  // namespace

std::uint64_t bag_total(const Bag& bag) {
  std::uint64_t total = 0;
  for (const auto& wc : bag) total += wc.count;
  return total;
}

void Vocabulary::validate() const {
  check_modality_name(modality_name);
  if (tokens.empty()) throw ValidationError("vocabulary '" + modality_name + "' is empty");
  std::set<std::string_view> seen;
  for (const auto& t : tokens) {
    if (!seen.insert(t).second) {
      throw ValidationError("vocabulary '" + modality_name + "' has duplicate token '" + t + "'");
    }
  }
}

std::uint64_t Document::tokens_in(std::size_t modality) const {
  return modality < counts.size() ? bag_total(counts[modality]) : 0;
}

std::uint64_t Document::total_tokens() const {
  std::uint64_t total = 0;
  for (const auto& bag : counts) total += bag_total(bag);
  return total;
}

Corpus::Corpus(std::string name, std::vector<Vocabulary> vocabularies,
               std::vector<Document> documents)
    : name_(std::move(name)),
      vocabularies_(std::move(vocabularies)),
      documents_(std::move(documents)) {
  validate();
  for (std::size_t i = 0; i < documents_.size(); ++i) index_.emplace(documents_[i].doc_id, i);
}

void Corpus::validate() const {
  if (vocabularies_.empty()) throw ValidationError("corpus '" + name_ + "' has no modalities");
  std::set<std::string_view> names;
  for (const auto& v : vocabularies_) {
    v.validate();
    if (!names.insert(v.modality_name).second) {
      throw ValidationError("duplicate modality '" + v.modality_name + "'");
    }
  }
  std::set<std::string_view> ids;
  for (const auto& doc : documents_) {
    if (!valid_identifier(doc.doc_id, true)) {
      throw ValidationError("invalid doc_id '" + doc.doc_id + "'");
    }
    if (!ids.insert(doc.doc_id).second) throw ValidationError("duplicate doc_id '" + doc.doc_id + "'");
    if (doc.counts.size() != vocabularies_.size()) {
      throw ValidationError("document '" + doc.doc_id + "' references " +
                            std::to_string(doc.counts.size()) + " modalities, corpus declares " +
                            std::to_string(vocabularies_.size()));
    }
    for (std::size_t m = 0; m < doc.counts.size(); ++m) {
      const auto& bag = doc.counts[m];
      for (std::size_t i = 0; i < bag.size(); ++i) {
        if (bag[i].word >= vocabularies_[m].size()) {
          throw ValidationError("document '" + doc.doc_id + "': word id " +
                                std::to_string(bag[i].word) + " out of range for modality '" +
                                vocabularies_[m].modality_name + "'");
        }
        if (bag[i].count == 0) {
          throw ValidationError("document '" + doc.doc_id + "': zero count entry");
        }
        if (i > 0 && bag[i - 1].word >= bag[i].word) {
          throw ValidationError("document '" + doc.doc_id + "': bag not strictly sorted by word id");
        }
      }
    }
  }
}

std::vector<std::string> Corpus::modality_names() const {
  std::vector<std::string> out;
  for (const auto& v : vocabularies_) out.push_back(v.modality_name);
  return out;
}

std::vector<std::size_t> Corpus::vocab_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& v : vocabularies_) out.push_back(v.size());
  return out;
}

std::size_t Corpus::modality_index(const std::string& name) const {
  for (std::size_t m = 0; m < vocabularies_.size(); ++m) {
    if (vocabularies_[m].modality_name == name) return m;
  }
  throw ValidationError("unknown modality '" + name + "' in corpus '" + name_ + "'");
}

std::optional<std::size_t> Corpus::find(const std::string& doc_id) const {
  const auto it = index_.find(doc_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Corpus::doc_ids() const {
  std::vector<std::string> out;
  out.reserve(documents_.size());
  for (const auto& d : documents_) out.push_back(d.doc_id);
  return out;
}

bool Corpus::has_labels() const {
  return std::any_of(documents_.begin(), documents_.end(),
                     [](const Document& d) { return d.label.has_value(); });
}

std::map<std::string, std::string> Corpus::labels() const {
  std::map<std::string, std::string> out;
  for (const auto& d : documents_) {
    if (d.label) out.emplace(d.doc_id, *d.label);
  }
  return out;
}

std::uint64_t Corpus::total_tokens() const {
  std::uint64_t total = 0;
  for (const auto& d : documents_) total += d.total_tokens();
  return total;
}

std::vector<std::size_t> Corpus::empty_documents() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (documents_[i].total_tokens() == 0) out.push_back(i);
  }
  return out;
}

Corpus Corpus::subset(std::span<const std::string> ids) const {
  std::vector<Document> docs;
  docs.reserve(ids.size());
  for (const auto& id : ids) {
    const auto i = find(id);
    if (!i) throw ValidationError("unknown doc_id '" + id + "' in corpus '" + name_ + "'");
    docs.push_back(documents_[*i]);
  }
  return Corpus(name_, vocabularies_, std::move(docs));
}

Corpus Corpus::select_modalities(std::span<const std::string> names) const {
  if (names.empty()) throw ValidationError("empty modality selection");
  std::vector<std::size_t> picks;
  std::vector<Vocabulary> vocabs;
  for (const auto& n : names) {
    picks.push_back(modality_index(n));
    vocabs.push_back(vocabularies_[picks.back()]);
  }
  std::vector<Document> docs;
  docs.reserve(documents_.size());
  for (const auto& d : documents_) {
    Document out{d.doc_id, {}, d.label, d.augmented};
    for (auto m : picks) out.counts.push_back(d.counts[m]);
    docs.push_back(std::move(out));
  }
  return Corpus(name_, std::move(vocabs), std::move(docs));
}

Corpus Corpus::with_documents(std::vector<Document> documents) const {
  return Corpus(name_, vocabularies_, std::move(documents));
}

Vocabulary load_vocabulary(const std::filesystem::path& path, std::string modality_name) {
  Vocabulary vocab{std::move(modality_name), text::read_lines(path)};
  // A trailing blank line is an artifact of the final newline.
  while (!vocab.tokens.empty() && vocab.tokens.back().empty()) vocab.tokens.pop_back();
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
    if (vocab.tokens[i].empty()) throw ParseError(path.string(), i + 1, "empty token");
  }
  vocab.validate();
  return vocab;
}

ModalityData load_modality(const std::filesystem::path& counts_path,
                           const std::filesystem::path& vocab_path, std::string modality_name) {
  if (modality_name.empty()) modality_name = counts_path.stem().string();
  ModalityData data;
  data.vocabulary = load_vocabulary(vocab_path, modality_name);
  const auto source = counts_path.string();
  const auto lines = text::read_lines(counts_path);

  std::size_t lineno = 0;
  std::uint64_t num_docs = 0, vocab_size = 0, nnz = 0;
  bool have_header = false;
  std::uint64_t entries = 0;
  std::vector<std::set<std::uint32_t>> seen;
  for (const auto& raw : lines) {
    ++lineno;
    const auto fields = text::split_ws(raw);
    if (fields.empty()) continue;
    if (fields.size() != 3) {
      throw ParseError(source, lineno, "expected 3 fields, got " + std::to_string(fields.size()));
    }
    const auto a = text::parse_uint(fields[0], source, lineno);
    const auto b = text::parse_uint(fields[1], source, lineno);
    const auto c = text::parse_uint(fields[2], source, lineno);
    if (!have_header) {
      num_docs = a, vocab_size = b, nnz = c;
      have_header = true;
      if (vocab_size != data.vocabulary.size()) {
        throw ValidationError(source + ":" + std::to_string(lineno) + ": header declares V=" +
                              std::to_string(vocab_size) + " but vocabulary has " +
                              std::to_string(data.vocabulary.size()) + " tokens");
      }
      data.bags.assign(num_docs, {});
      seen.assign(num_docs, {});
      continue;
    }
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    if (a >= num_docs) {
      throw ValidationError(where + "doc id " + std::to_string(a) + " >= D=" + std::to_string(num_docs));
    }
    if (b >= vocab_size) {
      throw ValidationError(where + "word id " + std::to_string(b) + " >= V=" + std::to_string(vocab_size));
    }
    if (c == 0 || c > UINT32_MAX) throw ValidationError(where + "count must be in [1, 2^32)");
    if (!seen[a].insert(static_cast<std::uint32_t>(b)).second) {
      throw ValidationError(where + "duplicate entry for doc " + std::to_string(a) + ", word " +
                            std::to_string(b));
    }
    data.bags[a].push_back({static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)});
    ++entries;
  }
  if (!have_header) throw ParseError(source, lineno + 1, "missing 'D V NNZ' header");
  if (entries != nnz) {
    throw ParseError(source, lineno, "header declares NNZ=" + std::to_string(nnz) + ", found " +
                                         std::to_string(entries) + " entries");
  }
  for (auto& bag : data.bags) {
    std::sort(bag.begin(), bag.end(), [](const WordCount& x, const WordCount& y) { return x.word < y.word; });
  }
  return data;
}

void save_modality(const ModalityData& data, const std::filesystem::path& counts_path,
                   const std::filesystem::path& vocab_path) {
  std::string vocab;
  for (const auto& t : data.vocabulary.tokens) vocab += t + "\n";
  text::write_text(vocab_path, vocab);

  std::size_t nnz = 0;
  for (const auto& bag : data.bags) nnz += bag.size();
  std::string out = std::to_string(data.bags.size()) + " " + std::to_string(data.vocabulary.size()) +
                    " " + std::to_string(nnz) + "\n";
  for (std::size_t d = 0; d < data.bags.size(); ++d) {
    for (const auto& wc : data.bags[d]) {
      out += std::to_string(d) + " " + std::to_string(wc.word) + " " + std::to_string(wc.count) + "\n";
    }
  }
  text::write_text(counts_path, out);
}

std::map<std::string, std::string> load_labels(const std::filesystem::path& path) {
  std::map<std::string, std::string> labels;
  const auto lines = text::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto fields = text::split(lines[i], '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError(path.string(), i + 1, "expected 'doc_id<TAB>label'");
    }
    if (!labels.emplace(std::string(fields[0]), std::string(fields[1])).second) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": duplicate label for '" +
                            std::string(fields[0]) + "'");
    }
  }
  return labels;
}

Corpus assemble_corpus(std::vector<ModalityData> modalities, const std::vector<std::string>& doc_ids,
                       const std::map<std::string, std::string>& labels, std::string name) {
  if (modalities.empty()) throw ValidationError("no modalities to assemble");

  // Resolve the common document universe.
  std::vector<std::string> universe;
  const bool declared = std::any_of(modalities.begin(), modalities.end(),
                                    [](const ModalityData& m) { return !m.doc_ids.empty(); });
  if (declared) {
    universe = modalities.front().doc_ids;
    if (!doc_ids.empty()) universe = doc_ids;
    const std::set<std::string> reference(universe.begin(), universe.end());
    for (const auto& mod : modalities) {
      const std::set<std::string> ids(mod.doc_ids.begin(), mod.doc_ids.end());
      if (ids != reference || mod.doc_ids.size() != mod.bags.size()) {
        std::vector<std::string> diff;
        std::set_symmetric_difference(ids.begin(), ids.end(), reference.begin(), reference.end(),
                                      std::back_inserter(diff));
        std::string listing;
        for (const auto& id : diff) listing += (listing.empty() ? "" : ", ") + id;
        throw ValidationError("modality '" + mod.vocabulary.modality_name +
                              "' has a conflicting document universe; mismatched ids: " +
                              (listing.empty() ? "(bag count differs from declared ids)" : listing));
      }
    }
  } else {
    const std::size_t d = modalities.front().bags.size();
    for (const auto& mod : modalities) {
      if (mod.bags.size() != d) {
        const std::size_t lo = std::min(d, mod.bags.size()), hi = std::max(d, mod.bags.size());
        std::string listing;
        for (std::size_t i = lo; i < hi && i < lo + 20; ++i) listing += (listing.empty() ? "" : ", ") + std::to_string(i);
        if (hi - lo > 20) listing += ", ...";
        throw ValidationError("modality '" + mod.vocabulary.modality_name + "' declares " +
                              std::to_string(mod.bags.size()) + " documents, expected " +
                              std::to_string(d) + "; mismatched ids: " + listing);
      }
    }
    if (!doc_ids.empty()) {
      if (doc_ids.size() != d) {
        throw ValidationError("doc id list has " + std::to_string(doc_ids.size()) +
                              " entries, modalities declare " + std::to_string(d));
      }
      universe = doc_ids;
    } else {
      for (std::size_t i = 0; i < d; ++i) universe.push_back(std::to_string(i));
    }
  }

  std::vector<Document> docs(universe.size());
  for (std::size_t i = 0; i < universe.size(); ++i) docs[i].doc_id = universe[i];
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < universe.size(); ++i) position.emplace(universe[i], i);

  std::vector<Vocabulary> vocabs;
  for (auto& mod : modalities) {
    for (std::size_t i = 0; i < mod.bags.size(); ++i) {
      const std::size_t target = mod.doc_ids.empty() ? i : position.at(mod.doc_ids[i]);
      docs[target].counts.push_back(std::move(mod.bags[i]));
    }
    vocabs.push_back(std::move(mod.vocabulary));
  }

  for (const auto& [id, label] : labels) {
    const auto it = position.find(id);
    if (it == position.end()) throw ValidationError("label given for unknown doc_id '" + id + "'");
    docs[it->second].label = label;
  }
  return Corpus(std::move(name), std::move(vocabs), std::move(docs));
}

Corpus load_corpus(const std::filesystem::path& dir) {
  const auto meta = text::read_key_values(dir / "corpus.txt");
  const auto get = [&](const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw ValidationError((dir / "corpus.txt").string() + ": missing key '" + key + "'");
    return it->second;
  };
  std::vector<std::string> doc_ids = text::read_lines(dir / "docs.txt");
  while (!doc_ids.empty() && doc_ids.back().empty()) doc_ids.pop_back();

  std::vector<ModalityData> modalities;
  const std::string names = get("modalities");
  for (auto name : text::split(names, ',')) {
    const std::string n(text::trim(name));
    modalities.push_back(load_modality(dir / (n + ".counts"), dir / (n + ".vocab"), n));
  }
  std::map<std::string, std::string> labels;
  if (std::filesystem::exists(dir / "labels.tsv")) labels = load_labels(dir / "labels.tsv");
  return assemble_corpus(std::move(modalities), doc_ids, labels, get("name"));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string modalities;
  for (const auto& v : corpus.vocabularies()) modalities += (modalities.empty() ? "" : ",") + v.modality_name;
  text::write_key_values(dir / "corpus.txt", {{"name", corpus.name()}, {"modalities", modalities}});

  std::string ids;
  for (const auto& d : corpus.documents()) ids += d.doc_id + "\n";
  text::write_text(dir / "docs.txt", ids);

  for (std::size_t m = 0; m < corpus.num_modalities(); ++m) {
    ModalityData data{corpus.vocabularies()[m], {}, {}};
    for (const auto& d : corpus.documents()) data.bags.push_back(d.counts[m]);
    const auto& n = data.vocabulary.modality_name;
    save_modality(data, dir / (n + ".counts"), dir / (n + ".vocab"));
  }
  if (corpus.has_labels()) {
    std::string labels;
    for (const auto& d : corpus.documents()) {
      if (d.label) labels += d.doc_id + "\t" + *d.label + "\n";
    }
    text::write_text(dir / "labels.tsv", labels);
  } else {
    std::filesystem::remove(dir / "labels.tsv");
  }
}

std::vector<FoldSplit> cv_split(const Corpus& corpus, std::size_t folds, std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (folds < 2) throw ValidationError("cv_split needs at least 2 folds");
  if (folds > n) {
    throw ValidationError("cv_split: " + std::to_string(folds) + " folds exceed " + std::to_string(n) +
                          " documents");
  }
  Rng rng(seed);

  // Strata in label order (one stratum when unlabelled); each stratum is
  // shuffled and the concatenation is dealt round-robin.
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& label = corpus.document(i).label;
    strata[label.value_or(std::string{})].push_back(i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  for (auto& [label, members] : strata) {
    shuffle(std::span<std::size_t>(members), rng);
    order.insert(order.end(), members.begin(), members.end());
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t i = 0; i < n; ++i) assignment[order[i]] = i % folds;

  std::vector<FoldSplit> out(folds);
  for (std::size_t k = 0; k < folds; ++k) out[k].fold_index = k;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = corpus.document(i).doc_id;
    for (std::size_t k = 0; k < folds; ++k) {
      (assignment[i] == k ? out[k].heldout_ids : out[k].train_ids).push_back(id);
    }
  }
  return out;
}

Corpus augment_empty_documents(const Corpus& corpus, std::span<const std::string> modality_subset) {
  if (modality_subset.empty()) return corpus;
  std::vector<std::size_t> picks;
  for (const auto& name : modality_subset) picks.push_back(corpus.modality_index(name));

  std::vector<Document> docs = corpus.documents();
  for (auto& doc : docs) {
    std::uint64_t tokens = 0;
    for (auto m : picks) tokens += doc.tokens_in(m);
    if (tokens > 0) continue;
    for (auto m : picks) {
      Bag uniform(corpus.vocabularies()[m].size());
      for (std::uint32_t w = 0; w < uniform.size(); ++w) uniform[w] = {w, 1};
      doc.counts[m] = std::move(uniform);
    }
    doc.augmented = true;
  }
  return corpus.with_documents(std::move(docs));
}

}  // namespace mmlda
