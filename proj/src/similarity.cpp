#include "mmlda/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mmlda/text_io.hpp"

namespace mmlda {

std::string_view to_string(Measure measure) {
  switch (measure) {
    case Measure::predictive: return "predictive";
    case Measure::kl: return "kl";
    case Measure::cosine: return "cosine";
    case Measure::inner: return "inner";
  }
  return "unknown";
}

Measure parse_measure(std::string_view name) {
  if (name == "predictive") return Measure::predictive;
  if (name == "kl") return Measure::kl;
  if (name == "cosine") return Measure::cosine;
  if (name == "inner") return Measure::inner;
  throw ValidationError("unknown similarity measure '" + std::string(name) + "'");
}

double predictive_similarity(std::span<const Bag> words_a, std::span<const double> theta_b,
                             std::span<const Matrix<double>> phi) {
  if (words_a.size() != phi.size()) throw ValidationError("predictive_similarity: modality count mismatch");
  const std::size_t T = theta_b.size();
  double log_lik = 0.0;
  std::uint64_t n = 0;
  for (std::size_t m = 0; m < words_a.size(); ++m) {
    if (phi[m].rows() != T) throw ValidationError("predictive_similarity: topic count mismatch");
    // Sum in word order with repeated words merged, so any token order gives
    // the same floating-point result.
    const Bag& given = words_a[m];
    const bool canonical = std::adjacent_find(given.begin(), given.end(), [](const WordCount& x, const WordCount& y) {
                             return x.word >= y.word;
                           }) == given.end();
    Bag merged;
    if (!canonical) {
      merged = given;
      std::sort(merged.begin(), merged.end(), [](const WordCount& x, const WordCount& y) { return x.word < y.word; });
      std::size_t k = 0;
      for (std::size_t i = 1; i < merged.size(); ++i) {
        if (merged[i].word == merged[k].word) merged[k].count += merged[i].count;
        else merged[++k] = merged[i];
      }
      merged.resize(merged.empty() ? 0 : k + 1);
    }
    for (const auto& wc : canonical ? given : merged) {
      if (wc.word >= phi[m].cols()) throw ValidationError("predictive_similarity: word id out of range");
      double p = 0.0;
      for (std::size_t t = 0; t < T; ++t) p += phi[m](t, wc.word) * theta_b[t];
      if (!(p > 0.0)) {
        throw ValidationError("predictive_similarity: word " + std::to_string(wc.word) +
                              " has zero probability under the topic mixture");
      }
      log_lik += wc.count * std::log(p);
      n += wc.count;
    }
  }
  if (n == 0) throw ValidationError("predictive_similarity: document has no words");
  return log_lik / static_cast<double>(n);
}

double alt_similarity(std::span<const double> theta_a, std::span<const double> theta_b, Measure kind) {
  if (theta_a.size() != theta_b.size()) throw ValidationError("alt_similarity: length mismatch");
  switch (kind) {
    case Measure::kl: {
      double kl = 0.0;
      for (std::size_t t = 0; t < theta_a.size(); ++t) {
        if (!(theta_a[t] > 0.0) || !(theta_b[t] > 0.0)) {
          throw ValidationError("alt_similarity: KL needs strictly positive components");
        }
        kl += theta_a[t] * std::log(theta_a[t] / theta_b[t]);
      }
      return kl;
    }
    case Measure::cosine:
    case Measure::inner: {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t t = 0; t < theta_a.size(); ++t) {
        dot += theta_a[t] * theta_b[t];
        na += theta_a[t] * theta_a[t];
        nb += theta_b[t] * theta_b[t];
      }
      if (kind == Measure::inner) return dot;
      if (na == 0.0 || nb == 0.0) throw ValidationError("alt_similarity: cosine of a zero vector");
      return dot / (std::sqrt(na) * std::sqrt(nb));
    }
    case Measure::predictive:
      break;
  }
  throw ValidationError("alt_similarity: predictive measure needs document words");
}

SimilarityMatrix similarity_matrix(const Corpus& heldout, const FoldInResult& thetas, const TrainedModel& model,
                                   Measure measure) {
  const std::size_t H = heldout.size();
  const std::size_t T = model.num_topics();
  if (thetas.thetas.cols() != T) throw ValidationError("similarity_matrix: theta width differs from model topics");

  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < thetas.doc_ids.size(); ++i) row_of.emplace(thetas.doc_ids[i], i);
  std::vector<std::span<const double>> theta(H);
  for (std::size_t h = 0; h < H; ++h) {
    const auto it = row_of.find(heldout.document(h).doc_id);
    if (it == row_of.end()) {
      throw ValidationError("similarity_matrix: no topic proportions for '" + heldout.document(h).doc_id + "'");
    }
    theta[h] = thetas.thetas.row(it->second);
  }

  SimilarityMatrix out;
  out.doc_ids = heldout.doc_ids();
  out.measure = measure;
  out.values = Matrix<double>(H, H);
  const auto context = [&](std::size_t a, std::size_t b) {
    return " (A='" + out.doc_ids[a] + "', B='" + out.doc_ids[b] + "')";
  };

  if (measure != Measure::predictive) {
    for (std::size_t a = 0; a < H; ++a) {
      for (std::size_t b = 0; b < H; ++b) {
        try {
          out.values(a, b) = alt_similarity(theta[a], theta[b], measure);
        } catch (const ValidationError& e) {
          throw ValidationError(e.what() + context(a, b));
        }
      }
    }
    return out;
  }

  if (heldout.modality_names() != model.modality_names) {
    throw ValidationError("similarity_matrix: held-out modalities do not match the model");
  }
  // Column-major evaluation: for each B, the log mixture probability of every
  // vocabulary word, then each row A is a weighted mean over its words.
  std::vector<std::size_t> offset(model.num_modalities() + 1, 0);
  for (std::size_t m = 0; m < model.num_modalities(); ++m) offset[m + 1] = offset[m] + model.vocab_size(m);
  std::vector<double> log_prob(offset.back());
  std::vector<std::uint64_t> length(H, 0);
  for (std::size_t a = 0; a < H; ++a) {
    length[a] = heldout.document(a).total_tokens();
    if (length[a] == 0) throw ValidationError("similarity_matrix: document has no words" + context(a, a));
  }

  for (std::size_t b = 0; b < H; ++b) {
    for (std::size_t m = 0; m < model.num_modalities(); ++m) {
      const auto& phi = model.phi[m];
      double* dst = log_prob.data() + offset[m];
      for (std::size_t w = 0; w < phi.cols(); ++w) dst[w] = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const double th = theta[b][t];
        const auto row = phi.row(t);
        for (std::size_t w = 0; w < row.size(); ++w) dst[w] += row[w] * th;
      }
      for (std::size_t w = 0; w < phi.cols(); ++w) {
        dst[w] = dst[w] > 0.0 ? std::log(dst[w]) : -HUGE_VAL;
      }
    }
    for (std::size_t a = 0; a < H; ++a) {
      const auto& doc = heldout.document(a);
      double sum = 0.0;
      for (std::size_t m = 0; m < doc.counts.size(); ++m) {
        for (const auto& wc : doc.counts[m]) sum += wc.count * log_prob[offset[m] + wc.word];
      }
      if (!std::isfinite(sum)) {
        throw ValidationError("predictive_similarity: a word has zero probability under the topic mixture" +
                              context(a, b));
      }
      out.values(a, b) = sum / static_cast<double>(length[a]);
    }
  }
  return out;
}

void save_similarity(const SimilarityMatrix& matrix, const std::filesystem::path& path, const std::string& fold) {
  text::write_keyed_csv(path, "doc_id", matrix.doc_ids, matrix.doc_ids, matrix.values);
  auto meta = path;
  meta += ".meta";
  text::write_key_values(meta, {{"measure", std::string(to_string(matrix.measure))},
                                {"fold", fold},
                                {"size", std::to_string(matrix.size())},
                                {"diagonal_excluded", matrix.diagonal_excluded ? "true" : "false"}});
}

SimilarityMatrix load_similarity(const std::filesystem::path& path) {
  auto table = text::read_keyed_csv(path);
  if (table.header != table.keys) {
    throw ValidationError(path.string() + ": row and column doc_ids differ");
  }
  SimilarityMatrix out;
  out.doc_ids = std::move(table.keys);
  out.values = std::move(table.values);
  auto meta = path;
  meta += ".meta";
  if (std::filesystem::exists(meta)) {
    const auto kv = text::read_key_values(meta);
    if (const auto it = kv.find("measure"); it != kv.end()) out.measure = parse_measure(it->second);
  }
  for (double v : out.values.data()) {
    if (!std::isfinite(v)) throw ValidationError(path.string() + ": non-finite similarity value");
  }
  return out;
}

}  // namespace mmlda
