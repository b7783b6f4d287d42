#include "mmlda/inference.hpp"

#include <cmath>

#include "mmlda/random.hpp"
#include "mmlda/text_io.hpp"

namespace mmlda {

std::uint64_t document_seed(std::uint64_t seed, const std::string& doc_id) {
  return derive_seed(seed, doc_id);
}

namespace {

void check_modalities(const TrainedModel& model, const Corpus& corpus) {
  if (corpus.modality_names() != model.modality_names) {
    throw ValidationError("held-out corpus modalities do not match the trained model");
  }
  for (std::size_t m = 0; m < model.num_modalities(); ++m) {
    if (corpus.vocabularies()[m].size() != model.vocab_size(m)) {
      throw ValidationError("vocabulary size mismatch in modality '" + model.modality_names[m] + "'");
    }
  }
}

// Per modality, per topic training totals n_t (frozen-count mode).
std::vector<std::vector<double>> topic_totals(const TrainedModel& model) {
  std::vector<std::vector<double>> totals;
  for (const auto& counts : model.topic_word) {
    std::vector<double> row(counts.rows(), 0.0);
    for (std::size_t t = 0; t < counts.rows(); ++t) {
      for (auto c : counts.row(t)) row[t] += static_cast<double>(c);
    }
    totals.push_back(std::move(row));
  }
  return totals;
}

std::vector<double> fold_in_impl(const TrainedModel& model, const Document& doc, const FoldInOptions& options,
                                 const std::vector<std::vector<double>>& totals) {
  if (options.sweeps == 0) throw ValidationError("fold_in: sweeps must be >= 1");
  const std::size_t T = model.num_topics();
  const auto& alpha = model.hyper.alpha;
  if (doc.counts.size() != model.num_modalities()) {
    throw ValidationError("fold_in: document '" + doc.doc_id + "' has wrong modality count");
  }

  std::vector<Token> tokens;
  for (std::size_t m = 0; m < doc.counts.size(); ++m) {
    for (const auto& wc : doc.counts[m]) {
      if (wc.word >= model.vocab_size(m)) {
        throw ValidationError("fold_in: document '" + doc.doc_id + "' word id " + std::to_string(wc.word) +
                              " unknown to modality '" + model.modality_names[m] + "'");
      }
      for (std::uint32_t c = 0; c < wc.count; ++c) tokens.push_back({static_cast<std::uint32_t>(m), wc.word, 0});
    }
  }

  const bool counts_mode = options.mode == FoldInMode::frozen_counts;
  // Frozen-count mode also tracks the document's own topic-word counts.
  std::vector<Matrix<double>> own;
  std::vector<std::vector<double>> own_total;
  if (counts_mode) {
    for (std::size_t m = 0; m < model.num_modalities(); ++m) {
      own.emplace_back(T, model.vocab_size(m));
      own_total.emplace_back(T, 0.0);
    }
  }
  std::vector<double> ndt(T, 0.0);
  const auto place = [&](const Token& tok, double delta) {
    ndt[tok.topic] += delta;
    if (counts_mode) {
      own[tok.modality](tok.topic, tok.word) += delta;
      own_total[tok.modality][tok.topic] += delta;
    }
  };

  Rng rng(document_seed(options.seed, doc.doc_id));
  for (auto& tok : tokens) {
    tok.topic = static_cast<std::uint32_t>(uniform_below(rng, T));
    place(tok, 1.0);
  }

  std::vector<double> weights(T);
  for (std::size_t sweep = 0; sweep < options.sweeps; ++sweep) {
    for (auto& tok : tokens) {
      place(tok, -1.0);
      const std::size_t m = tok.modality;
      double total = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        double word_prob;
        if (counts_mode) {
          const double beta = model.hyper.beta[m];
          word_prob = (static_cast<double>(model.topic_word[m](t, tok.word)) + own[m](t, tok.word) + beta) /
                      (totals[m][t] + own_total[m][t] + static_cast<double>(model.vocab_size(m)) * beta);
        } else {
          word_prob = model.phi[m](t, tok.word);
        }
        weights[t] = (ndt[t] + alpha[t]) * word_prob;
        total += weights[t];
      }
      if (!(total > 0.0)) {
        throw ValidationError("fold_in: word " + std::to_string(tok.word) + " of document '" + doc.doc_id +
                              "' has zero probability under every topic");
      }
      double x = uniform01(rng) * total;
      std::uint32_t pick = static_cast<std::uint32_t>(T - 1);
      for (std::size_t t = 0; t < T; ++t) {
        x -= weights[t];
        if (x < 0.0) {
          pick = static_cast<std::uint32_t>(t);
          break;
        }
      }
      // Rounding can leave x >= 0 past the end; fall back to a supported topic.
      while (weights[pick] <= 0.0 && pick > 0) --pick;
      tok.topic = pick;
      place(tok, 1.0);
    }
  }

  const double denom = static_cast<double>(tokens.size()) + model.hyper.alpha_sum();
  std::vector<double> theta(T);
  for (std::size_t t = 0; t < T; ++t) theta[t] = (ndt[t] + alpha[t]) / denom;
  return theta;
}

}  // namespace

std::vector<double> fold_in_document(const TrainedModel& model, const Document& doc,
                                     const FoldInOptions& options) {
  const auto totals = options.mode == FoldInMode::frozen_counts ? topic_totals(model)
                                                                : std::vector<std::vector<double>>{};
  return fold_in_impl(model, doc, options, totals);
}

FoldInResult fold_in(const TrainedModel& model, const Corpus& heldout, const FoldInOptions& options) {
  check_modalities(model, heldout);
  const auto totals = options.mode == FoldInMode::frozen_counts ? topic_totals(model)
                                                                : std::vector<std::vector<double>>{};
  FoldInResult result;
  result.sweeps_used = options.sweeps;
  result.thetas = Matrix<double>(heldout.size(), model.num_topics());
  for (std::size_t h = 0; h < heldout.size(); ++h) {
    const auto& doc = heldout.document(h);
    const auto theta = fold_in_impl(model, doc, options, totals);
    std::copy(theta.begin(), theta.end(), result.thetas.row(h).begin());
    result.doc_ids.push_back(doc.doc_id);
  }
  return result;
}

void save_fold_in(const FoldInResult& result, const std::filesystem::path& path) {
  std::vector<std::string> header;
  for (std::size_t t = 0; t < result.thetas.cols(); ++t) header.push_back("t" + std::to_string(t));
  text::write_keyed_csv(path, "doc_id", header, result.doc_ids, result.thetas);
}

FoldInResult load_fold_in(const std::filesystem::path& path) {
  auto table = text::read_keyed_csv(path);
  FoldInResult result;
  result.doc_ids = std::move(table.keys);
  result.thetas = std::move(table.values);
  for (std::size_t r = 0; r < result.thetas.rows(); ++r) {
    double s = 0.0;
    for (double v : result.thetas.row(r)) s += v;
    if (std::abs(s - 1.0) > 1e-9) {
      throw ValidationError(path.string() + ": row for '" + result.doc_ids[r] + "' does not sum to 1");
    }
  }
  return result;
}

}  // namespace mmlda
