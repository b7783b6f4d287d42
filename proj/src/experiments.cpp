#include "mmlda/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>

#include <json.hpp>

#include "mmlda/inference.hpp"
#include "mmlda/random.hpp"
#include "mmlda/text_io.hpp"

namespace mmlda {

std::vector<double> sample_dirichlet(std::span<const double> concentration, Rng& rng) {
  // G(a) = G(a + 1) * U^(1/a), kept in log space.
  std::vector<double> log_g(concentration.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < concentration.size(); ++i) {
    const double a = concentration[i];
    std::gamma_distribution<double> gamma(a + 1.0, 1.0);
    const double u = 1.0 - uniform01(rng);  // (0, 1]
    log_g[i] = std::log(gamma(rng)) + std::log(u) / a;
    top = std::max(top, log_g[i]);
  }
  double total = 0.0;
  for (auto& v : log_g) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : log_g) v /= total;
  return log_g;
}

namespace {

std::uint32_t sample_categorical(std::span<const double> p, Rng& rng) {
  double x = uniform01(rng);
  for (std::size_t i = 0; i < p.size(); ++i) {
    x -= p[i];
    if (x < 0.0) return static_cast<std::uint32_t>(i);
  }
  for (std::size_t i = p.size(); i > 0; --i) {
    if (p[i - 1] > 0.0) return static_cast<std::uint32_t>(i - 1);
  }
  return 0;
}

std::string padded(std::size_t i, std::size_t width) {
  auto s = std::to_string(i);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

}  // namespace

Corpus make_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed, SyntheticTruth* truth) {
  if (spec.modalities.empty()) throw ValidationError("synthetic corpus needs at least one modality");
  if (spec.num_labels == 0 || spec.docs_per_label == 0 || spec.true_topics == 0) {
    throw ValidationError("synthetic corpus needs labels, documents and topics");
  }
  const std::size_t T = spec.true_topics;
  const std::size_t L = spec.num_labels;
  const std::size_t D = L * spec.docs_per_label;
  Rng rng(seed);

  std::vector<std::vector<double>> base(L);
  const std::vector<double> label_prior(T, spec.label_concentration);
  for (auto& b : base) b = sample_dirichlet(label_prior, rng);

  SyntheticTruth local;
  SyntheticTruth& out = truth ? *truth : local;
  out = {};
  out.theta = Matrix<double>(D, T);
  out.theta_independent = Matrix<double>(D, T);
  std::vector<double> conc(T);
  for (std::size_t d = 0; d < D; ++d) {
    const auto& b = base[d / spec.docs_per_label];
    for (std::size_t t = 0; t < T; ++t) conc[t] = spec.doc_concentration * b[t];
    const auto th = sample_dirichlet(conc, rng);
    std::copy(th.begin(), th.end(), out.theta.row(d).begin());
    const auto& other = base[uniform_below(rng, L)];
    for (std::size_t t = 0; t < T; ++t) conc[t] = spec.doc_concentration * other[t];
    const auto ti = sample_dirichlet(conc, rng);
    std::copy(ti.begin(), ti.end(), out.theta_independent.row(d).begin());
  }

  std::vector<Vocabulary> vocabs;
  for (const auto& mod : spec.modalities) {
    Vocabulary v{mod.name, {}};
    for (std::size_t w = 0; w < mod.vocab_size; ++w) v.tokens.push_back(mod.name + "_" + std::to_string(w));
    vocabs.push_back(std::move(v));
    Matrix<double> phi(T, mod.vocab_size);
    const std::vector<double> prior(mod.vocab_size, spec.word_concentration);
    for (std::size_t t = 0; t < T; ++t) {
      const auto row = sample_dirichlet(prior, rng);
      std::copy(row.begin(), row.end(), phi.row(t).begin());
    }
    out.phi.push_back(std::move(phi));
  }

  const std::size_t width = std::to_string(D).size();
  const std::size_t label_width = std::to_string(L).size();
  std::vector<Document> docs(D);
  for (std::size_t d = 0; d < D; ++d) {
    auto& doc = docs[d];
    doc.doc_id = "doc" + padded(d, width);
    doc.label = "g" + padded(d / spec.docs_per_label, label_width);
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
      const auto& mod = spec.modalities[m];
      const auto theta = mod.independent ? out.theta_independent.row(d) : out.theta.row(d);
      std::vector<std::uint32_t> counts(mod.vocab_size, 0);
      for (std::size_t n = 0; n < mod.tokens_per_doc; ++n) {
        const auto z = sample_categorical(theta, rng);
        ++counts[sample_categorical(out.phi[m].row(z), rng)];
      }
      Bag bag;
      for (std::uint32_t w = 0; w < counts.size(); ++w) {
        if (counts[w] > 0) bag.push_back({w, counts[w]});
      }
      doc.counts.push_back(std::move(bag));
    }
  }
  return Corpus(spec.name, std::move(vocabs), std::move(docs));
}

const ModalityGroup& ExperimentPlan::group(const std::string& name) const {
  for (const auto& g : groups) {
    if (g.name == name) return g;
  }
  throw ValidationError("unknown modality group '" + name + "'");
}

void ExperimentPlan::validate(const Corpus& corpus) const {
  if (groups.empty()) throw ValidationError("plan has no modality groups");
  std::set<std::string> names;
  for (const auto& g : groups) {
    if (g.modalities.empty()) throw ValidationError("group '" + g.name + "' has no modalities");
    if (!names.insert(g.name).second) throw ValidationError("duplicate group '" + g.name + "'");
    for (const auto& m : g.modalities) corpus.modality_index(m);
  }
  if (topic_counts.empty()) throw ValidationError("plan has no topic counts");
  for (auto t : topic_counts) {
    if (t == 0) throw ValidationError("topic counts must be >= 1");
  }
  if (seeds < 1) throw ValidationError("plan needs at least one seed per model");
  if (folds < 2 || folds > corpus.size()) throw ValidationError("folds must be in [2, D]");
  if (folds_to_run > folds) throw ValidationError("folds_to_run exceeds folds");
  if (permutations < 1) throw ValidationError("permutations must be >= 1");
  if (foldin_sweeps < 1) throw ValidationError("foldin_sweeps must be >= 1");
}

std::uint64_t split_seed(std::uint64_t experiment_seed) { return derive_seed(experiment_seed, "split"); }

std::uint64_t model_seed(std::uint64_t experiment_seed, std::size_t fold, std::size_t seed_index) {
  return derive_seed(derive_seed(derive_seed(experiment_seed, "model"), fold), seed_index);
}

std::uint64_t foldin_seed(std::uint64_t model_seed) { return derive_seed(model_seed, "foldin"); }

std::uint64_t mantel_seed(std::uint64_t experiment_seed, std::size_t topics, std::size_t fold, std::size_t seed_a,
                          std::size_t seed_b) {
  auto s = derive_seed(derive_seed(experiment_seed, "mantel"), topics);
  s = derive_seed(s, fold);
  return derive_seed(derive_seed(s, seed_a), seed_b);
}

Quantiles quantiles(std::vector<double> values) {
  if (values.empty()) throw ValidationError("quantiles of an empty set");
  std::sort(values.begin(), values.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.size(), values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

ExperimentRunner::ExperimentRunner(Corpus corpus, ExperimentPlan plan)
    : corpus_(std::move(corpus)), plan_(std::move(plan)) {
  plan_.validate(corpus_);
  splits_ = cv_split(corpus_, plan_.folds, split_seed(plan_.seed));
}

std::size_t ExperimentRunner::folds_to_run() const {
  return plan_.folds_to_run == 0 ? plan_.folds : plan_.folds_to_run;
}

SimilarityMatrix ExperimentRunner::similarity(const std::string& group, std::size_t topics, std::size_t fold,
                                              std::uint64_t seed) const {
  const auto& g = plan_.group(group);
  const auto& split = splits_.at(fold);
  const Corpus view = corpus_.select_modalities(g.modalities);
  const Corpus train_docs = view.subset(split.train_ids);
  const Corpus heldout = augment_empty_documents(view.subset(split.heldout_ids), g.modalities);

  TrainConfig cfg = plan_.train;
  cfg.topics = topics;
  cfg.seed = seed;
  const TrainedModel model = train(train_docs, cfg);
  const FoldInResult thetas = fold_in(model, heldout, {plan_.foldin_sweeps, foldin_seed(seed), FoldInMode::frozen_phi});
  return similarity_matrix(heldout, thetas, model, Measure::predictive);
}

const std::vector<SimilarityMatrix>& ExperimentRunner::cell(const std::string& group, std::size_t topics,
                                                            std::size_t fold) {
  const auto key = std::make_tuple(group, topics, fold);
  if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
  std::vector<SimilarityMatrix> matrices;
  for (std::size_t s = 0; s < plan_.seeds; ++s) {
    if (plan_.verbose) {
      std::clog << "[experiment] group=" << group << " T=" << topics << " fold=" << fold << " seed=" << s << "\n";
    }
    matrices.push_back(similarity(group, topics, fold, model_seed(plan_.seed, fold, s)));
    if (!plan_.output_dir.empty()) {
      // Matrices are written once, next to the reports.
      const auto path = plan_.output_dir / "similarity" /
                        (group + "_T" + std::to_string(topics) + "_fold" + std::to_string(fold) + "_seed" +
                         std::to_string(s) + ".csv");
      save_similarity(matrices.back(), path, std::to_string(fold));
    }
  }
  return cache_.emplace(key, std::move(matrices)).first->second;
}

namespace {

void summarize(CorrelationReport& report) {
  std::map<std::pair<std::string, std::size_t>, std::vector<const CorrelationRow*>> cells;
  for (const auto& row : report.rows) cells[{row.label, row.topics}].push_back(&row);
  for (const auto& [key, rows] : cells) {
    CorrelationSummary s;
    s.label = key.first;
    s.topics = key.second;
    std::vector<double> rhos;
    for (const auto* r : rows) {
      rhos.push_back(r->rho);
      if (r->p_value) s.max_p_value = std::max(s.max_p_value.value_or(0.0), *r->p_value);
    }
    s.rho = quantiles(std::move(rhos));
    report.summaries.push_back(std::move(s));
  }
}

std::string cell_name(const std::string& label, std::size_t topics, std::size_t fold) {
  return label + " T=" + std::to_string(topics) + " fold=" + std::to_string(fold);
}

}  // namespace

CorrelationReport ExperimentRunner::run_stability() {
  if (plan_.seeds < 2) throw ValidationError("stability needs at least two seeds per model");
  CorrelationReport report;
  for (const auto& g : plan_.groups) {
    for (auto topics : plan_.topic_counts) {
      for (std::size_t fold = 0; fold < folds_to_run(); ++fold) {
        try {
          const auto& matrices = cell(g.name, topics, fold);
          std::vector<CorrelationRow> rows;
          for (std::size_t a = 0; a < matrices.size(); ++a) {
            for (std::size_t b = a + 1; b < matrices.size(); ++b) {
              rows.push_back({fold, g.name, topics, a, b, spearman_offdiag(matrices[a].values, matrices[b].values), {}});
            }
          }
          report.rows.insert(report.rows.end(), rows.begin(), rows.end());
        } catch (const std::exception& e) {
          const auto name = cell_name(g.name, topics, fold);
          std::clog << "[experiment] cell failed: " << name << ": " << e.what() << "\n";
          report.failed_cells.push_back(name + ": " + e.what());
        }
      }
    }
  }
  summarize(report);
  if (!plan_.output_dir.empty()) {
    write_report_csv(report, plan_.output_dir / "stability.csv");
    write_report_summary_json(report, plan_.output_dir / "stability_summary.json");
  }
  return report;
}

CorrelationReport ExperimentRunner::run_cross_group(const std::string& group_a, const std::string& group_b) {
  plan_.group(group_a);
  plan_.group(group_b);
  const std::string label = group_a + "~" + group_b;
  CorrelationReport report;
  for (auto topics : plan_.topic_counts) {
    for (std::size_t fold = 0; fold < folds_to_run(); ++fold) {
      const std::vector<SimilarityMatrix>* ma = nullptr;
      const std::vector<SimilarityMatrix>* mb = nullptr;
      try {
        ma = &cell(group_a, topics, fold);
        mb = &cell(group_b, topics, fold);
      } catch (const std::exception& e) {
        const auto name = cell_name(label, topics, fold);
        std::clog << "[experiment] cell failed: " << name << ": " << e.what() << "\n";
        report.failed_cells.push_back(name + ": " + e.what());
        continue;
      }
      for (std::size_t a = 0; a < ma->size(); ++a) {
        for (std::size_t b = 0; b < mb->size(); ++b) {
          if ((*ma)[a].doc_ids != (*mb)[b].doc_ids) {
            throw ValidationError("held-out document sets differ between groups '" + group_a + "' and '" +
                                  group_b + "'");
          }
          const auto result = mantel_test((*ma)[a].values, (*mb)[b].values, plan_.permutations,
                                          mantel_seed(plan_.seed, topics, fold, a, b), Tail::upper);
          report.rows.push_back({fold, label, topics, a, b, result.rho_observed, result.p_value});
        }
      }
    }
  }
  summarize(report);
  if (!plan_.output_dir.empty()) {
    write_report_csv(report, plan_.output_dir / ("cross_" + group_a + "_" + group_b + ".csv"));
    write_report_summary_json(report, plan_.output_dir / ("cross_" + group_a + "_" + group_b + "_summary.json"));
  }
  return report;
}

void write_report_csv(const CorrelationReport& report, const std::filesystem::path& path) {
  std::string out = "fold,label,topics,seed_a,seed_b,rho,p\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.fold) + "," + r.label + "," + std::to_string(r.topics) + "," + std::to_string(r.seed_a) +
           "," + std::to_string(r.seed_b) + "," + text::format_double(r.rho) + "," +
           (r.p_value ? text::format_double(*r.p_value) : std::string{}) + "\n";
  }
  text::write_text(path, out);
}

void write_report_summary_json(const CorrelationReport& report, const std::filesystem::path& path) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& s : report.summaries) {
    nlohmann::json j{{"label", s.label},   {"topics", s.topics},   {"count", s.rho.count},
                     {"min", s.rho.min},   {"q1", s.rho.q1},       {"median", s.rho.median},
                     {"q3", s.rho.q3},     {"max", s.rho.max}};
    if (s.max_p_value) j["max_p"] = *s.max_p_value;
    cells.push_back(std::move(j));
  }
  nlohmann::json doc{{"rows", report.rows.size()}, {"cells", cells}, {"failed_cells", report.failed_cells}};
  text::write_text(path, doc.dump(2) + "\n");
}

GroupSeparation summarize_group_separation(const SimilarityMatrix& similarity,
                                           const std::map<std::string, std::string>& labels) {
  const std::size_t H = similarity.size();
  std::vector<const std::string*> tag(H);
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < H; ++i) {
    const auto it = labels.find(similarity.doc_ids[i]);
    if (it == labels.end()) throw ValidationError("no label for document '" + similarity.doc_ids[i] + "'");
    tag[i] = &it->second;
    distinct.insert(it->second);
  }
  if (distinct.size() < 2) throw ValidationError("group separation needs at least two labels");
  std::vector<double> within, between;
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < H; ++j) {
      if (i == j) continue;
      (*tag[i] == *tag[j] ? within : between).push_back(similarity.values(i, j));
    }
  }
  if (within.empty()) throw ValidationError("group separation: no within-label pairs");
  GroupSeparation out;
  out.within = quantiles(std::move(within));
  out.between = quantiles(std::move(between));
  out.median_difference = out.within.median - out.between.median;
  return out;
}

}  // namespace mmlda
