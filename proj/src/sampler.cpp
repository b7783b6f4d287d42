#include "mmlda/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmlda/special.hpp"

namespace mmlda {

double Hyperparams::alpha_sum() const {
  double s = 0.0;
  for (double a : alpha) s += a;
  return s;
}

void Hyperparams::validate() const {
  if (alpha.empty()) throw ValidationError("alpha is empty");
  for (double a : alpha) {
    if (!std::isfinite(a) || a <= 0.0) throw ValidationError("alpha entries must be finite and > 0");
  }
  for (double b : beta) {
    if (!std::isfinite(b) || b <= 0.0) throw ValidationError("beta entries must be finite and > 0");
  }
}

SparseCountTable::SparseCountTable(std::size_t rows, std::size_t topics)
    : topics_(topics), counts_(rows * topics, 0), slot_(rows * topics, -1), nonzero_(rows) {}

void SparseCountTable::increment(std::size_t r, std::uint32_t t) {
  const std::size_t at = r * topics_ + t;
  if (counts_[at]++ == 0) {
    slot_[at] = static_cast<std::int32_t>(nonzero_[r].size());
    nonzero_[r].push_back(t);
  }
}

void SparseCountTable::decrement(std::size_t r, std::uint32_t t) {
  const std::size_t at = r * topics_ + t;
  if (counts_[at] <= 0) {
    throw Error("count table underflow at row " + std::to_string(r) + ", topic " + std::to_string(t));
  }
  if (--counts_[at] == 0) {
    auto& list = nonzero_[r];
    const auto pos = static_cast<std::size_t>(slot_[at]);
    const std::uint32_t moved = list.back();
    list[pos] = moved;
    slot_[r * topics_ + moved] = static_cast<std::int32_t>(pos);
    list.pop_back();
    slot_[at] = -1;
  }
}

void ModelState::remove_token(std::size_t d, std::size_t i) {
  const Token& tok = tokens[d][i];
  doc_topic.decrement(d, tok.topic);
  word_topic[tok.modality].decrement(tok.word, tok.topic);
  if (--topic_total[tok.modality][tok.topic] < 0) throw Error("negative topic total");
}

void ModelState::assign_token(std::size_t d, std::size_t i, std::uint32_t t) {
  Token& tok = tokens[d][i];
  tok.topic = t;
  doc_topic.increment(d, t);
  word_topic[tok.modality].increment(tok.word, t);
  ++topic_total[tok.modality][t];
}

void ModelState::check_consistency() const {
  const std::size_t T = num_topics;
  Matrix<std::int64_t> dt(num_docs(), T);
  std::vector<Matrix<std::int64_t>> wt;
  std::vector<std::vector<std::int64_t>> tt(num_modalities(), std::vector<std::int64_t>(T, 0));
  for (auto v : vocab_sizes) wt.emplace_back(v, T);
  for (std::size_t d = 0; d < num_docs(); ++d) {
    if (tokens[d].size() != doc_length[d]) throw Error("document length mismatch at doc " + std::to_string(d));
    for (const auto& tok : tokens[d]) {
      if (tok.topic >= T) throw Error("topic id out of range");
      ++dt(d, tok.topic);
      ++wt[tok.modality](tok.word, tok.topic);
      ++tt[tok.modality][tok.topic];
    }
  }
  const auto check_table = [&](const SparseCountTable& table, const Matrix<std::int64_t>& ref,
                               const std::string& what) {
    for (std::size_t r = 0; r < ref.rows(); ++r) {
      std::size_t nz = 0;
      for (std::size_t t = 0; t < T; ++t) {
        if (table.get(r, t) != ref(r, t)) throw Error(what + " count mismatch at row " + std::to_string(r));
        nz += ref(r, t) > 0;
      }
      if (table.nonzero(r).size() != nz) throw Error(what + " nonzero index mismatch at row " + std::to_string(r));
      for (auto t : table.nonzero(r)) {
        if (ref(r, t) == 0) throw Error(what + " nonzero index lists an empty topic");
      }
    }
  };
  check_table(doc_topic, dt, "doc-topic");
  for (std::size_t m = 0; m < num_modalities(); ++m) {
    check_table(word_topic[m], wt[m], "topic-word[" + modality_names[m] + "]");
    if (topic_total[m] != tt[m]) throw Error("topic totals mismatch in modality " + modality_names[m]);
  }
}

void TrainConfig::validate() const {
  if (topics == 0) throw ValidationError("topics must be >= 1");
  if (iterations == 0) throw ValidationError("iterations must be >= 1");
  if (evidence_window == 0 || evidence_window > iterations) {
    throw ValidationError("evidence_window must be in [1, iterations]");
  }
  if (!std::isfinite(alpha_init) || alpha_init <= 0.0) throw ValidationError("alpha_init must be > 0");
  if (!std::isfinite(beta_init) || beta_init <= 0.0) throw ValidationError("beta_init must be > 0");
}

TrainConfig train_config_from(const text::KeyValues& kv, TrainConfig cfg) {
  const std::string src = "train config";
  for (const auto& [key, value] : kv) {
    if (key == "topics") cfg.topics = text::parse_uint(value, src + " key " + key, 0);
    else if (key == "iterations") cfg.iterations = text::parse_uint(value, src + " key " + key, 0);
    else if (key == "evidence_window") cfg.evidence_window = text::parse_uint(value, src + " key " + key, 0);
    else if (key == "burn_in") cfg.burn_in = text::parse_uint(value, src + " key " + key, 0);
    else if (key == "hyper_update_every") cfg.hyper_update_every = text::parse_uint(value, src + " key " + key, 0);
    else if (key == "alpha_init") cfg.alpha_init = text::parse_double(value, src + " key " + key, 0);
    else if (key == "beta_init") cfg.beta_init = text::parse_double(value, src + " key " + key, 0);
    else if (key == "seed") cfg.seed = text::parse_uint(value, src + " key " + key, 0);
    else if (key == "trace_evidence") cfg.trace_evidence = value == "1" || value == "true";
    else throw ValidationError("unknown train config key '" + key + "'");
  }
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return train_config_from(text::read_key_values(path));
}

ModelState init_state(const Corpus& corpus, std::size_t num_topics, std::uint64_t seed,
                      double alpha_init, double beta_init) {
  if (num_topics == 0) throw ValidationError("init_state: T must be >= 1");
  if (corpus.size() == 0) throw ValidationError("init_state: corpus has no documents");
  ModelState st;
  st.num_topics = num_topics;
  st.doc_ids = corpus.doc_ids();
  st.modality_names = corpus.modality_names();
  st.vocab_sizes = corpus.vocab_sizes();
  st.hyper.alpha.assign(num_topics, alpha_init / static_cast<double>(num_topics));
  st.hyper.beta.assign(corpus.num_modalities(), beta_init);
  st.hyper.validate();
  st.rng.seed(seed);

  const std::size_t D = corpus.size();
  st.tokens.resize(D);
  st.doc_length.resize(D);
  st.doc_topic = SparseCountTable(D, num_topics);
  for (auto v : st.vocab_sizes) st.word_topic.emplace_back(v, num_topics);
  st.topic_total.assign(st.num_modalities(), std::vector<std::int64_t>(num_topics, 0));

  for (std::size_t d = 0; d < D; ++d) {
    const auto& doc = corpus.document(d);
    auto& toks = st.tokens[d];
    toks.reserve(doc.total_tokens());
    for (std::size_t m = 0; m < doc.counts.size(); ++m) {
      for (const auto& wc : doc.counts[m]) {
        for (std::uint32_t c = 0; c < wc.count; ++c) {
          toks.push_back({static_cast<std::uint32_t>(m), wc.word, 0});
        }
      }
    }
    st.doc_length[d] = toks.size();
    for (std::size_t i = 0; i < toks.size(); ++i) {
      st.assign_token(d, i, static_cast<std::uint32_t>(uniform_below(st.rng, num_topics)));
    }
  }
  return st;
}

std::vector<double> topic_conditional(const ModelState& st, std::size_t d, std::size_t m,
                                      std::uint32_t w) {
  const std::size_t T = st.num_topics;
  const double beta = st.hyper.beta[m];
  const double vbeta = static_cast<double>(st.vocab_sizes[m]) * beta;
  std::vector<double> p(T);
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    p[t] = (st.doc_topic_count(d, t) + st.hyper.alpha[t]) * (st.topic_word_count(m, t, w) + beta) /
           (static_cast<double>(st.topic_total[m][t]) + vbeta);
    total += p[t];
  }
  for (auto& v : p) v /= total;
  return p;
}

SparseSampler::SparseSampler(ModelState& state) : st_(state) { refresh(); }

void SparseSampler::refresh() {
  const std::size_t T = st_.num_topics;
  coef_.assign(st_.num_modalities(), std::vector<double>(T));
  smoothing_.assign(st_.num_modalities(), 0.0);
  for (std::size_t m = 0; m < st_.num_modalities(); ++m) {
    const double beta = st_.hyper.beta[m];
    const double vbeta = static_cast<double>(st_.vocab_sizes[m]) * beta;
    for (std::size_t t = 0; t < T; ++t) {
      coef_[m][t] = 1.0 / (static_cast<double>(st_.topic_total[m][t]) + vbeta);
      smoothing_[m] += st_.hyper.alpha[t] * beta * coef_[m][t];
    }
  }
  if (doc_ < st_.num_docs() && mod_ < st_.num_modalities()) set_context(doc_, mod_);
}

void SparseSampler::set_context(std::size_t d, std::size_t m) {
  doc_ = d;
  mod_ = m;
  const double beta = st_.hyper.beta[m];
  document_ = 0.0;
  for (auto t : st_.doc_topic.nonzero(d)) document_ += st_.doc_topic.get(d, t) * beta * coef_[m][t];
}

void SparseSampler::update_topic(std::size_t m, std::uint32_t t, double before_coef) {
  const double beta = st_.hyper.beta[m];
  const double after =
      1.0 / (static_cast<double>(st_.topic_total[m][t]) + static_cast<double>(st_.vocab_sizes[m]) * beta);
  coef_[m][t] = after;
  smoothing_[m] += st_.hyper.alpha[t] * beta * (after - before_coef);
}

void SparseSampler::remove(std::size_t i) {
  const Token tok = st_.tokens[doc_][i];
  const double beta = st_.hyper.beta[mod_];
  const double before = coef_[mod_][tok.topic];
  const double n_before = st_.doc_topic.get(doc_, tok.topic);
  st_.remove_token(doc_, i);
  update_topic(mod_, tok.topic, before);
  document_ += beta * ((n_before - 1.0) * coef_[mod_][tok.topic] - n_before * before);
}

void SparseSampler::add(std::size_t i, std::uint32_t topic) {
  const double beta = st_.hyper.beta[mod_];
  const double before = coef_[mod_][topic];
  const double n_before = st_.doc_topic.get(doc_, topic);
  st_.assign_token(doc_, i, topic);
  update_topic(mod_, topic, before);
  document_ += beta * ((n_before + 1.0) * coef_[mod_][topic] - n_before * before);
}

BucketMasses SparseSampler::masses(std::uint32_t w) const {
  const std::size_t T = st_.num_topics;
  const double beta = st_.hyper.beta[mod_];
  const auto& coef = coef_[mod_];
  BucketMasses out;
  out.smoothing = smoothing_[mod_];
  out.document = document_;
  out.per_topic.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double alpha = st_.hyper.alpha[t];
    const double ndt = st_.doc_topic.get(doc_, t);
    const double ntw = st_.word_topic[mod_].get(w, t);
    const double q = (alpha + ndt) * ntw * coef[t];
    out.word += q;
    out.per_topic[t] = alpha * beta * coef[t] + ndt * beta * coef[t] + q;
  }
  return out;
}

std::uint32_t SparseSampler::draw(std::uint32_t w, double u) const {
  const auto& coef = coef_[mod_];
  const auto& alpha = st_.hyper.alpha;
  const double beta = st_.hyper.beta[mod_];
  const auto& wt = st_.word_topic[mod_];
  const auto word_topics = wt.nonzero(w);

  scratch_.resize(word_topics.size());
  double word = 0.0;
  for (std::size_t k = 0; k < word_topics.size(); ++k) {
    const auto t = word_topics[k];
    scratch_[k] = (alpha[t] + st_.doc_topic.get(doc_, t)) * wt.get(w, t) * coef[t];
    word += scratch_[k];
  }
  double x = u * (smoothing_[mod_] + document_ + word);
  if (x < word) {
    for (std::size_t k = 0; k < word_topics.size(); ++k) {
      x -= scratch_[k];
      if (x < 0.0) return word_topics[k];
    }
    return word_topics.back();
  }
  x -= word;
  const auto doc_topics = st_.doc_topic.nonzero(doc_);
  if (x < document_ && !doc_topics.empty()) {
    for (auto t : doc_topics) {
      x -= st_.doc_topic.get(doc_, t) * beta * coef[t];
      if (x < 0.0) return t;
    }
    return doc_topics.back();
  }
  x -= document_;
  const std::size_t T = st_.num_topics;
  for (std::size_t t = 0; t < T; ++t) {
    x -= alpha[t] * beta * coef[t];
    if (x < 0.0) return static_cast<std::uint32_t>(t);
  }
  return static_cast<std::uint32_t>(T - 1);
}

void SparseSampler::sweep(const TokenObserver& observer) {
  for (std::size_t d = 0; d < st_.num_docs(); ++d) {
    const auto& toks = st_.tokens[d];
    std::size_t current = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < toks.size(); ++i) {
      const std::uint32_t m = toks[i].modality;
      if (m != current) {
        set_context(d, m);
        current = m;
      }
      const std::uint32_t w = toks[i].word;
      remove(i);
      if (observer) observer(st_, d, i, masses(w));
      add(i, draw(w, uniform01(st_.rng)));
    }
  }
}

void gibbs_sweep(ModelState& state) {
  SparseSampler sampler(state);
  sampler.sweep();
}

void gibbs_sweep_dense(ModelState& state) {
  const std::size_t T = state.num_topics;
  std::vector<double> weights(T);
  for (std::size_t d = 0; d < state.num_docs(); ++d) {
    for (std::size_t i = 0; i < state.tokens[d].size(); ++i) {
      const Token tok = state.tokens[d][i];
      state.remove_token(d, i);
      const double beta = state.hyper.beta[tok.modality];
      const double vbeta = static_cast<double>(state.vocab_sizes[tok.modality]) * beta;
      double total = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        weights[t] = (state.doc_topic_count(d, t) + state.hyper.alpha[t]) *
                     (state.topic_word_count(tok.modality, t, tok.word) + beta) /
                     (static_cast<double>(state.topic_total[tok.modality][t]) + vbeta);
        total += weights[t];
      }
      double x = uniform01(state.rng) * total;
      std::uint32_t pick = static_cast<std::uint32_t>(T - 1);
      for (std::size_t t = 0; t < T; ++t) {
        x -= weights[t];
        if (x < 0.0) {
          pick = static_cast<std::uint32_t>(t);
          break;
        }
      }
      state.assign_token(d, i, pick);
    }
  }
}

double log_evidence(const ModelState& st) {
  const std::size_t T = st.num_topics;
  const double alpha_sum = st.hyper.alpha_sum();
  const double lg_alpha_sum = log_gamma(alpha_sum);
  std::vector<double> lg_alpha(T);
  for (std::size_t t = 0; t < T; ++t) lg_alpha[t] = log_gamma(st.hyper.alpha[t]);

  double total = 0.0;
  for (std::size_t d = 0; d < st.num_docs(); ++d) {
    if (st.doc_length[d] == 0) continue;
    double doc = lg_alpha_sum - log_gamma(static_cast<double>(st.doc_length[d]) + alpha_sum);
    for (auto t : st.doc_topic.nonzero(d)) {
      doc += log_gamma(st.doc_topic.get(d, t) + st.hyper.alpha[t]) - lg_alpha[t];
    }
    total += doc;
  }
  for (std::size_t m = 0; m < st.num_modalities(); ++m) {
    const double beta = st.hyper.beta[m];
    const double vbeta = static_cast<double>(st.vocab_sizes[m]) * beta;
    const double lg_beta = log_gamma(beta);
    const double lg_vbeta = log_gamma(vbeta);
    for (std::size_t t = 0; t < T; ++t) {
      if (st.topic_total[m][t] == 0) continue;
      total += lg_vbeta - log_gamma(static_cast<double>(st.topic_total[m][t]) + vbeta);
    }
    const auto& wt = st.word_topic[m];
    for (std::size_t w = 0; w < wt.rows(); ++w) {
      for (auto t : wt.nonzero(w)) total += log_gamma(wt.get(w, t) + beta) - lg_beta;
    }
  }
  return total;
}

std::vector<double> update_alpha(const ModelState& st) {
  const std::size_t T = st.num_topics;
  const auto& alpha = st.hyper.alpha;
  const double alpha_sum = st.hyper.alpha_sum();
  const double dg_sum = digamma(alpha_sum);

  double denominator = 0.0;
  for (std::size_t d = 0; d < st.num_docs(); ++d) {
    if (st.doc_length[d] > 0) denominator += digamma(static_cast<double>(st.doc_length[d]) + alpha_sum) - dg_sum;
  }
  if (!(denominator > 0.0)) return alpha;

  std::vector<double> dg_alpha(T), numerator(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) dg_alpha[t] = digamma(alpha[t]);
  for (std::size_t d = 0; d < st.num_docs(); ++d) {
    for (auto t : st.doc_topic.nonzero(d)) numerator[t] += digamma(st.doc_topic.get(d, t) + alpha[t]) - dg_alpha[t];
  }
  std::vector<double> next(T);
  for (std::size_t t = 0; t < T; ++t) next[t] = std::max(alpha[t] * numerator[t] / denominator, 1e-10);
  return next;
}

double update_beta(const ModelState& st, std::size_t m) {
  const double beta = st.hyper.beta[m];
  const double v = static_cast<double>(st.vocab_sizes[m]);
  const double vbeta = v * beta;
  const double dg_vbeta = digamma(vbeta);

  double denominator = 0.0;
  for (std::size_t t = 0; t < st.num_topics; ++t) {
    if (st.topic_total[m][t] > 0) denominator += digamma(static_cast<double>(st.topic_total[m][t]) + vbeta) - dg_vbeta;
  }
  if (!(denominator > 0.0)) return beta;

  const double dg_beta = digamma(beta);
  double numerator = 0.0;
  const auto& wt = st.word_topic[m];
  for (std::size_t w = 0; w < wt.rows(); ++w) {
    for (auto t : wt.nonzero(w)) numerator += digamma(wt.get(w, t) + beta) - dg_beta;
  }
  return std::max(beta * numerator / (v * denominator), 1e-10);
}

TrainedModel point_estimates(const ModelState& st) {
  const std::size_t T = st.num_topics;
  TrainedModel model;
  model.doc_ids = st.doc_ids;
  model.modality_names = st.modality_names;
  model.hyper = st.hyper;
  model.selected_iteration = st.iteration;

  const double alpha_sum = st.hyper.alpha_sum();
  model.theta = Matrix<double>(st.num_docs(), T);
  for (std::size_t d = 0; d < st.num_docs(); ++d) {
    const double denom = static_cast<double>(st.doc_length[d]) + alpha_sum;
    for (std::size_t t = 0; t < T; ++t) model.theta(d, t) = (st.doc_topic_count(d, t) + st.hyper.alpha[t]) / denom;
  }
  for (std::size_t m = 0; m < st.num_modalities(); ++m) {
    const std::size_t V = st.vocab_sizes[m];
    const double beta = st.hyper.beta[m];
    const double vbeta = static_cast<double>(V) * beta;
    Matrix<double> phi(T, V);
    Matrix<std::int64_t> counts(T, V);
    for (std::size_t t = 0; t < T; ++t) {
      const double denom = static_cast<double>(st.topic_total[m][t]) + vbeta;
      for (std::size_t w = 0; w < V; ++w) {
        counts(t, w) = st.topic_word_count(m, t, w);
        phi(t, w) = (static_cast<double>(counts(t, w)) + beta) / denom;
      }
    }
    model.phi.push_back(std::move(phi));
    model.topic_word.push_back(std::move(counts));
  }
  return model;
}

TrainedModel train(const Corpus& corpus, const TrainConfig& config, std::vector<EvidencePoint>* trace) {
  config.validate();
  ModelState st = init_state(corpus, config.topics, config.seed, config.alpha_init, config.beta_init);
  SparseSampler sampler(st);

  const std::size_t window_start = config.iterations - config.evidence_window;
  TrainedModel best;
  double best_evidence = -std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    sampler.sweep();
    st.iteration = it;
    const std::size_t done = it + 1;
    if (config.hyper_update_every > 0 && done > config.burn_in &&
        (done - config.burn_in) % config.hyper_update_every == 0) {
      st.hyper.alpha = update_alpha(st);
      for (std::size_t m = 0; m < st.num_modalities(); ++m) st.hyper.beta[m] = update_beta(st, m);
      sampler.refresh();
    }
    const bool in_window = it >= window_start;
    if (!in_window && !config.trace_evidence) continue;
    const double ev = log_evidence(st);
    if (!std::isfinite(ev)) throw Error("non-finite model evidence at iteration " + std::to_string(it));
    if (trace) trace->push_back({it, ev});
    if (in_window && (!have_best || ev > best_evidence)) {
      best_evidence = ev;
      best = point_estimates(st);
      best.evidence = ev;
      best.selected_iteration = it;
      have_best = true;
    }
  }
  best.seed = config.seed;
  return best;
}

namespace {

std::vector<std::string> index_names(std::size_t n, const std::string& prefix) {
  std::vector<std::string> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = prefix + std::to_string(i);
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + text::format_double(v[i]);
  return out;
}

void check_rows_stochastic(const Matrix<double>& m, const std::string& what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(what + ": invalid probability in row " + std::to_string(r));
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ValidationError(what + ": row " + std::to_string(r) + " does not sum to 1");
  }
}

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t T = model.num_topics();
  const auto topic_keys = index_names(T, "");
  text::write_keyed_csv(dir / "theta.csv", "doc_id", index_names(T, "t"), model.doc_ids, model.theta);

  text::KeyValues hyper{{"alpha", join_doubles(model.hyper.alpha)}};
  std::string vocab_sizes;
  for (std::size_t m = 0; m < model.num_modalities(); ++m) {
    const auto& name = model.modality_names[m];
    text::write_keyed_csv(dir / ("phi_" + name + ".csv"), "topic", index_names(model.vocab_size(m), ""),
                          topic_keys, model.phi[m]);
    const auto& counts = model.topic_word[m];
    std::string sparse;
    std::size_t nnz = 0;
    for (std::size_t t = 0; t < counts.rows(); ++t) {
      for (std::size_t w = 0; w < counts.cols(); ++w) {
        if (counts(t, w) == 0) continue;
        sparse += std::to_string(t) + " " + std::to_string(w) + " " + std::to_string(counts(t, w)) + "\n";
        ++nnz;
      }
    }
    text::write_text(dir / ("topic_word_" + name + ".txt"),
                     std::to_string(T) + " " + std::to_string(counts.cols()) + " " + std::to_string(nnz) + "\n" + sparse);
    hyper["beta." + name] = text::format_double(model.hyper.beta[m]);
    vocab_sizes += (m ? "," : "") + std::to_string(model.vocab_size(m));
  }
  text::write_key_values(dir / "hyper.txt", hyper);

  std::string modalities;
  for (std::size_t m = 0; m < model.num_modalities(); ++m) modalities += (m ? "," : "") + model.modality_names[m];
  text::write_key_values(dir / "manifest.txt", {{"topics", std::to_string(T)},
                                                {"modalities", modalities},
                                                {"vocab_sizes", vocab_sizes},
                                                {"documents", std::to_string(model.doc_ids.size())},
                                                {"seed", std::to_string(model.seed)},
                                                {"selected_iteration", std::to_string(model.selected_iteration)},
                                                {"evidence", text::format_double(model.evidence)}});
}

TrainedModel load_model(const std::filesystem::path& dir) {
  const auto manifest = text::read_key_values(dir / "manifest.txt");
  const auto get = [&](const text::KeyValues& kv, const std::string& key, const std::string& file) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError((dir / file).string() + ": missing key '" + key + "'");
    return it->second;
  };
  const std::string msrc = (dir / "manifest.txt").string();
  TrainedModel model;
  const std::size_t T = text::parse_uint(get(manifest, "topics", "manifest.txt"), msrc, 0);
  model.seed = text::parse_uint(get(manifest, "seed", "manifest.txt"), msrc, 0);
  model.selected_iteration = text::parse_uint(get(manifest, "selected_iteration", "manifest.txt"), msrc, 0);
  model.evidence = text::parse_double(get(manifest, "evidence", "manifest.txt"), msrc, 0);
  const std::string modalities = get(manifest, "modalities", "manifest.txt");
  for (auto n : text::split(modalities, ',')) model.modality_names.emplace_back(n);

  auto theta = text::read_keyed_csv(dir / "theta.csv");
  if (theta.values.cols() != T) throw ValidationError("theta.csv: expected " + std::to_string(T) + " topic columns");
  check_rows_stochastic(theta.values, "theta.csv");
  model.doc_ids = std::move(theta.keys);
  model.theta = std::move(theta.values);

  const auto hyper = text::read_key_values(dir / "hyper.txt");
  const std::string hsrc = (dir / "hyper.txt").string();
  const std::string alpha = get(hyper, "alpha", "hyper.txt");
  for (auto a : text::split(alpha, ',')) model.hyper.alpha.push_back(text::parse_double(a, hsrc, 0));
  if (model.hyper.alpha.size() != T) throw ValidationError("hyper.txt: alpha length differs from topics");

  for (const auto& name : model.modality_names) {
    model.hyper.beta.push_back(text::parse_double(get(hyper, "beta." + name, "hyper.txt"), hsrc, 0));
    auto phi = text::read_keyed_csv(dir / ("phi_" + name + ".csv"));
    if (phi.values.rows() != T) throw ValidationError("phi_" + name + ".csv: expected " + std::to_string(T) + " rows");
    check_rows_stochastic(phi.values, "phi_" + name + ".csv");
    const std::size_t V = phi.values.cols();
    model.phi.push_back(std::move(phi.values));

    const auto path = dir / ("topic_word_" + name + ".txt");
    const auto lines = text::read_lines(path);
    Matrix<std::int64_t> counts(T, V);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto f = text::split_ws(lines[i]);
      if (f.empty()) continue;
      if (f.size() != 3) throw ParseError(path.string(), i + 1, "expected 'topic word count'");
      const auto t = text::parse_uint(f[0], path.string(), i + 1);
      const auto w = text::parse_uint(f[1], path.string(), i + 1);
      if (t >= T || w >= V) throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": index out of range");
      counts(t, w) = text::parse_int(f[2], path.string(), i + 1);
    }
    model.topic_word.push_back(std::move(counts));
  }
  model.hyper.validate();
  return model;
}

}  // namespace mmlda
