#ifndef MMLDA_SAMPLER_HPP_
#define MMLDA_SAMPLER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmlda/common.hpp"
#include "mmlda/corpus.hpp"
#include "mmlda/random.hpp"
#include "mmlda/text_io.hpp"

namespace mmlda {

// Asymmetric document prior alpha (length T) and one symmetric topic-word
// prior per modality.
struct Hyperparams {
  std::vector<double> alpha;
  std::vector<double> beta;

  double alpha_sum() const;
  // Throws ValidationError unless every entry is finite and > 0.
  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

// Rows x topics count table that keeps, per row, the list of topics with a
// nonzero count so the sampler can iterate only those.
class SparseCountTable {
 public:
  SparseCountTable() = default;
  SparseCountTable(std::size_t rows, std::size_t topics);

  std::size_t rows() const { return nonzero_.size(); }
  std::size_t topics() const { return topics_; }
  std::int32_t get(std::size_t r, std::size_t t) const { return counts_[r * topics_ + t]; }
  std::span<const std::uint32_t> nonzero(std::size_t r) const { return nonzero_[r]; }

  void increment(std::size_t r, std::uint32_t t);
  // Throws Error if the count would become negative.
  void decrement(std::size_t r, std::uint32_t t);

 private:
  std::size_t topics_ = 0;
  std::vector<std::int32_t> counts_;
  std::vector<std::int32_t> slot_;  // position in nonzero_[r], -1 when zero
  std::vector<std::vector<std::uint32_t>> nonzero_;
};

struct Token {
  std::uint32_t modality = 0;
  std::uint32_t word = 0;
  std::uint32_t topic = 0;
};

// Collapsed Gibbs state. Tokens of each document are stored modality-major,
// expanded from counts. Doc-topic counts are shared across modalities.
struct ModelState {
  std::size_t num_topics = 0;
  std::vector<std::string> doc_ids;
  std::vector<std::string> modality_names;
  std::vector<std::size_t> vocab_sizes;

  std::vector<std::vector<Token>> tokens;
  std::vector<std::uint64_t> doc_length;
  SparseCountTable doc_topic;                         // D x T
  std::vector<SparseCountTable> word_topic;           // per modality, V x T
  std::vector<std::vector<std::int64_t>> topic_total;  // per modality, T

  Hyperparams hyper;
  Rng rng;
  std::size_t iteration = 0;

  std::size_t num_docs() const { return tokens.size(); }
  std::size_t num_modalities() const { return vocab_sizes.size(); }

  std::int32_t doc_topic_count(std::size_t d, std::size_t t) const { return doc_topic.get(d, t); }
  std::int32_t topic_word_count(std::size_t m, std::size_t t, std::size_t w) const {
    return word_topic[m].get(w, t);
  }

  // Removes token i of document d from every count table.
  void remove_token(std::size_t d, std::size_t i);
  // Assigns token i of document d (currently removed) to topic t.
  void assign_token(std::size_t d, std::size_t i, std::uint32_t t);

  // Recomputes every table from the assignments; throws Error on mismatch.
  void check_consistency() const;
};

struct TrainedModel {
  std::vector<std::string> doc_ids;
  std::vector<std::string> modality_names;
  Matrix<double> theta;                           // D x T
  std::vector<Matrix<double>> phi;                // per modality, T x V
  std::vector<Matrix<std::int64_t>> topic_word;   // frozen counts, T x V
  Hyperparams hyper;
  double evidence = 0.0;
  std::size_t selected_iteration = 0;
  std::uint64_t seed = 0;

  std::size_t num_topics() const { return theta.cols(); }
  std::size_t num_modalities() const { return phi.size(); }
  std::size_t vocab_size(std::size_t m) const { return phi[m].cols(); }
};

struct TrainConfig {
  std::size_t topics = 0;
  std::size_t iterations = 4000;
  std::size_t evidence_window = 50;
  std::size_t burn_in = 200;
  std::size_t hyper_update_every = 10;  // 0 keeps hyperparameters fixed
  double alpha_init = 1.0;              // total prior mass, alpha_t = alpha_init / T
  double beta_init = 0.01;
  std::uint64_t seed = 0;
  bool trace_evidence = false;  // evaluate evidence every iteration, not only in the window

  void validate() const;
};

TrainConfig train_config_from(const text::KeyValues& kv, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path);

ModelState init_state(const Corpus& corpus, std::size_t num_topics, std::uint64_t seed,
                      double alpha_init = 1.0, double beta_init = 0.01);

// Normalized full conditional of a removed token of word w in modality m of
// document d:  p(t) ~ (n_dt + alpha_t)(n_tw + beta) / (n_t + V beta).
std::vector<double> topic_conditional(const ModelState& state, std::size_t d, std::size_t m,
                                      std::uint32_t w);

// Smoothing / document / word bucket decomposition of the conditional.
struct BucketMasses {
  double smoothing = 0.0;
  double document = 0.0;
  double word = 0.0;
  std::vector<double> per_topic;  // unnormalized, sums to total()

  double total() const { return smoothing + document + word; }
};

using TokenObserver =
    std::function<void(const ModelState& state, std::size_t d, std::size_t i, const BucketMasses&)>;

// Sparse three-bucket sampler over a ModelState. Bucket totals are cached and
// updated incrementally; call refresh() after changing hyperparameters.
class SparseSampler {
 public:
  explicit SparseSampler(ModelState& state);

  void refresh();

  // Resamples every token once. The observer, if set, sees each token after
  // removal together with the cached bucket masses.
  void sweep(const TokenObserver& observer = {});

  // Selects document d and modality m; loads the document bucket.
  void set_context(std::size_t d, std::size_t m);
  BucketMasses masses(std::uint32_t w) const;
  // Topic for uniform variate u in [0, 1) under the current context.
  std::uint32_t draw(std::uint32_t w, double u) const;

  // Token-level updates for the context document; token i must belong to the
  // context modality.
  void remove(std::size_t i);
  void add(std::size_t i, std::uint32_t topic);

 private:
  void update_topic(std::size_t m, std::uint32_t t, double before_coef);

  ModelState& st_;
  std::vector<std::vector<double>> coef_;  // per modality, 1 / (n_t + V beta)
  std::vector<double> smoothing_;          // per modality
  std::size_t doc_ = 0;
  std::size_t mod_ = 0;
  double document_ = 0.0;
  mutable std::vector<double> scratch_;
};

void gibbs_sweep(ModelState& state);
// Reference implementation that evaluates the dense conditional per token.
void gibbs_sweep_dense(ModelState& state);

// log p(w, z | alpha, beta) of the collapsed model.
double log_evidence(const ModelState& state);

// One fixed-point step; inputs are not modified.
std::vector<double> update_alpha(const ModelState& state);
double update_beta(const ModelState& state, std::size_t m);

TrainedModel point_estimates(const ModelState& state);

struct EvidencePoint {
  std::size_t iteration = 0;
  double evidence = 0.0;
};

TrainedModel train(const Corpus& corpus, const TrainConfig& config,
                   std::vector<EvidencePoint>* trace = nullptr);

// Directory with theta.csv, phi_<modality>.csv, topic_word_<modality>.txt,
// hyper.txt and manifest.txt.
void save_model(const TrainedModel& model, const std::filesystem::path& dir);
TrainedModel load_model(const std::filesystem::path& dir);

}  // namespace mmlda

#endif  // MMLDA_SAMPLER_HPP_
