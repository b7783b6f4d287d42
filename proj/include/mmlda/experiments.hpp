#ifndef MMLDA_EXPERIMENTS_HPP_
#define MMLDA_EXPERIMENTS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mmlda/corpus.hpp"
#include "mmlda/mantel.hpp"
#include "mmlda/sampler.hpp"
#include "mmlda/similarity.hpp"

namespace mmlda {

// ---------------------------------------------------------------------------
// Synthetic corpora drawn from the multi-modal generative process. Documents
// are grouped into labels; each label has its own base topic mixture, and a
// document's proportions scatter around its label's mixture.

struct SyntheticModality {
  std::string name;
  std::size_t vocab_size = 100;
  std::size_t tokens_per_doc = 50;
  // Draw this modality from per-document proportions independent of the
  // shared ones (a null-hypothesis modality).
  bool independent = false;
};

struct SyntheticSpec {
  std::string name = "synthetic";
  std::size_t num_labels = 15;
  std::size_t docs_per_label = 20;
  std::size_t true_topics = 5;
  std::vector<SyntheticModality> modalities;
  double label_concentration = 0.5;   // symmetric Dirichlet for label mixtures
  double doc_concentration = 20.0;    // scale around the label mixture
  double word_concentration = 0.05;   // symmetric Dirichlet for topic-word rows
};

struct SyntheticTruth {
  Matrix<double> theta;              // shared D x T_true
  Matrix<double> theta_independent;  // used by independent modalities
  std::vector<Matrix<double>> phi;   // per modality, T_true x V
};

Corpus make_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed, SyntheticTruth* truth = nullptr);

// Symmetric-Dirichlet draw computed in log space, safe for tiny concentrations.
std::vector<double> sample_dirichlet(std::span<const double> concentration, Rng& rng);

// ---------------------------------------------------------------------------
// Cross-validated stability and cross-group protocol.

struct ModalityGroup {
  std::string name;
  std::vector<std::string> modalities;
};

struct ExperimentPlan {
  std::vector<ModalityGroup> groups;
  std::vector<std::size_t> topic_counts{8, 32, 128};
  std::size_t seeds = 5;
  std::size_t folds = 10;
  std::size_t folds_to_run = 0;  // 0 runs every fold
  std::size_t permutations = 100;
  TrainConfig train;             // topics and seed are set per model
  std::size_t foldin_sweeps = 200;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;  // empty: no files written
  bool verbose = false;

  const ModalityGroup& group(const std::string& name) const;
  void validate(const Corpus& corpus) const;
};

// Seed hierarchy: experiment -> split / model(fold, index) -> fold-in, and
// experiment -> mantel(T, fold, seed pair).
std::uint64_t split_seed(std::uint64_t experiment_seed);
std::uint64_t model_seed(std::uint64_t experiment_seed, std::size_t fold, std::size_t seed_index);
std::uint64_t foldin_seed(std::uint64_t model_seed);
std::uint64_t mantel_seed(std::uint64_t experiment_seed, std::size_t topics, std::size_t fold, std::size_t seed_a,
                          std::size_t seed_b);

struct CorrelationRow {
  std::size_t fold = 0;
  std::string label;  // group name, or "a~b" for cross-group rows
  std::size_t topics = 0;
  std::size_t seed_a = 0;
  std::size_t seed_b = 0;
  double rho = 0.0;
  std::optional<double> p_value;
};

struct Quantiles {
  std::size_t count = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Linear-interpolation quantiles; throws on empty input.
Quantiles quantiles(std::vector<double> values);

struct CorrelationSummary {
  std::string label;
  std::size_t topics = 0;
  Quantiles rho;
  std::optional<double> max_p_value;
};

struct CorrelationReport {
  std::vector<CorrelationRow> rows;
  std::vector<CorrelationSummary> summaries;
  std::vector<std::string> failed_cells;
};

class ExperimentRunner {
 public:
  ExperimentRunner(Corpus corpus, ExperimentPlan plan);

  const ExperimentPlan& plan() const { return plan_; }
  const std::vector<FoldSplit>& splits() const { return splits_; }
  std::size_t folds_to_run() const;

  // Trains one model of `group` with `topics` topics on fold `fold`, folds in
  // the held-out documents and returns their predictive similarity matrix.
  SimilarityMatrix similarity(const std::string& group, std::size_t topics, std::size_t fold,
                              std::uint64_t model_seed) const;

  // All plan.seeds matrices of one (group, T, fold) cell, cached.
  const std::vector<SimilarityMatrix>& cell(const std::string& group, std::size_t topics, std::size_t fold);

  CorrelationReport run_stability();
  CorrelationReport run_cross_group(const std::string& group_a, const std::string& group_b);

 private:
  Corpus corpus_;
  ExperimentPlan plan_;
  std::vector<FoldSplit> splits_;
  std::map<std::tuple<std::string, std::size_t, std::size_t>, std::vector<SimilarityMatrix>> cache_;
};

void write_report_csv(const CorrelationReport& report, const std::filesystem::path& path);
void write_report_summary_json(const CorrelationReport& report, const std::filesystem::path& path);

struct GroupSeparation {
  Quantiles within;
  Quantiles between;
  double median_difference = 0.0;  // within.median - between.median
};

// Within-label versus between-label off-diagonal similarities.
GroupSeparation summarize_group_separation(const SimilarityMatrix& similarity,
                                           const std::map<std::string, std::string>& labels);

}  // namespace mmlda

#endif  // MMLDA_EXPERIMENTS_HPP_
