#ifndef MMLDA_SIMILARITY_HPP_
#define MMLDA_SIMILARITY_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmlda/common.hpp"
#include "mmlda/corpus.hpp"
#include "mmlda/inference.hpp"
#include "mmlda/sampler.hpp"

namespace mmlda {

enum class Measure { predictive, kl, cosine, inner };

std::string_view to_string(Measure measure);
Measure parse_measure(std::string_view name);

// values(A, B) compares row document A with column document B. The diagonal
// is stored but excluded from Mantel statistics.
struct SimilarityMatrix {
  std::vector<std::string> doc_ids;
  Matrix<double> values;
  Measure measure = Measure::predictive;
  bool diagonal_excluded = true;

  std::size_t size() const { return doc_ids.size(); }
};

// Mean per-word log-likelihood (natural log) of the words of A under topic
// proportions theta_b and the per-modality topic-word distributions phi.
double predictive_similarity(std::span<const Bag> words_a, std::span<const double> theta_b,
                             std::span<const Matrix<double>> phi);

// KL(theta_a || theta_b), cosine, or inner product. Not defined for predictive.
double alt_similarity(std::span<const double> theta_a, std::span<const double> theta_b, Measure kind);

// Matrix over the held-out documents; thetas must cover every document.
SimilarityMatrix similarity_matrix(const Corpus& heldout, const FoldInResult& thetas, const TrainedModel& model,
                                   Measure measure);

// similarity.csv with a "<path>.meta" sidecar holding measure and fold.
void save_similarity(const SimilarityMatrix& matrix, const std::filesystem::path& path, const std::string& fold = "");
SimilarityMatrix load_similarity(const std::filesystem::path& path);

}  // namespace mmlda

#endif  // MMLDA_SIMILARITY_HPP_
