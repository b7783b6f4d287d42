#ifndef MMLDA_INFERENCE_HPP_
#define MMLDA_INFERENCE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmlda/common.hpp"
#include "mmlda/corpus.hpp"
#include "mmlda/sampler.hpp"

namespace mmlda {

enum class FoldInMode {
  frozen_phi,     // sample against the trained phi point estimate
  frozen_counts,  // trained counts plus the document's own assignments
};

struct FoldInOptions {
  std::size_t sweeps = 200;
  std::uint64_t seed = 0;
  FoldInMode mode = FoldInMode::frozen_phi;
};

struct FoldInResult {
  std::vector<std::string> doc_ids;
  Matrix<double> thetas;  // H x T
  std::size_t sweeps_used = 0;
};

// Seed used for one document; independent of batch composition and order.
std::uint64_t document_seed(std::uint64_t seed, const std::string& doc_id);

// Topic proportions of one held-out document: Gibbs over its own tokens with
// the trained topic-word statistics frozen, then the Dirichlet expectation
// of the final state.
std::vector<double> fold_in_document(const TrainedModel& model, const Document& doc,
                                     const FoldInOptions& options);

// Held-out documents must already be augmented and use the model's modalities.
FoldInResult fold_in(const TrainedModel& model, const Corpus& heldout, const FoldInOptions& options);

// theta_heldout.csv: "doc_id,t0,...".
void save_fold_in(const FoldInResult& result, const std::filesystem::path& path);
FoldInResult load_fold_in(const std::filesystem::path& path);

}  // namespace mmlda

#endif  // MMLDA_INFERENCE_HPP_
