#ifndef MMLDA_AUDIO_WORDS_HPP_
#define MMLDA_AUDIO_WORDS_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmlda/common.hpp"
#include "mmlda/corpus.hpp"

namespace mmlda {

// Vector-quantization codebook; row k of `centroids` is audio word k.
struct Codebook {
  Matrix<double> centroids;
  double distortion = 0.0;  // mean squared distance to nearest centroid on the fit set
  std::uint64_t seed = 0;

  std::size_t size() const { return centroids.rows(); }
  std::size_t dim() const { return centroids.cols(); }
};

struct CodebookOptions {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double tol = 1e-6;  // stop when relative distortion improvement < tol
};

struct CodebookFitTrace {
  std::vector<double> distortion;  // after each assignment step
  std::size_t iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations. Points are matrix rows.
Codebook fit_codebook(const Matrix<double>& points, const CodebookOptions& options,
                      CodebookFitTrace* trace = nullptr);

// Index of the nearest centroid; ties go to the lowest id.
std::uint32_t nearest_centroid(const Codebook& codebook, std::span<const double> vector);

// Count bag over word ids for one track's frames. `offset` shifts the ids
// when several codebooks share one vocabulary.
Bag quantize(const Codebook& codebook, const Matrix<double>& frames, std::uint32_t offset = 0);

// Several feature families quantized into one vocabulary with offset id ranges.
class CodebookSet {
 public:
  explicit CodebookSet(std::vector<Codebook> codebooks);
  std::size_t vocabulary_size() const { return total_; }
  std::uint32_t offset(std::size_t family) const { return offsets_.at(family); }
  const std::vector<Codebook>& codebooks() const { return codebooks_; }
  // frames[f] holds the track's frames for family f.
  Bag quantize(std::span<const Matrix<double>> frames) const;

 private:
  std::vector<Codebook> codebooks_;
  std::vector<std::uint32_t> offsets_;
  std::size_t total_ = 0;
};

// Codebook CSV: header "K d seed", then K lines of d comma-separated values.
void save_codebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

// Feature CSV with "track_id, v1, ..., vd" per line. Tracks keep first-seen order.
struct TrackFeatures {
  std::vector<std::string> track_ids;
  std::vector<Matrix<double>> frames;
};
TrackFeatures load_track_features(const std::filesystem::path& path);
Matrix<double> stack_frames(const TrackFeatures& features);

}  // namespace mmlda

#endif  // MMLDA_AUDIO_WORDS_HPP_
