#include "mmlda/audio_words.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mmlda/random.hpp"
#include "mmlda/text_io.hpp"

namespace mmlda {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t count_distinct_rows(const Matrix<double>& points) {
  std::vector<std::span<const double>> rows;
  for (std::size_t i = 0; i < points.rows(); ++i) rows.push_back(points.row(i));
  const auto less = [](std::span<const double> a, std::span<const double> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  };
  std::sort(rows.begin(), rows.end(), less);
  const auto eq = [](std::span<const double> a, std::span<const double> b) {
    return std::equal(a.begin(), a.end(), b.begin());
  };
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end(), eq) - rows.begin());
}

// Assigns every point; returns the total squared distance.
double assign(const Matrix<double>& points, const Matrix<double>& centroids,
              std::vector<std::uint32_t>& labels, std::vector<double>& dist) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::size_t k = 0; k < centroids.rows(); ++k) {
      const double d = squared_distance(points.row(i), centroids.row(k));
      if (d < best) best = d, arg = static_cast<std::uint32_t>(k);
    }
    labels[i] = arg;
    dist[i] = best;
    total += best;
  }
  return total;
}

Matrix<double> seed_plus_plus(const Matrix<double>& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows(), d = points.cols();
  Matrix<double> centroids(k, d);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = uniform_below(rng, n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(points.row(pick).begin(), d, centroids.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), centroids.row(c)));
      total += nearest[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      // Remaining mass is zero only when points repeat; take the first point
      // not yet matched exactly (exists because K <= distinct points).
      pick = static_cast<std::size_t>(std::find_if(nearest.begin(), nearest.end(),
                                                   [](double v) { return v > 0.0; }) -
                                      nearest.begin());
      continue;
    }
    double u = uniform01(rng) * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      if (u < nearest[i]) {
        pick = i;
        break;
      }
      u -= nearest[i];
    }
    while (nearest[pick] <= 0.0) --pick;  // rounding at the tail
  }
  return centroids;
}

}  // namespace

Codebook fit_codebook(const Matrix<double>& points, const CodebookOptions& options,
                      CodebookFitTrace* trace) {
  const std::size_t n = points.rows(), d = points.cols(), k = options.k;
  if (n == 0) throw ValidationError("fit_codebook: empty point set");
  if (k == 0) throw ValidationError("fit_codebook: K must be >= 1");
  if (!(options.tol >= 0.0)) throw ValidationError("fit_codebook: tol must be >= 0");
  for (double v : points.data()) {
    if (!std::isfinite(v)) throw ValidationError("fit_codebook: non-finite feature value");
  }
  const std::size_t distinct = count_distinct_rows(points);
  if (k > distinct) {
    throw ValidationError("fit_codebook: K=" + std::to_string(k) + " exceeds " +
                          std::to_string(distinct) + " distinct points");
  }

  Rng rng(options.seed);
  Codebook book;
  book.seed = options.seed;
  book.centroids = seed_plus_plus(points, k, rng);

  std::vector<std::uint32_t> labels(n);
  std::vector<double> dist(n);
  double current = assign(points, book.centroids, labels, dist);
  if (trace) trace->distortion.push_back(current / static_cast<double>(n));

  std::size_t iter = 0;
  std::vector<double> sums(k * d);
  std::vector<std::size_t> sizes(k);
  while (iter < options.max_iters) {
    ++iter;
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = points.row(i);
      double* acc = sums.data() + labels[i] * d;
      for (std::size_t j = 0; j < d; ++j) acc[j] += row[j];
      ++sizes[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) book.centroids(c, j) = sums[c * d + j] / static_cast<double>(sizes[c]);
    }
    // Empty clusters move to the point farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = 0;
      double worst = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dd = squared_distance(points.row(i), book.centroids.row(labels[i]));
        if (dd > worst) worst = dd, far = i;
      }
      std::copy_n(points.row(far).begin(), d, book.centroids.row(c).begin());
      labels[far] = static_cast<std::uint32_t>(c);
      sizes[c] = 1;
    }
    const double next = assign(points, book.centroids, labels, dist);
    if (trace) trace->distortion.push_back(next / static_cast<double>(n));
    const double improvement = current > 0.0 ? (current - next) / current : 0.0;
    current = next;
    if (improvement < options.tol) break;
  }
  if (trace) trace->iterations = iter;
  book.distortion = current / static_cast<double>(n);
  return book;
}

std::uint32_t nearest_centroid(const Codebook& codebook, std::span<const double> vector) {
  if (vector.size() != codebook.dim()) {
    throw ValidationError("quantize: feature dimension " + std::to_string(vector.size()) +
                          " does not match codebook dimension " + std::to_string(codebook.dim()));
  }
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t arg = 0;
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    const double d = squared_distance(vector, codebook.centroids.row(k));
    if (d < best) best = d, arg = static_cast<std::uint32_t>(k);
  }
  return arg;
}

Bag quantize(const Codebook& codebook, const Matrix<double>& frames, std::uint32_t offset) {
  if (frames.rows() > 0 && frames.cols() != codebook.dim()) {
    throw ValidationError("quantize: feature dimension " + std::to_string(frames.cols()) +
                          " does not match codebook dimension " + std::to_string(codebook.dim()));
  }
  std::map<std::uint32_t, std::uint32_t> counts;
  for (std::size_t i = 0; i < frames.rows(); ++i) ++counts[offset + nearest_centroid(codebook, frames.row(i))];
  Bag bag;
  for (const auto& [w, c] : counts) bag.push_back({w, c});
  return bag;
}

CodebookSet::CodebookSet(std::vector<Codebook> codebooks) : codebooks_(std::move(codebooks)) {
  if (codebooks_.empty()) throw ValidationError("CodebookSet: no codebooks");
  for (const auto& c : codebooks_) {
    offsets_.push_back(static_cast<std::uint32_t>(total_));
    total_ += c.size();
  }
}

Bag CodebookSet::quantize(std::span<const Matrix<double>> frames) const {
  if (frames.size() != codebooks_.size()) {
    throw ValidationError("CodebookSet: expected " + std::to_string(codebooks_.size()) +
                          " feature families, got " + std::to_string(frames.size()));
  }
  Bag merged;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto part = mmlda::quantize(codebooks_[f], frames[f], offsets_[f]);
    merged.insert(merged.end(), part.begin(), part.end());
  }
  return merged;  // ranges are disjoint and increasing, so still sorted
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& path) {
  std::string out = std::to_string(codebook.size()) + " " + std::to_string(codebook.dim()) + " " +
                    std::to_string(codebook.seed) + "\n";
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    const auto row = codebook.centroids.row(k);
    for (std::size_t j = 0; j < row.size(); ++j) out += (j ? "," : "") + text::format_double(row[j]);
    out += "\n";
  }
  text::write_text(path, out);
}

Codebook load_codebook(const std::filesystem::path& path) {
  const auto lines = text::read_lines(path);
  const auto source = path.string();
  if (lines.empty()) throw ParseError(source, 1, "missing 'K d seed' header");
  const auto head = text::split_ws(lines[0]);
  if (head.size() != 3) throw ParseError(source, 1, "expected 'K d seed' header");
  const auto k = text::parse_uint(head[0], source, 1);
  const auto d = text::parse_uint(head[1], source, 1);
  Codebook book;
  book.seed = text::parse_uint(head[2], source, 1);
  book.centroids = Matrix<double>(k, d);
  std::size_t row = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto fields = text::split(lines[i], ',');
    if (fields.size() != d) throw ParseError(source, i + 1, "expected " + std::to_string(d) + " values");
    if (row >= k) throw ParseError(source, i + 1, "more centroids than declared K");
    for (std::size_t j = 0; j < d; ++j) {
      const double v = text::parse_double(fields[j], source, i + 1);
      if (!std::isfinite(v)) throw ParseError(source, i + 1, "non-finite centroid value");
      book.centroids(row, j) = v;
    }
    ++row;
  }
  if (row != k) throw ParseError(source, lines.size(), "expected " + std::to_string(k) + " centroids");
  return book;
}

TrackFeatures load_track_features(const std::filesystem::path& path) {
  const auto lines = text::read_lines(path);
  const auto source = path.string();
  TrackFeatures out;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<double>> data;
  std::size_t dim = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto fields = text::split(lines[i], ',');
    if (fields.size() < 2) throw ParseError(source, i + 1, "expected 'track_id, v1, ..., vd'");
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      throw ParseError(source, i + 1, "expected " + std::to_string(dim) + " values, got " +
                                          std::to_string(fields.size() - 1));
    }
    const std::string id(text::trim(fields[0]));
    auto [it, inserted] = index.emplace(id, out.track_ids.size());
    if (inserted) {
      out.track_ids.push_back(id);
      data.emplace_back();
    }
    auto& dst = data[it->second];
    for (std::size_t j = 1; j < fields.size(); ++j) dst.push_back(text::parse_double(fields[j], source, i + 1));
  }
  for (auto& flat : data) {
    Matrix<double> m(flat.size() / dim, dim);
    m.data() = std::move(flat);
    out.frames.push_back(std::move(m));
  }
  return out;
}

Matrix<double> stack_frames(const TrackFeatures& features) {
  std::size_t rows = 0, dim = 0;
  for (const auto& f : features.frames) rows += f.rows(), dim = f.cols();
  Matrix<double> out(rows, dim);
  std::size_t r = 0;
  for (const auto& f : features.frames) {
    std::copy(f.data().begin(), f.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * dim));
    r += f.rows();
  }
  return out;
}

}  // namespace mmlda
