#include "mmlda/mantel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mmlda/random.hpp"
#include "mmlda/text_io.hpp"

namespace mmlda {

std::string_view to_string(Tail tail) { return tail == Tail::upper ? "upper" : "two-sided"; }

Tail parse_tail(std::string_view name) {
  if (name == "upper") return Tail::upper;
  if (name == "two-sided" || name == "two_sided") return Tail::two_sided;
  throw ValidationError("unknown tail '" + std::string(name) + "' (upper | two-sided)");
}

std::vector<double> rank_average_ties(std::span<const double> values) {
  if (values.empty()) throw ValidationError("rank_average_ties: empty input");
  for (double v : values) {
    if (std::isnan(v)) throw ValidationError("rank_average_ties: NaN input");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of positions i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

namespace {

struct Centered {
  std::vector<double> values;
  double sum_squares = 0.0;
};

Centered center(std::vector<double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  Centered c;
  for (auto& x : v) {
    x -= mean;
    c.sum_squares += x * x;
  }
  c.values = std::move(v);
  return c;
}

double pearson(const Centered& x, const Centered& y) {
  if (x.sum_squares <= 0.0 || y.sum_squares <= 0.0) {
    throw UndefinedCorrelation("correlation undefined: constant rank sequence");
  }
  double cross = 0.0;
  for (std::size_t i = 0; i < x.values.size(); ++i) cross += x.values[i] * y.values[i];
  return std::clamp(cross / std::sqrt(x.sum_squares * y.sum_squares), -1.0, 1.0);
}

void check_pair(const Matrix<double>& a, const Matrix<double>& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols()) throw ValidationError("spearman_offdiag: matrices must be square");
  if (a.rows() != b.rows()) throw ValidationError("spearman_offdiag: dimension mismatch");
  if (a.rows() < 3) throw ValidationError("spearman_offdiag: need H >= 3");
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("spearman: length mismatch");
  return pearson(center(rank_average_ties(x)), center(rank_average_ties(y)));
}

std::vector<double> off_diagonal(const Matrix<double>& m) {
  std::vector<double> out;
  out.reserve(m.rows() * (m.cols() - 1));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (i != j) out.push_back(m(i, j));
    }
  }
  return out;
}

double spearman_offdiag(const Matrix<double>& a, const Matrix<double>& b) {
  check_pair(a, b);
  const auto x = off_diagonal(a), y = off_diagonal(b);
  return spearman(x, y);
}

Matrix<double> permute_jointly(const Matrix<double>& m, std::span<const std::size_t> perm) {
  if (perm.size() != m.rows()) throw ValidationError("permute_jointly: permutation length mismatch");
  Matrix<double> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(perm[i], perm[j]);
  }
  return out;
}

MantelResult mantel_test(const Matrix<double>& a, const Matrix<double>& b, std::size_t permutations,
                         std::uint64_t seed, Tail tail) {
  check_pair(a, b);
  if (permutations == 0) throw ValidationError("mantel_test: permutations must be >= 1");
  const std::size_t H = a.rows();

  MantelResult result;
  result.permutations = permutations;
  result.tail = tail;
  result.seed = seed;
  result.n = H;
  result.rho_observed = spearman_offdiag(a, b);

  // A joint permutation only rearranges the off-diagonal entries, so ranks
  // and their centering are computed once and re-indexed per replicate.
  const auto ca = center(rank_average_ties(off_diagonal(a)));
  const auto cb = center(rank_average_ties(off_diagonal(b)));
  if (ca.sum_squares <= 0.0 || cb.sum_squares <= 0.0) {
    throw UndefinedCorrelation("correlation undefined: constant rank sequence");
  }
  Matrix<double> rb(H, H, 0.0);
  {
    std::size_t k = 0;
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < H; ++j) {
        if (i != j) rb(i, j) = cb.values[k++];
      }
    }
  }
  const double scale = std::sqrt(ca.sum_squares * cb.sum_squares);
  constexpr double kTieTolerance = 1e-12;

  std::size_t exceed = 0;
  for (std::size_t r = 0; r < permutations; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    const auto perm = random_permutation(H, rng);
    double cross = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < H; ++i) {
      const auto row = rb.row(perm[i]);
      for (std::size_t j = 0; j < H; ++j) {
        if (i != j) cross += ca.values[k++] * row[perm[j]];
      }
    }
    const double rho = cross / scale;
    const bool hit = tail == Tail::upper ? rho >= result.rho_observed - kTieTolerance
                                         : std::abs(rho) >= std::abs(result.rho_observed) - kTieTolerance;
    exceed += hit;
  }
  result.exceedances = exceed;
  result.p_value = static_cast<double>(exceed + 1) / static_cast<double>(permutations + 1);
  return result;
}

void save_mantel_json(const MantelResult& result, const std::filesystem::path& path) {
  nlohmann::json j{{"rho", result.rho_observed},         {"p", result.p_value},
                   {"permutations", result.permutations}, {"tail", std::string(to_string(result.tail))},
                   {"seed", result.seed},                 {"n", result.n},
                   {"exceedances", result.exceedances}};
  text::write_text(path, j.dump(2) + "\n");
}

}  // namespace mmlda
