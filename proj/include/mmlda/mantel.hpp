#ifndef MMLDA_MANTEL_HPP_
#define MMLDA_MANTEL_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "mmlda/common.hpp"

namespace mmlda {

// Spearman correlation is undefined when one rank sequence is constant.
class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

enum class Tail { upper, two_sided };

std::string_view to_string(Tail tail);
Tail parse_tail(std::string_view name);

struct MantelResult {
  double rho_observed = 0.0;
  std::size_t permutations = 0;
  Tail tail = Tail::upper;
  double p_value = 1.0;  // (exceedances + 1) / (permutations + 1)
  std::size_t exceedances = 0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
};

// Ranks 1..n; tied values share the average of their positions.
std::vector<double> rank_average_ties(std::span<const double> values);

// Pearson correlation of the average-tie ranks of x and y.
double spearman(std::span<const double> x, std::span<const double> y);

// Off-diagonal entries in row-major order, H(H-1) values.
std::vector<double> off_diagonal(const Matrix<double>& m);

// Spearman correlation over all off-diagonal entries; both (i,j) and (j,i)
// enter, so non-symmetric matrices are supported.
double spearman_offdiag(const Matrix<double>& a, const Matrix<double>& b);

// result(i, j) = m(perm[i], perm[j]).
Matrix<double> permute_jointly(const Matrix<double>& m, std::span<const std::size_t> perm);

// Mantel permutation test with Spearman's statistic. Replicate r draws its
// permutation from a generator seeded by derive_seed(seed, r). Permuted
// statistics within 1e-12 of the observed one count as exceedances.
MantelResult mantel_test(const Matrix<double>& a, const Matrix<double>& b, std::size_t permutations,
                         std::uint64_t seed, Tail tail = Tail::upper);

// {"rho", "p", "permutations", "tail", "seed", "n"}
void save_mantel_json(const MantelResult& result, const std::filesystem::path& path);

}  // namespace mmlda

#endif  // MMLDA_MANTEL_HPP_
