#ifndef MMLDA_SPECIAL_HPP_
#define MMLDA_SPECIAL_HPP_

namespace mmlda {

// Digamma for x > 0: recurrence shift to x >= 10, then the asymptotic series.
double digamma(double x);

// ln Gamma(x) for x > 0. Reentrant.
double log_gamma(double x);

}  // namespace mmlda

#endif  // MMLDA_SPECIAL_HPP_
