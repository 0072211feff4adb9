#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace advqa {

/// 2x2 contingency table of non-negative counts, {{a, b}, {c, d}}.
using Table2x2 = std::array<std::array<std::uint64_t, 2>, 2>;

/// Two-sided Fisher exact p-value: total hypergeometric probability of all
/// tables with the observed margins whose probability does not exceed the
/// observed table's (with a 1e-7 relative tolerance for ties).
double fisher_exact_2x2(const Table2x2& table);

struct WelchResult {
    double t = 0.0;
    double dof = 0.0;
    double p_two_sided = 1.0;
};

/// Welch's unequal-variance t-test. Each sample needs at least two values;
/// both samples having zero variance is an error.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// P(T > t) for Student's t with `dof` (real, positive) degrees of freedom.
double student_t_sf(double t, double dof);

} // namespace advqa
