#include "advqa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advqa/error.hpp"

namespace advqa {
namespace {

double log_choose(std::uint64_t n, std::uint64_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            break;
        }
    }
    return h;
}

} // namespace

double fisher_exact_2x2(const Table2x2& t) {
    const std::uint64_t a = t[0][0], b = t[0][1], c = t[1][0], d = t[1][1];
    const std::uint64_t n = a + b + c + d;
    if (n == 0) {
        throw Error("invalid_argument", "Fisher's exact test needs a nonempty table");
    }
    const std::uint64_t row1 = a + b;
    const std::uint64_t row2 = c + d;
    const std::uint64_t col1 = a + c;
    const double log_denominator = log_choose(n, col1);
    const auto log_prob = [&](std::uint64_t x) {
        return log_choose(row1, x) + log_choose(row2, col1 - x) - log_denominator;
    };
    const std::uint64_t lo = col1 > row2 ? col1 - row2 : 0;
    const std::uint64_t hi = std::min(row1, col1);
    const double observed = log_prob(a);
    double p = 0.0;
    for (std::uint64_t x = lo; x <= hi; ++x) {
        const double lp = log_prob(x);
        if (lp <= observed + 1e-7) {
            p += std::exp(lp);
        }
    }
    return std::min(p, 1.0);
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw Error("invalid_argument", "incomplete beta needs positive shape parameters");
    }
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double dof) {
    if (!(dof > 0.0)) {
        throw Error("invalid_argument", "degrees of freedom must be positive");
    }
    if (std::isinf(t)) {
        return t > 0 ? 0.0 : 1.0;
    }
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * dof, 0.5, x);
    return t >= 0.0 ? tail : 1.0 - tail;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw Error("invalid_argument", "Welch's t-test needs at least two samples per group");
    }
    const auto moments = [](std::span<const double> s) {
        double mean = 0.0;
        for (double v : s) mean += v;
        mean /= static_cast<double>(s.size());
        double ss = 0.0;
        for (double v : s) ss += (v - mean) * (v - mean);
        return std::pair{mean, ss / static_cast<double>(s.size() - 1)};
    };
    const auto [mean_a, var_a] = moments(a);
    const auto [mean_b, var_b] = moments(b);
    if (var_a == 0.0 && var_b == 0.0) {
        throw Error("zero_variance", "both samples have zero variance");
    }
    const double se_a = var_a / static_cast<double>(a.size());
    const double se_b = var_b / static_cast<double>(b.size());
    const double se2 = se_a + se_b;

    WelchResult r;
    r.t = (mean_a - mean_b) / std::sqrt(se2);
    r.dof = se2 * se2 /
            (se_a * se_a / static_cast<double>(a.size() - 1) + se_b * se_b / static_cast<double>(b.size() - 1));
    r.p_two_sided = std::min(1.0, 2.0 * student_t_sf(std::abs(r.t), r.dof));
    return r;
}

} // namespace advqa
