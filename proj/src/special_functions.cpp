#include "overfit/special_functions.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "overfit/error.hpp"

namespace overfit {

namespace {

constexpr double kRescaleThreshold = 1e280;
constexpr int kConsecutiveSmallTerms = 3;

struct ScaledSum {
    double sum = 1.0;
    double log_scale = 0.0;
    int terms = 1;
};

// Sum_k (a)_k / (b)_k * x^k / k!, rescaling to avoid overflow.
ScaledSum kummer_series(double a, double b, double x, const SeriesControl& ctl) {
    ScaledSum out;
    double term = 1.0;
    int small_run = 0;
    for (int k = 0; k < ctl.max_terms; ++k) {
        const double ratio = (a + k) / (b + k) * x / (k + 1);
        term *= ratio;
        out.sum += term;
        ++out.terms;
        if (term == 0.0) return out;  // a is a non-positive integer

        if (std::abs(out.sum) > kRescaleThreshold) {
            out.sum /= kRescaleThreshold;
            term /= kRescaleThreshold;
            out.log_scale += std::log(kRescaleThreshold);
        }

        const double next_ratio = std::abs((a + k + 1) / (b + k + 1) * x / (k + 2));
        if (std::abs(term) < ctl.rel_tol * std::abs(out.sum) && next_ratio < 1.0) {
            if (++small_run >= kConsecutiveSmallTerms) return out;
        } else {
            small_run = 0;
        }
    }
    const double partial = out.sum * std::exp(out.log_scale);
    throw ConvergenceError("1F1 series did not converge within " + std::to_string(ctl.max_terms) +
                               " terms",
                           partial, out.terms);
}

}  // namespace

double log_gamma(double x) {
    if (!(x > 0.0)) throw ValidationError("log_gamma requires x > 0");
    return boost::math::lgamma(x);
}

double gamma_ratio(double a, double b) { return std::exp(log_gamma(a) - log_gamma(b)); }

Hyp1f1Result hyp1f1(double a, double b, double z, const SeriesControl& ctl) {
    if (!(ctl.rel_tol > 0.0) || ctl.max_terms < 1) throw ValidationError("invalid series control");
    if (b <= 0.0 && b == std::floor(b)) {
        throw ValidationError("1F1 undefined for non-positive integer b");
    }
    Hyp1f1Result out;
    if (z == 0.0) {
        out.value = 1.0;
        out.terms = 1;
        return out;
    }

    ScaledSum s;
    double shift = 0.0;
    try {
        if (z < 0.0) {
            s = kummer_series(b - a, b, -z, ctl);
            shift = z;
        } else {
            s = kummer_series(a, b, z, ctl);
        }
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(e.what(), e.partial_value() * std::exp(shift), e.iterations());
    }

    out.terms = s.terms;
    if (s.sum == 0.0) {
        out.value = 0.0;
        out.log_abs = -std::numeric_limits<double>::infinity();
        return out;
    }
    out.sign = s.sum > 0.0 ? 1 : -1;
    out.log_abs = std::log(std::abs(s.sum)) + s.log_scale + shift;
    out.value = out.sign * std::exp(out.log_abs);
    return out;
}

}  // namespace overfit
