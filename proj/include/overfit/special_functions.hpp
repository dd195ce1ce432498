#pragma once

namespace overfit {

struct SeriesControl {
    double rel_tol = 1e-12;
    int max_terms = 10000;
};

// ln Gamma(x) for x > 0.
double log_gamma(double x);

// exp(log_gamma(a) - log_gamma(b)), stable for large arguments.
double gamma_ratio(double a, double b);

struct Hyp1f1Result {
    double value = 0.0;    // may be 0 or inf when |log_abs| is out of range
    double log_abs = 0.0;  // ln |value|, always finite for nonzero values
    int sign = 1;
    int terms = 0;
};

// Confluent hypergeometric function 1F1(a; b; z) via the Kummer series.
// Negative z goes through 1F1(a;b;z) = e^z 1F1(b-a;b;-z). The running sum
// is rescaled as it grows, so log_abs stays usable for very large |z|.
// Throws ConvergenceError (carrying the partial sum) when max_terms runs out.
Hyp1f1Result hyp1f1(double a, double b, double z, const SeriesControl& ctl = {});

inline double hyp1f1_value(double a, double b, double z, const SeriesControl& ctl = {}) {
    return hyp1f1(a, b, z, ctl).value;
}

}  // namespace overfit
