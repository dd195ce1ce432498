#pragma once

#include <cmath>

#include "overfit/calibration.hpp"

namespace overfit::testing {

inline constexpr int kFuturesAssets = 12;
inline constexpr int kFuturesFamilies = 3;

// Intercept plus three signal families; asset i loads only on its own member
// of each family, with unit loadings before scaling.
inline ModelSpec futures_panel_shape() {
    const int m = kFuturesAssets;
    const int p = 1 + kFuturesFamilies * m;
    MatrixXd beta = MatrixXd::Zero(m, p);
    for (int i = 0; i < m; ++i) {
        for (int f = 0; f < kFuturesFamilies; ++f) beta(i, 1 + m * f + i) = 1.0;
    }
    return make_intercept_spec(beta, MatrixXd::Identity(m, m), MatrixXd::Identity(p - 1, p - 1));
}

inline BacktestWindow futures_window() { return {2520, 756}; }

// Scaled so the annualized expected in-sample Sharpe ratio is 8.22.
inline ModelSpec futures_panel_spec() {
    const ModelSpec shape = futures_panel_shape();
    const double c = scale_for_sr_eis(shape, futures_window(), 8.22 / std::sqrt(252.0));
    return scale_beta(shape, c);
}

}  // namespace overfit::testing
