#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sadm/tensor.hpp"

namespace sadm {

// Continuous-time variance-preserving noise schedule. Time t in [0,1] maps
// linearly onto log-SNR lambda, with alpha^2 = sigmoid(lambda) and
// sigma^2 = 1 - alpha^2, so alpha(0) ~ 1 (clean data) and alpha(1) ~ 0
// (pure noise).
struct NoiseSchedule {
    double lambda_min = -20.0;
    double lambda_max = 20.0;
    int T = 1000;

    double lambda_of_t(double t) const {
        check_t(t);
        return lambda_max + t * (lambda_min - lambda_max);
    }

    // (alpha_t, sigma_t)
    std::pair<double, double> alpha_sigma(double t) const {
        const double lam = lambda_of_t(t);
        const double a2 = 1.0 / (1.0 + std::exp(-lam));
        return {std::sqrt(a2), std::sqrt(1.0 - a2)};
    }

    // sigma^2_{t|s} = (1 - e^{lambda_t - lambda_s}) sigma_t^2, for s < t.
    double transition_var(double s, double t) const {
        check_pair(s, t);
        const double lt = lambda_of_t(t), ls = lambda_of_t(s);
        const auto [at, st] = alpha_sigma(t);
        (void)at;
        return (1.0 - std::exp(lt - ls)) * st * st;
    }

    // Descending (s, t) pairs: (1-1/T, 1), ..., (0, 1/T).
    std::vector<std::pair<double, double>> step_grid() const { return step_grid(T); }

    static std::vector<std::pair<double, double>> step_grid(int steps) {
        if (steps < 1) throw std::invalid_argument("step_grid: T must be >= 1");
        std::vector<std::pair<double, double>> grid;
        grid.reserve(static_cast<std::size_t>(steps));
        for (int k = steps; k >= 1; --k) {
            const double t = static_cast<double>(k) / steps;
            const double s = static_cast<double>(k - 1) / steps;
            grid.emplace_back(s, t);
        }
        return grid;
    }

    static void check_t(double t) {
        if (!(t >= 0.0 && t <= 1.0))
            throw std::invalid_argument("schedule: t = " + std::to_string(t) + " outside [0,1]");
    }

    static void check_pair(double s, double t) {
        check_t(s);
        check_t(t);
        if (!(s < t))
            throw std::invalid_argument("schedule: need s < t, got s = " + std::to_string(s) +
                                        ", t = " + std::to_string(t));
    }
};

}  // namespace sadm
