// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ddeps/discretize.hpp"

namespace ddeps {

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    std::vector<double> errors;  ///< scaled error norm of each accepted step (0 for the initial point)
};

/// History segment on [-1, 0] returning a dim-vector.
using History = std::function<Eigen::VectorXd(double theta)>;

/// State with blocks phi(theta_j).
[[nodiscard]] Eigen::VectorXd sample_history(const PsSystem& ps, const History& phi);

struct IntegrateOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double max_step = 0.05;  ///< also bounds the spacing of recorded samples
    double initial_step = 1e-3;
    double min_step = 1e-12;
};

/// Dormand-Prince 5(4) with a standard error-per-step controller; every accepted step is recorded.
/// Throws StepUnderflow or NonFinite; the message carries the time and the last state norm.
[[nodiscard]] Trajectory integrate(const PsSystem& ps, const Eigen::VectorXd& y0, double t_end,
                                   const IntegrateOptions& opt = {});

struct PeriodEstimate {
    double period = 0.0;
    double spread = 0.0;  ///< (max - min) / mean of the grouped spacings
    int grouping = 1;     ///< crossings per period
    int crossings = 0;
};

/// Period from upward crossings of the post-transient mean of state entry `component`.
/// Spacings are grouped in runs of m = 1..4 crossings and the smallest m with spread <= 1e-3 wins,
/// so a doubled orbit with two crossings per loop is reported with its full period.
/// Throws NotOscillatory (flat or < 3 crossings) or NotPeriodic (spread > 0.2).
[[nodiscard]] PeriodEstimate estimate_period(const Trajectory& traj, int component = 0, double skip = 0.6);

struct PeriodDoublingOptions {
    int n = 20;
    double t_end = 200.0;
    double skip = 0.6;
    double tol = 2.0;  ///< target bracket width
    IntegrateOptions integrate;
};

/// Attractor period at param = value, started from a constant history slightly above the equilibrium.
[[nodiscard]] PeriodEstimate attractor_period(const DdeModel& model, const std::string& param, double value,
                                              const PeriodDoublingOptions& opt = {});

/// Bisection on the attractor period: an end ratio above 1.5 marks the jump.
/// Throws NoPeriodJump when the ends do not differ, InvalidArgument for an empty range.
[[nodiscard]] std::pair<double, double> bracket_period_doubling(const DdeModel& model, const std::string& param,
                                                                std::pair<double, double> range,
                                                                const PeriodDoublingOptions& opt = {});

}  // namespace ddeps
