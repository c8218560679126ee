#pragma once

#include "kge/tensor.hpp"

#include <functional>
#include <vector>

namespace kge {

struct GradCheckReport {
    // One entry per checked coordinate, concatenated over all checked tensors.
    std::vector<double> analytic;
    std::vector<double> numeric;
    std::vector<double> relative_error;
    std::vector<std::size_t> failures;
    double max_relative_error = 0.0;
    double tolerance = 0.0;
    // Smallest |input| seen by any relu during the analytic pass; values
    // below the finite-difference step mean a kink may have been straddled.
    double min_kink_distance = 0.0;

    bool passed() const { return failures.empty(); }
};

/// |a - n| / max(1, |a|, |n|): relative for gradients of magnitude >= 1,
/// absolute below that so float32 round-off near zero is not amplified.
double gradient_relative_error(double analytic, double numeric);

/// Smallest |x| over the inputs of every relu recorded on `tape`.
double min_relu_margin(const Tape& tape);

/// Central-difference check of d f / d params. `f` must rebuild its graph from
/// the current parameter values on every call. Parameters are perturbed in
/// place and restored; their accumulated gradients are left untouched.
GradCheckReport gradient_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                               double tolerance, double step = 1e-3);

/// Single-input form: checks d f(x) / d x at `point`.
GradCheckReport gradient_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                               double tolerance, double step = 1e-3);

} // namespace kge
