#include "kge/gradcheck.hpp"

#include "kge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kge {

double gradient_relative_error(double analytic, double numeric) {
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

double min_relu_margin(const Tape& tape) {
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& entry : tape.entries()) {
        if (entry.op != "relu") continue;
        for (float v : entry.inputs.front().data()) margin = std::min(margin, std::abs(static_cast<double>(v)));
    }
    return margin;
}

GradCheckReport gradient_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                               double tolerance, double step) {
    if (tolerance <= 0.0) throw ContractError("gradient_check: tolerance must be positive");

    GradCheckReport report;
    report.tolerance = tolerance;

    // Analytic pass on private gradient buffers.
    std::vector<std::vector<float>> saved_grads;
    std::vector<bool> saved_flags;
    for (const auto& p : params) {
        saved_grads.emplace_back(p.grad().begin(), p.grad().end());
        saved_flags.push_back(p.requires_grad());
        Tensor q = p;
        q.set_requires_grad(true);
        q.zero_grad();
    }
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor y = f();
        backward(y);
        report.min_kink_distance = min_relu_margin(tape);
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor q = params[k];
        auto g = q.grad();
        for (std::size_t i = 0; i < q.numel(); ++i) report.analytic.push_back(i < g.size() ? g[i] : 0.0);
    }

    auto evaluate = [&]() {
        NoGradScope no_grad;
        return static_cast<double>(f().item());
    };
    for (const auto& p : params) {
        Tensor q = p;
        auto values = q.data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const float original = values[i];
            // Divide by the perturbation actually representable in float32.
            const float hi = static_cast<float>(original + step);
            const float lo = static_cast<float>(original - step);
            values[i] = hi;
            const double up = evaluate();
            values[i] = lo;
            const double down = evaluate();
            values[i] = original;
            report.numeric.push_back((up - down) / (static_cast<double>(hi) - static_cast<double>(lo)));
        }
    }

    for (std::size_t i = 0; i < report.analytic.size(); ++i) {
        const double err = gradient_relative_error(report.analytic[i], report.numeric[i]);
        report.relative_error.push_back(err);
        report.max_relative_error = std::max(report.max_relative_error, err);
        if (!(err <= tolerance)) report.failures.push_back(i);
    }

    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor q = params[k];
        q.set_requires_grad(saved_flags[k]);
        if (saved_grads[k].empty()) {
            q.zero_grad();
        } else {
            std::copy(saved_grads[k].begin(), saved_grads[k].end(), q.grad_buffer().begin());
        }
    }
    return report;
}

GradCheckReport gradient_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                               double tolerance, double step) {
    Tensor x = point.clone();
    x.set_requires_grad(true);
    return gradient_check([&]() { return f(x); }, {x}, tolerance, step);
}

} // namespace kge
