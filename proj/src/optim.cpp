#include "kge/optim.hpp"

#include "kge/errors.hpp"

#include <cmath>

namespace kge {

Adam::Adam(ParameterList params, AdamConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.lr > 0.0f)) throw ConfigError("Adam: learning rate must be > 0");
    reset();
}

void Adam::reset() {
    m_.assign(params_.size(), {});
    v_.assign(params_.size(), {});
    for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].tensor.numel(), 0.0f);
        v_[i].assign(params_[i].tensor.numel(), 0.0f);
    }
    steps_ = 0;
}

void Adam::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::step() {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(config_.beta1), t));
    const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(config_.beta2), t));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i].tensor;
        auto w = p.data();
        auto g = p.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        const bool has = !g.empty();
        for (std::size_t k = 0; k < w.size(); ++k) {
            const float gk = has ? g[k] : 0.0f;
            m[k] = config_.beta1 * m[k] + (1.0f - config_.beta1) * gk;
            v[k] = config_.beta2 * v[k] + (1.0f - config_.beta2) * gk * gk;
            const float mhat = m[k] / c1;
            const float vhat = v[k] / c2;
            w[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

} // namespace kge
