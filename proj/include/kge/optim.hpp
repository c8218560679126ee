#pragma once

#include "kge/tensor.hpp"

#include <vector>

namespace kge {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

/// Adaptive-moment optimizer over a fixed parameter list. Parameters without
/// an allocated gradient buffer are treated as having a zero gradient.
class Adam {
public:
    Adam() = default;
    Adam(ParameterList params, AdamConfig config);

    void step();
    void zero_grad();
    void reset();

    std::size_t steps() const { return steps_; }
    const ParameterList& parameters() const { return params_; }
    const AdamConfig& config() const { return config_; }

private:
    ParameterList params_;
    AdamConfig config_;
    std::vector<std::vector<float>> m_, v_;
    std::size_t steps_ = 0;
};

} // namespace kge
