#pragma once

#include <vector>

#include "movedec/tensor.hpp"

namespace movedec::nn {

// SGD with momentum and inverse-time learning-rate decay:
//   lr_t = base_lr / (1 + decay * step_count)
//   v <- momentum * v - lr_t * g;  w <- w + v
// step_count counts completed updates, so the first step runs at base_lr.
struct OptimizerState {
    double base_lr = 0.001;
    double momentum = 0.9;
    double decay = 0.9;
    long step_count = 0;
    std::vector<Tensor> velocity;

    double current_lr() const { return base_lr / (1.0 + decay * static_cast<double>(step_count)); }
};

inline void sgd_step(const std::vector<Param*>& params, OptimizerState& st) {
    if (st.velocity.empty())
        for (const Param* p : params) st.velocity.push_back(Tensor::zeros(p->value.shape));
    if (st.velocity.size() != params.size())
        throw ShapeError("optimizer state tracks a different parameter list");
    const double lr = st.current_lr();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        Tensor& v = st.velocity[i];
        if (!v.same_shape(p.value)) throw ShapeError("velocity shape drifted from parameter");
        for (std::size_t j = 0; j < v.v.size(); ++j) {
            v.v[j] = st.momentum * v.v[j] - lr * p.grad.v[j];
            p.value.v[j] += v.v[j];
        }
    }
    ++st.step_count;
}

}  // namespace movedec::nn
