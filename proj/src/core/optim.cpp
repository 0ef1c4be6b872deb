#include "lesiongen/core/optim.hpp"

#include <cmath>

namespace lesiongen::nn {

void AdamW::step(const std::vector<Param>& params) {
    for (const auto& p : params) {
        auto* node = p.tensor.node();
        if (node->grad.size() != node->value.size()) continue;  // no grad this step
        auto& slot = state_[p.name];
        if (slot.m.size() != node->value.size()) {
            slot.m.assign(node->value.size(), 0.f);
            slot.v.assign(node->value.size(), 0.f);
            slot.t = 0;
        }
        slot.t += 1;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(slot.t));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(slot.t));
        for (size_t i = 0; i < node->value.size(); ++i) {
            const double g = node->grad[i];
            slot.m[i] = static_cast<float>(cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g);
            slot.v[i] = static_cast<float>(cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g * g);
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            double upd = cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            upd += cfg_.lr * cfg_.weight_decay * node->value[i];
            node->value[i] = static_cast<float>(node->value[i] - upd);
        }
    }
}

double AdamW::clip_grad_norm(const std::vector<Param>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        const auto& g = p.tensor.node()->grad;
        for (float v : g) sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const float s = static_cast<float>(max_norm / norm);
        for (const auto& p : params)
            for (auto& v : p.tensor.node()->grad) v *= s;
    }
    return norm;
}

void zero_grads(const std::vector<Param>& params) {
    for (const auto& p : params) {
        auto* node = p.tensor.node();
        node->grad.assign(node->value.size(), 0.f);
    }
}

}  // namespace lesiongen::nn
