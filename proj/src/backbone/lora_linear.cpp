#include "lesiongen/backbone/bundle.hpp"

namespace lesiongen::backbone {

nn::Tensor LoraLinear::forward(const nn::Tensor& x) const {
    nn::Tensor y = nn::add_row_bias(nn::matmul(x, weight), bias);
    if (has_adapter()) {
        nn::Tensor delta = nn::matmul(nn::matmul(x, lora_a), lora_b);
        y = nn::axpby(1.f, y, adapter_scale(), delta);
    }
    return y;
}

}  // namespace lesiongen::backbone
