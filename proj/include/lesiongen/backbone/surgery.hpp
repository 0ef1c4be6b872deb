#pragma once

#include "lesiongen/backbone/bundle.hpp"

namespace lesiongen::backbone {

enum class InitPolicy { zeros, mean_of_rgb };

InitPolicy init_policy_from_string(const std::string& s);
std::string to_string(InitPolicy p);

// Widens a convolution's input from in_ch to new_in channels. Original
// channels are copied verbatim; the new slice is zeros or the mean of the
// first three input slices. Output channels and bias are unchanged.
ConvWeights inflate_input_conv(const ConvWeights& w, int new_in, InitPolicy policy);

// Widens a convolution's output from out_ch to new_out channels. Original
// rows and biases are copied; new rows/biases follow the policy.
ConvWeights inflate_output_conv(const ConvWeights& w, int new_out, InitPolicy policy);

}  // namespace lesiongen::backbone
