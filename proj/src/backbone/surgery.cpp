#include "lesiongen/backbone/surgery.hpp"

#include "lesiongen/core/error.hpp"

namespace lesiongen::backbone {

InitPolicy init_policy_from_string(const std::string& s) {
    if (s == "zeros") return InitPolicy::zeros;
    if (s == "mean_of_rgb") return InitPolicy::mean_of_rgb;
    throw ArgumentError("unknown init policy: " + s);
}

std::string to_string(InitPolicy p) {
    return p == InitPolicy::zeros ? "zeros" : "mean_of_rgb";
}

ConvWeights inflate_input_conv(const ConvWeights& w, int new_in, InitPolicy policy) {
    if (new_in <= w.in_ch) throw ArgumentError("inflate_input_conv: new_in must exceed in_ch");
    if (policy == InitPolicy::mean_of_rgb && w.in_ch < 3)
        throw ArgumentError("inflate_input_conv: mean_of_rgb needs >= 3 input channels");
    ConvWeights out;
    out.out_ch = w.out_ch;
    out.in_ch = new_in;
    out.kh = w.kh;
    out.kw = w.kw;
    out.kernel.assign(out.kernel_size(), 0.f);
    out.bias = w.bias;
    for (int o = 0; o < w.out_ch; ++o)
        for (int i = 0; i < w.in_ch; ++i)
            for (int r = 0; r < w.kh; ++r)
                for (int c = 0; c < w.kw; ++c) out.at(o, i, r, c) = w.at(o, i, r, c);
    if (policy == InitPolicy::mean_of_rgb) {
        for (int o = 0; o < w.out_ch; ++o)
            for (int i = w.in_ch; i < new_in; ++i)
                for (int r = 0; r < w.kh; ++r)
                    for (int c = 0; c < w.kw; ++c)
                        out.at(o, i, r, c) =
                            (w.at(o, 0, r, c) + w.at(o, 1, r, c) + w.at(o, 2, r, c)) / 3.f;
    }
    return out;
}

ConvWeights inflate_output_conv(const ConvWeights& w, int new_out, InitPolicy policy) {
    if (new_out <= w.out_ch) throw ArgumentError("inflate_output_conv: new_out must exceed out_ch");
    if (policy == InitPolicy::mean_of_rgb && w.out_ch < 3)
        throw ArgumentError("inflate_output_conv: mean_of_rgb needs >= 3 output channels");
    ConvWeights out;
    out.out_ch = new_out;
    out.in_ch = w.in_ch;
    out.kh = w.kh;
    out.kw = w.kw;
    out.kernel.assign(out.kernel_size(), 0.f);
    out.bias.assign(new_out, 0.f);
    std::copy(w.kernel.begin(), w.kernel.end(), out.kernel.begin());
    std::copy(w.bias.begin(), w.bias.end(), out.bias.begin());
    if (policy == InitPolicy::mean_of_rgb) {
        for (int o = w.out_ch; o < new_out; ++o) {
            for (int i = 0; i < w.in_ch; ++i)
                for (int r = 0; r < w.kh; ++r)
                    for (int c = 0; c < w.kw; ++c)
                        out.at(o, i, r, c) =
                            (w.at(0, i, r, c) + w.at(1, i, r, c) + w.at(2, i, r, c)) / 3.f;
            out.bias[o] = (w.bias[0] + w.bias[1] + w.bias[2]) / 3.f;
        }
    }
    return out;
}

}  // namespace lesiongen::backbone
