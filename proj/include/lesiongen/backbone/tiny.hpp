#pragma once

#include "lesiongen/backbone/bundle.hpp"
#include "lesiongen/backbone/surgery.hpp"

namespace lesiongen::backbone {

// Desk-scale backbone. The encoder/decoder are fixed analytic convolutions
// (per-channel block pooling and nearest upsampling with an identity output
// conv); they reconstruct up to block averaging with no pretraining, stand in
// for the frozen full-scale autoencoder, and expose exactly the conv layers
// the channel surgery operates on. The denoiser is a small flat UNet-style
// net with two residual conv blocks, self- and cross-attention.
struct TinyBackboneConfig {
    int image_size = 32;
    int pixel_channels = 4;  // 3 builds the pre-surgery variant
    int latent_channels = 4;
    int downsample = 4;
    int width = 48;          // denoiser channels
    int embed_width = 32;    // text-token width
    int norm_groups = 8;
    float scale_factor = 2.0f;
    uint64_t init_seed = 1234;
};

class TinyBackbone : public Backbone {
public:
    explicit TinyBackbone(const TinyBackboneConfig& cfg);

    nn::Tensor encode(const nn::Tensor& pixels) override;
    nn::Tensor decode(const nn::Tensor& latent) override;
    nn::Tensor denoise(const nn::Tensor& z, int t, const Conditioning& cond) override;

    Conditioning embed_text(const std::string& caption) const override;
    Conditioning null_conditioning() const override;

    int pixel_channels() const override { return cfg_.pixel_channels; }
    int latent_channels() const override { return cfg_.latent_channels; }
    int downsample_factor() const override { return cfg_.downsample; }
    int embedding_width() const override { return cfg_.embed_width; }
    float scale_factor() const override { return cfg_.scale_factor; }

    std::vector<nn::Param> parameters() override;
    std::vector<std::pair<std::string, LoraLinear*>> lora_targets() override;
    std::string kind() const override { return "tiny"; }

    const TinyBackboneConfig& config() const { return cfg_; }
    bool has_surgery() const { return enc_w_slice_.defined(); }

    // Current encoder input / decoder output convolutions as plain weights.
    ConvWeights encoder_input_conv() const;
    ConvWeights decoder_output_conv() const;

    // Replaces the 3-channel pixel I/O with 4-channel convs via the inflate
    // operations; the new slices become separate `slice`-kind parameters.
    void apply_four_channel_surgery(InitPolicy input_policy, InitPolicy output_policy);

private:
    struct ResBlock {
        nn::Tensor gn1_g, gn1_b, conv1_w, conv1_b;
        nn::Tensor tproj_w, tproj_b;
        nn::Tensor gn2_g, gn2_b, conv2_w, conv2_b;
    };
    struct AttnBlock {
        nn::Tensor gn_g, gn_b;
        LoraLinear q, k, v, o;
    };

    nn::Tensor effective_enc_kernel() const;
    nn::Tensor effective_dec_kernel() const;
    nn::Tensor effective_dec_bias() const;
    nn::Tensor time_embedding(int t) const;
    nn::Tensor run_res_block(ResBlock& rb, const nn::Tensor& h, const nn::Tensor& temb);
    nn::Tensor run_attn_block(AttnBlock& ab, const nn::Tensor& h, const nn::Tensor* ctx);

    TinyBackboneConfig cfg_;

    // analytic autoencoder
    nn::Tensor enc_w_, enc_b_, enc_w_slice_;
    nn::Tensor dec_w_, dec_b_, dec_w_row_, dec_b_row_;

    // denoiser
    nn::Tensor conv_in_w_, conv_in_b_;
    nn::Tensor temb_l1_w_, temb_l1_b_, temb_l2_w_, temb_l2_b_;
    ResBlock rb1_, rb2_;
    AttnBlock attn1_, attn2_, xattn_;
    nn::Tensor gn_out_g_, gn_out_b_, conv_out_w_, conv_out_b_;
};

std::shared_ptr<TinyBackbone> build_tiny_backbone(const TinyBackboneConfig& cfg = {});

}  // namespace lesiongen::backbone
