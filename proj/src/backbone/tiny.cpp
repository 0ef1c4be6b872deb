#include "lesiongen/backbone/tiny.hpp"

#include <cmath>
#include <sstream>

#include "lesiongen/core/error.hpp"
#include "lesiongen/core/rng.hpp"

namespace lesiongen::backbone {

namespace {

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

nn::Tensor make_conv_weight(Rng& rng, int co, int ci, int k, double gain) {
    std::vector<float> w(static_cast<size_t>(co) * ci * k * k);
    const double std_dev = gain * std::sqrt(2.0 / (static_cast<double>(ci) * k * k));
    rng.fill_normal(w, std_dev);
    return nn::leaf({co, ci, k, k}, std::move(w));
}

nn::Tensor make_linear_weight(Rng& rng, int d, int k, double gain) {
    std::vector<float> w(static_cast<size_t>(d) * k);
    rng.fill_normal(w, gain / std::sqrt(static_cast<double>(d)));
    return nn::leaf({d, k}, std::move(w));
}

nn::Tensor zeros_leaf(std::vector<int> shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return nn::leaf(std::move(shape), std::vector<float>(n, 0.f));
}

nn::Tensor ones_leaf(std::vector<int> shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return nn::leaf(std::move(shape), std::vector<float>(n, 1.f));
}

}  // namespace

TinyBackbone::TinyBackbone(const TinyBackboneConfig& cfg) : cfg_(cfg) {
    if (cfg.image_size % cfg.downsample != 0)
        throw ArgumentError("tiny backbone: image size not divisible by downsample factor");
    if (cfg.width % cfg.norm_groups != 0)
        throw ArgumentError("tiny backbone: width not divisible by norm groups");
    if (cfg.pixel_channels != 3 && cfg.pixel_channels != 4)
        throw ArgumentError("tiny backbone: pixel channels must be 3 or 4");

    const int f = cfg.downsample;
    const int lc = cfg.latent_channels;
    const int pc = cfg.pixel_channels;
    const int C = cfg.width;
    const int E = cfg.embed_width;

    // Encoder: per-channel f x f block average into the matching latent
    // channel; latent channels beyond the pixel count stay zero.
    {
        std::vector<float> w(static_cast<size_t>(lc) * pc * f * f, 0.f);
        const float inv = 1.f / static_cast<float>(f * f);
        for (int j = 0; j < std::min(lc, pc); ++j)
            for (int r = 0; r < f; ++r)
                for (int c = 0; c < f; ++c)
                    w[((static_cast<size_t>(j) * pc + j) * f + r) * f + c] = inv;
        enc_w_ = nn::leaf({lc, pc, f, f}, std::move(w));
        enc_b_ = zeros_leaf({lc});
    }
    // Decoder: nearest upsample then an identity 3x3 conv reading the
    // matching latent channel.
    {
        std::vector<float> w(static_cast<size_t>(pc) * lc * 9, 0.f);
        for (int j = 0; j < std::min(lc, pc); ++j)
            w[((static_cast<size_t>(j) * lc + j) * 3 + 1) * 3 + 1] = 1.f;
        dec_w_ = nn::leaf({pc, lc, 3, 3}, std::move(w));
        dec_b_ = zeros_leaf({pc});
    }

    Rng rng(mix_seed(cfg.init_seed, 0x7171));
    conv_in_w_ = make_conv_weight(rng, C, lc, 3, 1.0);
    conv_in_b_ = zeros_leaf({C});
    temb_l1_w_ = make_linear_weight(rng, 32, C, 1.0);
    temb_l1_b_ = zeros_leaf({C});
    temb_l2_w_ = make_linear_weight(rng, C, C, 1.0);
    temb_l2_b_ = zeros_leaf({C});

    auto init_res_block = [&](ResBlock& rb) {
        rb.gn1_g = ones_leaf({C});
        rb.gn1_b = zeros_leaf({C});
        rb.conv1_w = make_conv_weight(rng, C, C, 3, 1.0);
        rb.conv1_b = zeros_leaf({C});
        rb.tproj_w = make_linear_weight(rng, C, C, 1.0);
        rb.tproj_b = zeros_leaf({C});
        rb.gn2_g = ones_leaf({C});
        rb.gn2_b = zeros_leaf({C});
        // Second conv starts at zero so each block begins as identity.
        rb.conv2_w = zeros_leaf({C, C, 3, 3});
        rb.conv2_b = zeros_leaf({C});
    };
    init_res_block(rb1_);
    init_res_block(rb2_);

    auto init_attn = [&](AttnBlock& ab, int ctx_dim) {
        ab.gn_g = ones_leaf({C});
        ab.gn_b = zeros_leaf({C});
        ab.q.weight = make_linear_weight(rng, C, C, 1.0);
        ab.q.bias = zeros_leaf({C});
        ab.k.weight = make_linear_weight(rng, ctx_dim, C, 1.0);
        ab.k.bias = zeros_leaf({C});
        ab.v.weight = make_linear_weight(rng, ctx_dim, C, 1.0);
        ab.v.bias = zeros_leaf({C});
        // Zero out-projection: attention blocks start as identity.
        ab.o.weight = zeros_leaf({C, C});
        ab.o.bias = zeros_leaf({C});
    };
    init_attn(attn1_, C);
    init_attn(attn2_, C);
    init_attn(xattn_, E);

    gn_out_g_ = ones_leaf({C});
    gn_out_b_ = zeros_leaf({C});
    // Zero final conv: the fresh denoiser predicts eps = 0.
    conv_out_w_ = zeros_leaf({lc, C, 3, 3});
    conv_out_b_ = zeros_leaf({lc});
}

nn::Tensor TinyBackbone::effective_enc_kernel() const {
    if (!enc_w_slice_.defined()) return enc_w_;
    return nn::concat_conv_in(enc_w_, enc_w_slice_, cfg_.latent_channels, 3, 1, cfg_.downsample,
                              cfg_.downsample);
}

nn::Tensor TinyBackbone::effective_dec_kernel() const {
    if (!dec_w_row_.defined()) return dec_w_;
    return nn::concat_axis0(dec_w_, dec_w_row_);
}

nn::Tensor TinyBackbone::effective_dec_bias() const {
    if (!dec_b_row_.defined()) return dec_b_;
    return nn::concat_axis0(dec_b_, dec_b_row_);
}

nn::Tensor TinyBackbone::encode(const nn::Tensor& pixels) {
    if (pixels.shape().size() != 3 || pixels.shape()[0] != cfg_.pixel_channels)
        throw ArgumentError("encode: pixel channel mismatch");
    auto z = nn::conv2d(pixels, effective_enc_kernel(), enc_b_, cfg_.downsample, 0);
    return nn::scale(z, cfg_.scale_factor);
}

nn::Tensor TinyBackbone::decode(const nn::Tensor& latent) {
    if (latent.shape().size() != 3 || latent.shape()[0] != cfg_.latent_channels)
        throw ArgumentError("decode: latent channel mismatch");
    auto z = nn::scale(latent, 1.f / cfg_.scale_factor);
    auto up = nn::upsample_nearest(z, cfg_.downsample);
    return nn::conv2d(up, effective_dec_kernel(), effective_dec_bias(), 1, 1);
}

nn::Tensor TinyBackbone::time_embedding(int t) const {
    std::vector<float> raw(32);
    for (int i = 0; i < 16; ++i) {
        const double w = std::exp(-std::log(10000.0) * i / 15.0);
        raw[i] = static_cast<float>(std::sin(w * t));
        raw[16 + i] = static_cast<float>(std::cos(w * t));
    }
    auto e = nn::from_vec({1, 32}, std::move(raw));
    auto h = nn::silu(nn::add_row_bias(nn::matmul(e, temb_l1_w_), temb_l1_b_));
    h = nn::add_row_bias(nn::matmul(h, temb_l2_w_), temb_l2_b_);
    return h;  // [1, C]
}

nn::Tensor TinyBackbone::run_res_block(ResBlock& rb, const nn::Tensor& h, const nn::Tensor& temb) {
    auto x = nn::group_norm(h, rb.gn1_g, rb.gn1_b, cfg_.norm_groups);
    x = nn::silu(x);
    x = nn::conv2d(x, rb.conv1_w, rb.conv1_b, 1, 1);
    auto tb = nn::add_row_bias(nn::matmul(temb, rb.tproj_w), rb.tproj_b);  // [1, C]
    x = nn::add_channel_bias(x, nn::reshape(tb, {cfg_.width}));
    x = nn::group_norm(x, rb.gn2_g, rb.gn2_b, cfg_.norm_groups);
    x = nn::silu(x);
    x = nn::conv2d(x, rb.conv2_w, rb.conv2_b, 1, 1);
    return nn::add(h, x);
}

nn::Tensor TinyBackbone::run_attn_block(AttnBlock& ab, const nn::Tensor& h, const nn::Tensor* ctx) {
    const int hh = h.shape()[1], ww = h.shape()[2];
    auto tok = nn::chw_to_tokens(nn::group_norm(h, ab.gn_g, ab.gn_b, cfg_.norm_groups));
    auto q = ab.q.forward(tok);
    const nn::Tensor& ctx_tok = ctx ? *ctx : tok;
    auto k = ab.k.forward(ctx_tok);
    auto v = ab.v.forward(ctx_tok);
    auto scores = nn::scale(nn::matmul(q, nn::transpose(k)),
                            1.f / std::sqrt(static_cast<float>(cfg_.width)));
    auto attn = nn::matmul(nn::softmax_rows(scores), v);
    auto out = ab.o.forward(attn);
    return nn::add(h, nn::tokens_to_chw(out, hh, ww));
}

nn::Tensor TinyBackbone::denoise(const nn::Tensor& z, int t, const Conditioning& cond) {
    if (z.shape().size() != 3 || z.shape()[0] != cfg_.latent_channels)
        throw ArgumentError("denoise: latent channel mismatch");
    if (cond.tokens.shape().size() != 2 || cond.tokens.shape()[1] != cfg_.embed_width)
        throw ArgumentError("denoise: conditioning width mismatch");
    auto temb = time_embedding(t);
    auto h = nn::conv2d(z, conv_in_w_, conv_in_b_, 1, 1);
    h = run_res_block(rb1_, h, temb);
    h = run_attn_block(attn1_, h, nullptr);
    h = run_attn_block(xattn_, h, &cond.tokens);
    h = run_res_block(rb2_, h, temb);
    h = run_attn_block(attn2_, h, nullptr);
    h = nn::silu(nn::group_norm(h, gn_out_g_, gn_out_b_, cfg_.norm_groups));
    return nn::conv2d(h, conv_out_w_, conv_out_b_, 1, 1);
}

Conditioning TinyBackbone::embed_text(const std::string& caption) const {
    // Deterministic hash embedding: one pseudo-random row per token. No
    // external text model; identical captions give identical embeddings.
    std::istringstream iss(caption);
    std::string tok;
    std::vector<std::string> tokens;
    while (iss >> tok && tokens.size() < 16) {
        std::transform(tok.begin(), tok.end(), tok.begin(), ::tolower);
        tokens.push_back(tok);
    }
    if (tokens.empty()) return null_conditioning();
    std::vector<float> rows;
    rows.reserve(tokens.size() * cfg_.embed_width);
    for (const auto& w : tokens) {
        Rng rng(fnv1a64(w));
        for (int i = 0; i < cfg_.embed_width; ++i)
            rows.push_back(static_cast<float>(rng.normal() / std::sqrt(cfg_.embed_width)));
    }
    Conditioning c;
    c.tokens = nn::from_vec({static_cast<int>(tokens.size()), cfg_.embed_width}, std::move(rows));
    c.null_flag = false;
    return c;
}

Conditioning TinyBackbone::null_conditioning() const {
    Conditioning c;
    c.tokens = nn::from_vec({1, cfg_.embed_width}, std::vector<float>(cfg_.embed_width, 0.f));
    c.null_flag = true;
    return c;
}

std::vector<nn::Param> TinyBackbone::parameters() {
    std::vector<nn::Param> ps;
    auto base = [&](const char* name, const nn::Tensor& t) {
        ps.push_back({name, t, nn::ParamKind::base});
    };
    base("enc.w", enc_w_);
    base("enc.b", enc_b_);
    if (enc_w_slice_.defined()) ps.push_back({"enc.w_slice", enc_w_slice_, nn::ParamKind::slice});
    base("dec.w", dec_w_);
    base("dec.b", dec_b_);
    if (dec_w_row_.defined()) ps.push_back({"dec.w_row", dec_w_row_, nn::ParamKind::slice});
    if (dec_b_row_.defined()) ps.push_back({"dec.b_row", dec_b_row_, nn::ParamKind::slice});

    base("dn.conv_in.w", conv_in_w_);
    base("dn.conv_in.b", conv_in_b_);
    base("dn.temb.l1.w", temb_l1_w_);
    base("dn.temb.l1.b", temb_l1_b_);
    base("dn.temb.l2.w", temb_l2_w_);
    base("dn.temb.l2.b", temb_l2_b_);
    auto res_params = [&](const char* prefix, ResBlock& rb) {
        const std::string p = prefix;
        base((p + ".gn1.g").c_str(), rb.gn1_g);
        base((p + ".gn1.b").c_str(), rb.gn1_b);
        base((p + ".conv1.w").c_str(), rb.conv1_w);
        base((p + ".conv1.b").c_str(), rb.conv1_b);
        base((p + ".tproj.w").c_str(), rb.tproj_w);
        base((p + ".tproj.b").c_str(), rb.tproj_b);
        base((p + ".gn2.g").c_str(), rb.gn2_g);
        base((p + ".gn2.b").c_str(), rb.gn2_b);
        base((p + ".conv2.w").c_str(), rb.conv2_w);
        base((p + ".conv2.b").c_str(), rb.conv2_b);
    };
    res_params("dn.rb1", rb1_);
    res_params("dn.rb2", rb2_);
    auto attn_params = [&](const char* prefix, AttnBlock& ab) {
        const std::string p = prefix;
        base((p + ".gn.g").c_str(), ab.gn_g);
        base((p + ".gn.b").c_str(), ab.gn_b);
        for (auto& [suffix, lin] :
             std::vector<std::pair<std::string, LoraLinear*>>{
                 {"q", &ab.q}, {"k", &ab.k}, {"v", &ab.v}, {"o", &ab.o}}) {
            base((p + "." + suffix + ".w").c_str(), lin->weight);
            base((p + "." + suffix + ".b").c_str(), lin->bias);
            if (lin->has_adapter()) {
                ps.push_back({p + "." + suffix + ".lora_a", lin->lora_a, nn::ParamKind::adapter});
                ps.push_back({p + "." + suffix + ".lora_b", lin->lora_b, nn::ParamKind::adapter});
            }
        }
    };
    attn_params("dn.attn1", attn1_);
    attn_params("dn.xattn", xattn_);
    attn_params("dn.attn2", attn2_);
    base("dn.gn_out.g", gn_out_g_);
    base("dn.gn_out.b", gn_out_b_);
    base("dn.conv_out.w", conv_out_w_);
    base("dn.conv_out.b", conv_out_b_);
    return ps;
}

std::vector<std::pair<std::string, LoraLinear*>> TinyBackbone::lora_targets() {
    std::vector<std::pair<std::string, LoraLinear*>> out;
    auto add = [&](const std::string& prefix, AttnBlock& ab) {
        out.emplace_back(prefix + ".q", &ab.q);
        out.emplace_back(prefix + ".k", &ab.k);
        out.emplace_back(prefix + ".v", &ab.v);
        out.emplace_back(prefix + ".o", &ab.o);
    };
    add("dn.attn1", attn1_);
    add("dn.xattn", xattn_);
    add("dn.attn2", attn2_);
    return out;
}

ConvWeights TinyBackbone::encoder_input_conv() const {
    ConvWeights w;
    nn::NoGradGuard ng;
    auto k = effective_enc_kernel();
    w.out_ch = k.shape()[0];
    w.in_ch = k.shape()[1];
    w.kh = k.shape()[2];
    w.kw = k.shape()[3];
    w.kernel = k.data();
    w.bias = enc_b_.data();
    return w;
}

ConvWeights TinyBackbone::decoder_output_conv() const {
    ConvWeights w;
    nn::NoGradGuard ng;
    auto k = effective_dec_kernel();
    auto b = effective_dec_bias();
    w.out_ch = k.shape()[0];
    w.in_ch = k.shape()[1];
    w.kh = k.shape()[2];
    w.kw = k.shape()[3];
    w.kernel = k.data();
    w.bias = b.data();
    return w;
}

void TinyBackbone::apply_four_channel_surgery(InitPolicy input_policy, InitPolicy output_policy) {
    if (cfg_.pixel_channels != 3)
        throw ArgumentError("surgery: backbone is already four-channel");

    const ConvWeights enc = encoder_input_conv();
    const ConvWeights enc4 = inflate_input_conv(enc, 4, input_policy);
    // New input slice: channel 3 column of the inflated kernel.
    {
        const int lc = cfg_.latent_channels, f = cfg_.downsample;
        std::vector<float> slice(static_cast<size_t>(lc) * f * f);
        for (int o = 0; o < lc; ++o)
            for (int r = 0; r < f; ++r)
                for (int c = 0; c < f; ++c)
                    slice[(static_cast<size_t>(o) * f + r) * f + c] = enc4.at(o, 3, r, c);
        enc_w_slice_ = nn::leaf({lc, 1, f, f}, std::move(slice));
    }
    const ConvWeights dec = decoder_output_conv();
    const ConvWeights dec4 = inflate_output_conv(dec, 4, output_policy);
    {
        const int lc = cfg_.latent_channels;
        std::vector<float> row(static_cast<size_t>(lc) * 9);
        for (int i = 0; i < lc; ++i)
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    row[(static_cast<size_t>(i) * 3 + r) * 3 + c] = dec4.at(3, i, r, c);
        dec_w_row_ = nn::leaf({1, lc, 3, 3}, std::move(row));
        dec_b_row_ = nn::leaf({1}, {dec4.bias[3]});
    }
    cfg_.pixel_channels = 4;
}

std::shared_ptr<TinyBackbone> build_tiny_backbone(const TinyBackboneConfig& cfg) {
    return std::make_shared<TinyBackbone>(cfg);
}

}  // namespace lesiongen::backbone
