#include "lesiongen/core/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <unordered_set>

#include "lesiongen/core/error.hpp"

namespace lesiongen::nn {

namespace {

thread_local bool g_grad_enabled = true;

using MatMap = Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ArgumentError("tensor dimension must be nonnegative");
        n *= static_cast<size_t>(d);
    }
    return n;
}

std::shared_ptr<Node> make_node(std::vector<int> shape, std::vector<Tensor> parents) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.resize(shape_numel(n->shape));
    if (g_grad_enabled) {
        for (const auto& p : parents) {
            if (p.defined() && p.requires_grad()) {
                n->requires_grad = true;
                break;
            }
        }
        if (n->requires_grad) n->parents = std::move(parents);
    }
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ArgumentError(std::string(op) + ": shape mismatch");
}

float sigmoidf(float x) {
    return x >= 0.f ? 1.f / (1.f + std::exp(-x)) : std::exp(x) / (1.f + std::exp(x));
}

}  // namespace

void Node::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.f);
}

NoGradGuard::NoGradGuard() { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = true; }

bool grad_enabled() { return g_grad_enabled; }

Tensor constant(std::vector<int> shape, float fill) {
    auto n = make_node(std::move(shape), {});
    std::fill(n->value.begin(), n->value.end(), fill);
    return Tensor(n);
}

Tensor from_vec(std::vector<int> shape, std::vector<float> values, bool requires_grad) {
    size_t n = shape_numel(shape);
    if (values.size() != n) throw ArgumentError("from_vec: value count does not match shape");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor leaf(std::vector<int> shape, std::vector<float> values) {
    return from_vec(std::move(shape), std::move(values), true);
}

Tensor add(const Tensor& a, const Tensor& b) { return axpby(1.f, a, 1.f, b); }

Tensor axpby(float alpha, const Tensor& a, float beta, const Tensor& b) {
    check_same_shape(a, b, "axpby");
    auto n = make_node(a.shape(), {a, b});
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = alpha * av[i] + beta * bv[i];
    if (n->requires_grad) {
        n->backprop = [alpha, beta](Node& self) {
            auto& pa = *self.parents[0].node();
            auto& pb = *self.parents[1].node();
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += alpha * self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += beta * self.grad[i];
            }
        };
    }
    return Tensor(n);
}

Tensor scale(const Tensor& a, float alpha) {
    auto n = make_node(a.shape(), {a});
    const auto& av = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = alpha * av[i];
    if (n->requires_grad) {
        n->backprop = [alpha](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += alpha * self.grad[i];
        };
    }
    return Tensor(n);
}

Tensor add_scalar(const Tensor& a, float c) {
    auto n = make_node(a.shape(), {a});
    const auto& av = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] + c;
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
        };
    }
    return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto n = make_node(a.shape(), {a, b});
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] * bv[i];
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            auto& pa = *self.parents[0].node();
            auto& pb = *self.parents[1].node();
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    pa.grad[i] += pb.value[i] * self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    pb.grad[i] += pa.value[i] * self.grad[i];
            }
        };
    }
    return Tensor(n);
}

Tensor silu(const Tensor& a) {
    auto n = make_node(a.shape(), {a});
    const auto& av = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] * sigmoidf(av[i]);
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                float s = sigmoidf(pa.value[i]);
                pa.grad[i] += self.grad[i] * s * (1.f + pa.value[i] * (1.f - s));
            }
        };
    }
    return Tensor(n);
}

Tensor relu(const Tensor& a) {
    auto n = make_node(a.shape(), {a});
    const auto& av = a.data();
    for (size_t i = 0; i < n->value.size(); ++i) n->value[i] = av[i] > 0.f ? av[i] : 0.f;
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                if (pa.value[i] > 0.f) pa.grad[i] += self.grad[i];
        };
    }
    return Tensor(n);
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
    if (shape_numel(shape) != a.numel()) throw ArgumentError("reshape: element count mismatch");
    auto n = make_node(std::move(shape), {a});
    n->value = a.data();
    if (n->requires_grad) {
        n->backprop = [](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
        };
    }
    return Tensor(n);
}

// im2col with channel-major patch rows: k = (ci*kh + r)*kw + c. Inflated input
// channels therefore occupy trailing rows and contribute exact +0 terms when
// zero-initialized, which the surgery equivalence tests rely on.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.size() != 3 || ws.size() != 4) throw ArgumentError("conv2d: expects CHW input, OIHW weights");
    const int ci = xs[0], h = xs[1], wdt = xs[2];
    const int co = ws[0], kh = ws[2], kw = ws[3];
    if (ws[1] != ci) throw ArgumentError("conv2d: input channel mismatch");
    if (stride < 1) throw ArgumentError("conv2d: stride must be >= 1");
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (wdt + 2 * pad - kw) / stride + 1;
    if (ho <= 0 || wo <= 0) throw ArgumentError("conv2d: empty output");

    const int K = ci * kh * kw;
    const int L = ho * wo;

    std::vector<float> patches(static_cast<size_t>(K) * L, 0.f);
    const auto& xv = x.data();
    for (int c = 0; c < ci; ++c)
        for (int r = 0; r < kh; ++r)
            for (int s = 0; s < kw; ++s) {
                const int krow = (c * kh + r) * kw + s;
                float* dst = patches.data() + static_cast<size_t>(krow) * L;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + r;
                    if (iy < 0 || iy >= h) continue;
                    const float* src = xv.data() + (static_cast<size_t>(c) * h + iy) * wdt;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + s;
                        if (ix >= 0 && ix < wdt) dst[oy * wo + ox] = src[ix];
                    }
                }
            }

    auto n = make_node({co, ho, wo}, {x, w, b});
    {
        ConstMatMap W(w.data().data(), co, K);
        ConstMatMap P(patches.data(), K, L);
        MatMap Y(n->value.data(), co, L);
        Y.noalias() = W * P;
        const auto& bv = b.data();
        for (int o = 0; o < co; ++o)
            for (int l = 0; l < L; ++l) n->value[static_cast<size_t>(o) * L + l] += bv[o];
    }

    if (n->requires_grad) {
        n->saved = std::move(patches);
        n->backprop = [stride, pad, ci, h, wdt, co, kh, kw, ho, wo, K, L](Node& self) {
            auto& px = *self.parents[0].node();
            auto& pw = *self.parents[1].node();
            auto& pb = *self.parents[2].node();
            ConstMatMap dY(self.grad.data(), co, L);
            if (pw.requires_grad) {
                pw.ensure_grad();
                ConstMatMap P(self.saved.data(), K, L);
                MatMap dW(pw.grad.data(), co, K);
                dW.noalias() += dY * P.transpose();
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int o = 0; o < co; ++o) {
                    float s = 0.f;
                    for (int l = 0; l < L; ++l) s += self.grad[static_cast<size_t>(o) * L + l];
                    pb.grad[o] += s;
                }
            }
            if (px.requires_grad) {
                px.ensure_grad();
                std::vector<float> dP(static_cast<size_t>(K) * L);
                {
                    ConstMatMap W(pw.value.data(), co, K);
                    MatMap m(dP.data(), K, L);
                    m.noalias() = W.transpose() * dY;
                }
                for (int c = 0; c < ci; ++c)
                    for (int r = 0; r < kh; ++r)
                        for (int s = 0; s < kw; ++s) {
                            const int krow = (c * kh + r) * kw + s;
                            const float* src = dP.data() + static_cast<size_t>(krow) * L;
                            for (int oy = 0; oy < ho; ++oy) {
                                const int iy = oy * stride - pad + r;
                                if (iy < 0 || iy >= h) continue;
                                float* dst = px.grad.data() + (static_cast<size_t>(c) * h + iy) * wdt;
                                for (int ox = 0; ox < wo; ++ox) {
                                    const int ix = ox * stride - pad + s;
                                    if (ix >= 0 && ix < wdt) dst[ix] += src[oy * wo + ox];
                                }
                            }
                        }
            }
        };
    }
    return Tensor(n);
}

Tensor upsample_nearest(const Tensor& x, int factor) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw ArgumentError("upsample_nearest: expects CHW");
    if (factor < 1) throw ArgumentError("upsample_nearest: factor must be >= 1");
    const int c = xs[0], h = xs[1], w = xs[2];
    auto n = make_node({c, h * factor, w * factor}, {x});
    const auto& xv = x.data();
    const int ho = h * factor, wo = w * factor;
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < ho; ++i)
            for (int j = 0; j < wo; ++j)
                n->value[(static_cast<size_t>(ch) * ho + i) * wo + j] =
                    xv[(static_cast<size_t>(ch) * h + i / factor) * w + j / factor];
    if (n->requires_grad) {
        n->backprop = [factor, c, h, w](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            const int ho = h * factor, wo = w * factor;
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < ho; ++i)
                    for (int j = 0; j < wo; ++j)
                        pa.grad[(static_cast<size_t>(ch) * h + i / factor) * w + j / factor] +=
                            self.grad[(static_cast<size_t>(ch) * ho + i) * wo + j];
        };
    }
    return Tensor(n);
}

Tensor avg_pool(const Tensor& x, int factor) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw ArgumentError("avg_pool: expects CHW");
    const int c = xs[0], h = xs[1], w = xs[2];
    if (factor < 1 || h % factor != 0 || w % factor != 0)
        throw ArgumentError("avg_pool: size not divisible by factor");
    const int ho = h / factor, wo = w / factor;
    const float inv = 1.f / static_cast<float>(factor * factor);
    auto n = make_node({c, ho, wo}, {x});
    const auto& xv = x.data();
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < ho; ++i)
            for (int j = 0; j < wo; ++j) {
                float s = 0.f;
                for (int di = 0; di < factor; ++di)
                    for (int dj = 0; dj < factor; ++dj)
                        s += xv[(static_cast<size_t>(ch) * h + i * factor + di) * w + j * factor + dj];
                n->value[(static_cast<size_t>(ch) * ho + i) * wo + j] = s * inv;
            }
    if (n->requires_grad) {
        n->backprop = [factor, c, h, w, ho, wo, inv](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < ho; ++i)
                    for (int j = 0; j < wo; ++j) {
                        const float g = self.grad[(static_cast<size_t>(ch) * ho + i) * wo + j] * inv;
                        for (int di = 0; di < factor; ++di)
                            for (int dj = 0; dj < factor; ++dj)
                                pa.grad[(static_cast<size_t>(ch) * h + i * factor + di) * w +
                                        j * factor + dj] += g;
                    }
        };
    }
    return Tensor(n);
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups, float eps) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw ArgumentError("group_norm: expects CHW");
    const int c = xs[0], h = xs[1], w = xs[2];
    if (groups < 1 || c % groups != 0) throw ArgumentError("group_norm: channels not divisible by groups");
    if (gamma.shape() != std::vector<int>{c} || beta.shape() != std::vector<int>{c})
        throw ArgumentError("group_norm: affine parameter shape mismatch");
    const int cpg = c / groups;
    const size_t m = static_cast<size_t>(cpg) * h * w;

    auto n = make_node({c, h, w}, {x, gamma, beta});
    std::vector<float> xhat(x.numel());
    std::vector<float> inv_std(groups);
    const auto& xv = x.data();
    const auto& gv = gamma.data();
    const auto& bv = beta.data();
    for (int g = 0; g < groups; ++g) {
        const size_t base = static_cast<size_t>(g) * m;
        double mean = 0.0;
        for (size_t i = 0; i < m; ++i) mean += xv[base + i];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (size_t i = 0; i < m; ++i) {
            double d = xv[base + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(m);
        const float istd = static_cast<float>(1.0 / std::sqrt(var + eps));
        inv_std[g] = istd;
        for (size_t i = 0; i < m; ++i)
            xhat[base + i] = (xv[base + i] - static_cast<float>(mean)) * istd;
    }
    const size_t hw = static_cast<size_t>(h) * w;
    for (int ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < hw; ++i)
            n->value[ch * hw + i] = gv[ch] * xhat[ch * hw + i] + bv[ch];

    if (n->requires_grad) {
        n->saved = std::move(xhat);
        n->saved.insert(n->saved.end(), inv_std.begin(), inv_std.end());
        n->backprop = [c, h, w, groups, cpg, m](Node& self) {
            auto& px = *self.parents[0].node();
            auto& pg = *self.parents[1].node();
            auto& pb = *self.parents[2].node();
            const size_t hw = static_cast<size_t>(h) * w;
            const float* xhat = self.saved.data();
            const float* inv_std = self.saved.data() + self.value.size();
            if (pg.requires_grad) {
                pg.ensure_grad();
                for (int ch = 0; ch < c; ++ch) {
                    float s = 0.f;
                    for (size_t i = 0; i < hw; ++i) s += self.grad[ch * hw + i] * xhat[ch * hw + i];
                    pg.grad[ch] += s;
                }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int ch = 0; ch < c; ++ch) {
                    float s = 0.f;
                    for (size_t i = 0; i < hw; ++i) s += self.grad[ch * hw + i];
                    pb.grad[ch] += s;
                }
            }
            if (px.requires_grad) {
                px.ensure_grad();
                for (int g = 0; g < groups; ++g) {
                    const size_t base = static_cast<size_t>(g) * m;
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (int cc = 0; cc < cpg; ++cc) {
                        const int ch = g * cpg + cc;
                        const float gm = pg.value[ch];
                        for (size_t i = 0; i < hw; ++i) {
                            const size_t idx = ch * hw + i;
                            const double dxh = static_cast<double>(self.grad[idx]) * gm;
                            sum_dxhat += dxh;
                            sum_dxhat_xhat += dxh * xhat[idx];
                        }
                    }
                    const double inv_m = 1.0 / static_cast<double>(m);
                    for (int cc = 0; cc < cpg; ++cc) {
                        const int ch = g * cpg + cc;
                        const float gm = pg.value[ch];
                        for (size_t i = 0; i < hw; ++i) {
                            const size_t idx = ch * hw + i;
                            const double dxh = static_cast<double>(self.grad[idx]) * gm;
                            px.grad[idx] += static_cast<float>(
                                inv_std[g] * (dxh - inv_m * sum_dxhat -
                                              xhat[idx] * inv_m * sum_dxhat_xhat));
                        }
                    }
                    (void)base;
                }
            }
        };
    }
    return Tensor(n);
}

Tensor slice_channels(const Tensor& x, int c0, int c1) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw ArgumentError("slice_channels: expects CHW");
    if (c0 < 0 || c1 > xs[0] || c0 >= c1) throw ArgumentError("slice_channels: bad channel range");
    const int h = xs[1], w = xs[2];
    const size_t hw = static_cast<size_t>(h) * w;
    auto n = make_node({c1 - c0, h, w}, {x});
    std::copy(x.data().begin() + c0 * hw, x.data().begin() + c1 * hw, n->value.begin());
    if (n->requires_grad) {
        n->backprop = [c0, hw](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[c0 * hw + i] += self.grad[i];
        };
    }
    return Tensor(n);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 3 || bs.size() != 3 || as[1] != bs[1] || as[2] != bs[2])
        throw ArgumentError("concat_channels: spatial shape mismatch");
    auto n = make_node({as[0] + bs[0], as[1], as[2]}, {a, b});
    std::copy(a.data().begin(), a.data().end(), n->value.begin());
    std::copy(b.data().begin(), b.data().end(), n->value.begin() + a.numel());
    if (n->requires_grad) {
        const size_t na = a.numel();
        n->backprop = [na](Node& self) {
            auto& pa = *self.parents[0].node();
            auto& pb = *self.parents[1].node();
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < na; ++i) pa.grad[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = na; i < self.grad.size(); ++i) pb.grad[i - na] += self.grad[i];
            }
        };
    }
    return Tensor(n);
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    const auto& xs = x.shape();
    if (xs.size() != 3 || bias.shape() != std::vector<int>{xs[0]})
        throw ArgumentError("add_channel_bias: shape mismatch");
    const size_t hw = static_cast<size_t>(xs[1]) * xs[2];
    auto n = make_node(xs, {x, bias});
    const auto& xv = x.data();
    const auto& bv = bias.data();
    for (int c = 0; c < xs[0]; ++c)
        for (size_t i = 0; i < hw; ++i) n->value[c * hw + i] = xv[c * hw + i] + bv[c];
    if (n->requires_grad) {
        const int c = xs[0];
        n->backprop = [c, hw](Node& self) {
            auto& px = *self.parents[0].node();
            auto& pb = *self.parents[1].node();
            if (px.requires_grad) {
                px.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int ch = 0; ch < c; ++ch) {
                    float s = 0.f;
                    for (size_t i = 0; i < hw; ++i) s += self.grad[ch * hw + i];
                    pb.grad[ch] += s;
                }
            }
        };
    }
    return Tensor(n);
}

Tensor chw_to_tokens(const Tensor& x) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw ArgumentError("chw_to_tokens: expects CHW");
    const int c = xs[0];
    const size_t hw = static_cast<size_t>(xs[1]) * xs[2];
    auto n = make_node({static_cast<int>(hw), c}, {x});
    const auto& xv = x.data();
    for (size_t t = 0; t < hw; ++t)
        for (int ch = 0; ch < c; ++ch) n->value[t * c + ch] = xv[ch * hw + t];
    if (n->requires_grad) {
        n->backprop = [c, hw](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (size_t t = 0; t < hw; ++t)
                for (int ch = 0; ch < c; ++ch) pa.grad[ch * hw + t] += self.grad[t * c + ch];
        };
    }
    return Tensor(n);
}

Tensor tokens_to_chw(const Tensor& t, int h, int w) {
    const auto& ts = t.shape();
    if (ts.size() != 2 || ts[0] != h * w) throw ArgumentError("tokens_to_chw: token count mismatch");
    const int c = ts[1];
    const size_t hw = static_cast<size_t>(h) * w;
    auto n = make_node({c, h, w}, {t});
    const auto& tv = t.data();
    for (size_t i = 0; i < hw; ++i)
        for (int ch = 0; ch < c; ++ch) n->value[ch * hw + i] = tv[i * c + ch];
    if (n->requires_grad) {
        n->backprop = [c, hw](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (size_t i = 0; i < hw; ++i)
                for (int ch = 0; ch < c; ++ch) pa.grad[i * c + ch] += self.grad[ch * hw + i];
        };
    }
    return Tensor(n);
}

Tensor global_avg_pool(const Tensor& x) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw ArgumentError("global_avg_pool: expects CHW");
    const size_t hw = static_cast<size_t>(xs[1]) * xs[2];
    const float inv = 1.f / static_cast<float>(hw);
    auto n = make_node({xs[0]}, {x});
    const auto& xv = x.data();
    for (int c = 0; c < xs[0]; ++c) {
        float s = 0.f;
        for (size_t i = 0; i < hw; ++i) s += xv[c * hw + i];
        n->value[c] = s * inv;
    }
    if (n->requires_grad) {
        n->backprop = [hw, inv](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (size_t c = 0; c < self.value.size(); ++c)
                for (size_t i = 0; i < hw; ++i) pa.grad[c * hw + i] += self.grad[c] * inv;
        };
    }
    return Tensor(n);
}

Tensor concat_conv_in(const Tensor& a, const Tensor& b, int co, int ci_a, int ci_b, int kh, int kw) {
    if (a.numel() != static_cast<size_t>(co) * ci_a * kh * kw ||
        b.numel() != static_cast<size_t>(co) * ci_b * kh * kw)
        throw ArgumentError("concat_conv_in: size mismatch");
    const size_t khw = static_cast<size_t>(kh) * kw;
    auto n = make_node({co, ci_a + ci_b, kh, kw}, {a, b});
    const auto& av = a.data();
    const auto& bv = b.data();
    for (int o = 0; o < co; ++o) {
        std::copy(av.begin() + o * ci_a * khw, av.begin() + (o + 1) * ci_a * khw,
                  n->value.begin() + (static_cast<size_t>(o) * (ci_a + ci_b)) * khw);
        std::copy(bv.begin() + o * ci_b * khw, bv.begin() + (o + 1) * ci_b * khw,
                  n->value.begin() + (static_cast<size_t>(o) * (ci_a + ci_b) + ci_a) * khw);
    }
    if (n->requires_grad) {
        n->backprop = [co, ci_a, ci_b, khw](Node& self) {
            auto& pa = *self.parents[0].node();
            auto& pb = *self.parents[1].node();
            for (int o = 0; o < co; ++o) {
                const size_t base = static_cast<size_t>(o) * (ci_a + ci_b) * khw;
                if (pa.requires_grad) {
                    pa.ensure_grad();
                    for (size_t i = 0; i < ci_a * khw; ++i)
                        pa.grad[o * ci_a * khw + i] += self.grad[base + i];
                }
                if (pb.requires_grad) {
                    pb.ensure_grad();
                    for (size_t i = 0; i < ci_b * khw; ++i)
                        pb.grad[o * ci_b * khw + i] += self.grad[base + ci_a * khw + i];
                }
            }
        };
    }
    return Tensor(n);
}

Tensor concat_axis0(const Tensor& a, const Tensor& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != bs.size()) throw ArgumentError("concat_axis0: rank mismatch");
    for (size_t i = 1; i < as.size(); ++i)
        if (as[i] != bs[i]) throw ArgumentError("concat_axis0: trailing dims mismatch");
    std::vector<int> shape = as;
    shape[0] += bs[0];
    auto n = make_node(std::move(shape), {a, b});
    std::copy(a.data().begin(), a.data().end(), n->value.begin());
    std::copy(b.data().begin(), b.data().end(), n->value.begin() + a.numel());
    if (n->requires_grad) {
        const size_t na = a.numel();
        n->backprop = [na](Node& self) {
            auto& pa = *self.parents[0].node();
            auto& pb = *self.parents[1].node();
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < na; ++i) pa.grad[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = na; i < self.grad.size(); ++i) pb.grad[i - na] += self.grad[i];
            }
        };
    }
    return Tensor(n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0])
        throw ArgumentError("matmul: inner dimension mismatch");
    const int m = as[0], k = as[1], p = bs[1];
    auto n = make_node({m, p}, {a, b});
    {
        ConstMatMap A(a.data().data(), m, k);
        ConstMatMap B(b.data().data(), k, p);
        MatMap C(n->value.data(), m, p);
        C.noalias() = A * B;
    }
    if (n->requires_grad) {
        n->backprop = [m, k, p](Node& self) {
            auto& pa = *self.parents[0].node();
            auto& pb = *self.parents[1].node();
            ConstMatMap dC(self.grad.data(), m, p);
            if (pa.requires_grad) {
                pa.ensure_grad();
                ConstMatMap B(pb.value.data(), k, p);
                MatMap dA(pa.grad.data(), m, k);
                dA.noalias() += dC * B.transpose();
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                ConstMatMap A(pa.value.data(), m, k);
                MatMap dB(pb.grad.data(), k, p);
                dB.noalias() += A.transpose() * dC;
            }
        };
    }
    return Tensor(n);
}

Tensor transpose(const Tensor& a) {
    const auto& as = a.shape();
    if (as.size() != 2) throw ArgumentError("transpose: expects 2-D");
    const int m = as[0], k = as[1];
    auto n = make_node({k, m}, {a});
    const auto& av = a.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) n->value[static_cast<size_t>(j) * m + i] = av[static_cast<size_t>(i) * k + j];
    if (n->requires_grad) {
        n->backprop = [m, k](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < k; ++j)
                    pa.grad[static_cast<size_t>(i) * k + j] += self.grad[static_cast<size_t>(j) * m + i];
        };
    }
    return Tensor(n);
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    const auto& xs = x.shape();
    if (xs.size() != 2 || bias.shape() != std::vector<int>{xs[1]})
        throw ArgumentError("add_row_bias: shape mismatch");
    const int m = xs[0], k = xs[1];
    auto n = make_node(xs, {x, bias});
    const auto& xv = x.data();
    const auto& bv = bias.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
            n->value[static_cast<size_t>(i) * k + j] = xv[static_cast<size_t>(i) * k + j] + bv[j];
    if (n->requires_grad) {
        n->backprop = [m, k](Node& self) {
            auto& px = *self.parents[0].node();
            auto& pb = *self.parents[1].node();
            if (px.requires_grad) {
                px.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int j = 0; j < k; ++j) {
                    float s = 0.f;
                    for (int i = 0; i < m; ++i) s += self.grad[static_cast<size_t>(i) * k + j];
                    pb.grad[j] += s;
                }
            }
        };
    }
    return Tensor(n);
}

Tensor softmax_rows(const Tensor& x) {
    const auto& xs = x.shape();
    if (xs.size() != 2) throw ArgumentError("softmax_rows: expects 2-D");
    const int m = xs[0], k = xs[1];
    auto n = make_node(xs, {x});
    const auto& xv = x.data();
    for (int i = 0; i < m; ++i) {
        const float* row = xv.data() + static_cast<size_t>(i) * k;
        float* out = n->value.data() + static_cast<size_t>(i) * k;
        float mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        float sum = 0.f;
        for (int j = 0; j < k; ++j) {
            out[j] = std::exp(row[j] - mx);
            sum += out[j];
        }
        const float inv = 1.f / sum;
        for (int j = 0; j < k; ++j) out[j] *= inv;
    }
    if (n->requires_grad) {
        n->backprop = [m, k](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            for (int i = 0; i < m; ++i) {
                const float* y = self.value.data() + static_cast<size_t>(i) * k;
                const float* dy = self.grad.data() + static_cast<size_t>(i) * k;
                float dot = 0.f;
                for (int j = 0; j < k; ++j) dot += y[j] * dy[j];
                float* dx = pa.grad.data() + static_cast<size_t>(i) * k;
                for (int j = 0; j < k; ++j) dx[j] += y[j] * (dy[j] - dot);
            }
        };
    }
    return Tensor(n);
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    check_same_shape(pred, target, "mse_loss");
    auto n = make_node({1}, {pred, target});
    const auto& pv = pred.data();
    const auto& tv = target.data();
    double acc = 0.0;
    for (size_t i = 0; i < pv.size(); ++i) {
        const double d = static_cast<double>(pv[i]) - tv[i];
        acc += d * d;
    }
    const double inv_n = 1.0 / static_cast<double>(pv.size());
    n->value[0] = static_cast<float>(acc * inv_n);
    if (n->requires_grad) {
        n->backprop = [inv_n](Node& self) {
            auto& pp = *self.parents[0].node();
            auto& pt = *self.parents[1].node();
            const float g = self.grad[0];
            if (pp.requires_grad) {
                pp.ensure_grad();
                for (size_t i = 0; i < pp.value.size(); ++i)
                    pp.grad[i] += static_cast<float>(2.0 * inv_n * (pp.value[i] - pt.value[i])) * g;
            }
            if (pt.requires_grad) {
                pt.ensure_grad();
                for (size_t i = 0; i < pt.value.size(); ++i)
                    pt.grad[i] -= static_cast<float>(2.0 * inv_n * (pp.value[i] - pt.value[i])) * g;
            }
        };
    }
    return Tensor(n);
}

Tensor bce_with_logits_loss(const Tensor& logits, const Tensor& targets01) {
    check_same_shape(logits, targets01, "bce_with_logits_loss");
    auto n = make_node({1}, {logits, targets01});
    const auto& xv = logits.data();
    const auto& yv = targets01.data();
    double acc = 0.0;
    for (size_t i = 0; i < xv.size(); ++i) {
        const double x = xv[i], y = yv[i];
        acc += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
    const double inv_n = 1.0 / static_cast<double>(xv.size());
    n->value[0] = static_cast<float>(acc * inv_n);
    if (n->requires_grad) {
        n->backprop = [inv_n](Node& self) {
            auto& px = *self.parents[0].node();
            if (!px.requires_grad) return;
            px.ensure_grad();
            auto& pt = *self.parents[1].node();
            const float g = self.grad[0];
            for (size_t i = 0; i < px.value.size(); ++i)
                px.grad[i] += static_cast<float>(inv_n * (sigmoidf(px.value[i]) - pt.value[i])) * g;
        };
    }
    return Tensor(n);
}

Tensor soft_dice_loss(const Tensor& logits, const Tensor& targets01, float smooth) {
    check_same_shape(logits, targets01, "soft_dice_loss");
    if (smooth <= 0.f) throw ArgumentError("soft_dice_loss: smoothing must be > 0");
    auto n = make_node({1}, {logits, targets01});
    const auto& xv = logits.data();
    const auto& yv = targets01.data();
    double s_yp = 0.0, s_y = 0.0, s_p = 0.0;
    std::vector<float> probs(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) {
        probs[i] = sigmoidf(xv[i]);
        s_yp += static_cast<double>(yv[i]) * probs[i];
        s_y += yv[i];
        s_p += probs[i];
    }
    const double denom = s_y + s_p + smooth;
    n->value[0] = static_cast<float>(1.0 - (2.0 * s_yp + smooth) / denom);
    if (n->requires_grad) {
        n->saved = std::move(probs);
        n->backprop = [s_yp, denom, smooth](Node& self) {
            auto& px = *self.parents[0].node();
            if (!px.requires_grad) return;
            px.ensure_grad();
            auto& pt = *self.parents[1].node();
            const float g = self.grad[0];
            const double num = 2.0 * s_yp + smooth;
            for (size_t i = 0; i < px.value.size(); ++i) {
                const double p = self.saved[i];
                const double dL_dp = -(2.0 * pt.value[i] * denom - num) / (denom * denom);
                px.grad[i] += static_cast<float>(dL_dp * p * (1.0 - p)) * g;
            }
        };
    }
    return Tensor(n);
}

Tensor softmax_cross_entropy(const Tensor& logits, int label) {
    const auto& xs = logits.shape();
    if (xs.size() != 1) throw ArgumentError("softmax_cross_entropy: expects 1-D logits");
    if (label < 0 || label >= xs[0]) throw ArgumentError("softmax_cross_entropy: label out of range");
    auto n = make_node({1}, {logits});
    const auto& xv = logits.data();
    float mx = xv[0];
    for (int j = 1; j < xs[0]; ++j) mx = std::max(mx, xv[j]);
    double lse = 0.0;
    for (int j = 0; j < xs[0]; ++j) lse += std::exp(static_cast<double>(xv[j]) - mx);
    lse = std::log(lse) + mx;
    n->value[0] = static_cast<float>(lse - xv[label]);
    if (n->requires_grad) {
        n->backprop = [label, lse](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            const float g = self.grad[0];
            for (size_t j = 0; j < pa.value.size(); ++j) {
                float p = static_cast<float>(std::exp(static_cast<double>(pa.value[j]) - lse));
                pa.grad[j] += (p - (static_cast<int>(j) == label ? 1.f : 0.f)) * g;
            }
        };
    }
    return Tensor(n);
}

Tensor mean_all(const Tensor& x) {
    auto n = make_node({1}, {x});
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    const double inv_n = 1.0 / static_cast<double>(x.numel());
    n->value[0] = static_cast<float>(acc * inv_n);
    if (n->requires_grad) {
        n->backprop = [inv_n](Node& self) {
            auto& pa = *self.parents[0].node();
            if (!pa.requires_grad) return;
            pa.ensure_grad();
            const float g = static_cast<float>(inv_n) * self.grad[0];
            for (size_t i = 0; i < pa.value.size(); ++i) pa.grad[i] += g;
        };
    }
    return Tensor(n);
}

void backward(const Tensor& root) {
    if (!root.defined() || root.numel() != 1)
        throw ArgumentError("backward: root must be a defined scalar");
    if (!root.requires_grad()) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.node(), 0);
    seen.insert(root.node());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].node();
            ++idx;
            if (p && p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->ensure_grad();
    root.node()->grad[0] = 1.f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        node->ensure_grad();
        if (node->backprop) node->backprop(*node);
    }
}

}  // namespace lesiongen::nn
