#include "texpro/tensor/ops.hpp"

#include <cmath>
#include <stdexcept>

#include "texpro/core/parallel.hpp"

namespace texpro::tc {

namespace {

void check_finite(const Tensor& t, const char* op) {
    for (real v : t.data())
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(op) + ": non-finite input value");
}

Tape* resolve_tape(const std::vector<Tensor>& inputs, const char* op) {
    Tape* tape = nullptr;
    for (const auto& t : inputs) {
        if (!t.tape()) continue;
        if (tape && tape != t.tape())
            throw std::invalid_argument(std::string(op) + ": inputs recorded on different tapes");
        tape = t.tape();
    }
    return tape;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

enum class BinKind { add, sub, mul, div, pow };

Tensor binary_op(const char* name, BinKind kind, const Tensor& a, const Tensor& b) {
    const bool as = a.numel() == 1, bs = b.numel() == 1;
    if (!as && !bs && a.shape() != b.shape())
        throw std::invalid_argument(std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    std::vector<int> out_shape = as ? b.shape() : a.shape();

    auto fwd = [kind](const TapeNode& n) {
        const auto& av = n.in[0]->data;
        const auto& bv = n.in[1]->data;
        auto& ov = n.out->data;
        const bool asc = av.size() == 1, bsc = bv.size() == 1;
        const int64_t cnt = static_cast<int64_t>(ov.size());
        for (int64_t i = 0; i < cnt; ++i) {
            double x = av[asc ? 0 : i], y = bv[bsc ? 0 : i];
            double r = 0.0;
            switch (kind) {
                case BinKind::add: r = x + y; break;
                case BinKind::sub: r = x - y; break;
                case BinKind::mul: r = x * y; break;
                case BinKind::div: r = x / y; break;
                case BinKind::pow: r = std::pow(x, y); break;
            }
            ov[i] = static_cast<real>(r);
        }
    };
    auto bwd = [kind](const TapeNode& n) {
        auto& ai = *n.in[0];
        auto& bi = *n.in[1];
        const auto& g = n.out->grad;
        const auto& ov = n.out->data;
        const bool asc = ai.data.size() == 1, bsc = bi.data.size() == 1;
        double acc_a = 0.0, acc_b = 0.0;
        if (ai.requires_grad) ai.ensure_grad();
        if (bi.requires_grad) bi.ensure_grad();
        const int64_t cnt = static_cast<int64_t>(ov.size());
        for (int64_t i = 0; i < cnt; ++i) {
            double x = ai.data[asc ? 0 : i], y = bi.data[bsc ? 0 : i];
            double gi = g[i];
            double da = 0.0, db = 0.0;
            switch (kind) {
                case BinKind::add: da = gi; db = gi; break;
                case BinKind::sub: da = gi; db = -gi; break;
                case BinKind::mul: da = gi * y; db = gi * x; break;
                case BinKind::div:
                    da = gi / y;
                    db = -gi * x / (y * y);
                    break;
                case BinKind::pow:
                    da = (std::abs(x) < 1e-12 && y < 1.0) ? 0.0 : gi * y * std::pow(x, y - 1.0);
                    db = (x > 1e-12) ? gi * ov[i] * std::log(x) : 0.0;
                    break;
            }
            if (ai.requires_grad) {
                if (asc) acc_a += da;
                else ai.grad[i] += static_cast<real>(da);
            }
            if (bi.requires_grad) {
                if (bsc) acc_b += db;
                else bi.grad[i] += static_cast<real>(db);
            }
        }
        if (ai.requires_grad && asc) ai.grad[0] += static_cast<real>(acc_a);
        if (bi.requires_grad && bsc) bi.grad[0] += static_cast<real>(acc_b);
    };
    return custom_op(name, {a, b}, std::move(out_shape), fwd, bwd);
}

void image3_check(const Tensor& t, const char* op) {
    if (t.shape().size() != 3)
        throw std::invalid_argument(std::string(op) + ": expected {C,H,W} tensor, got " +
                                    shape_str(t.shape()));
}

}  // namespace

Tensor custom_op(const char* name, std::vector<Tensor> inputs, std::vector<int> out_shape,
                 std::function<void(const TapeNode&)> fwd,
                 std::function<void(const TapeNode&)> bwd) {
    bool any_grad = false;
    for (const auto& t : inputs) {
        check_finite(t, name);
        any_grad = any_grad || t.requires_grad();
    }
    Tape* tape = resolve_tape(inputs, name);

    auto out = std::make_shared<TensorImpl>();
    out->shape = std::move(out_shape);
    out->data.assign(static_cast<size_t>(out->numel()), 0.0f);

    TapeNode node;
    node.op = name;
    node.in.reserve(inputs.size());
    for (const auto& t : inputs) node.in.push_back(t.impl());
    node.out = out;
    node.fwd = std::move(fwd);
    node.bwd = std::move(bwd);
    node.fwd(node);

    if (tape && any_grad) {
        out->requires_grad = true;
        out->tape = tape;
        tape->push(std::move(node));
    }
    return Tensor(out);
}

Tensor add(const Tensor& a, const Tensor& b) { return binary_op("add", BinKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op("sub", BinKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op("mul", BinKind::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op("div", BinKind::div, a, b); }
Tensor pow(const Tensor& a, const Tensor& b) { return binary_op("pow", BinKind::pow, a, b); }

double squash(double u, double lo, double hi) { return lo + (hi - lo) * stable_sigmoid(u); }

double unsquash(double v, double lo, double hi) {
    double t = (v - lo) / (hi - lo);
    const double eps = 1e-9;
    t = std::min(std::max(t, eps), 1.0 - eps);
    return std::log(t / (1.0 - t));
}

Tensor clamp_smooth(const Tensor& x, double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("clamp_smooth: requires hi > lo");
    auto fwd = [lo, hi](const TapeNode& n) {
        const auto& xv = n.in[0]->data;
        auto& ov = n.out->data;
        for (size_t i = 0; i < xv.size(); ++i)
            ov[i] = static_cast<real>(squash(xv[i], lo, hi));
    };
    auto bwd = [lo, hi](const TapeNode& n) {
        auto& xi = *n.in[0];
        if (!xi.requires_grad) return;
        xi.ensure_grad();
        const auto& g = n.out->grad;
        const auto& ov = n.out->data;
        for (size_t i = 0; i < ov.size(); ++i) {
            double s = (ov[i] - lo) / (hi - lo);
            xi.grad[i] += static_cast<real>(g[i] * (hi - lo) * s * (1.0 - s));
        }
    };
    return custom_op("clamp_smooth", {x}, x.shape(), fwd, bwd);
}

Tensor exp(const Tensor& x) {
    auto fwd = [](const TapeNode& n) {
        const auto& xv = n.in[0]->data;
        auto& ov = n.out->data;
        for (size_t i = 0; i < xv.size(); ++i) ov[i] = std::exp(xv[i]);
    };
    auto bwd = [](const TapeNode& n) {
        auto& xi = *n.in[0];
        if (!xi.requires_grad) return;
        xi.ensure_grad();
        for (size_t i = 0; i < n.out->data.size(); ++i)
            xi.grad[i] += n.out->grad[i] * n.out->data[i];
    };
    return custom_op("exp", {x}, x.shape(), fwd, bwd);
}

Tensor log(const Tensor& x) {
    for (real v : x.data())
        if (v <= 0.0f) throw std::invalid_argument("log: non-positive input");
    auto fwd = [](const TapeNode& n) {
        const auto& xv = n.in[0]->data;
        auto& ov = n.out->data;
        for (size_t i = 0; i < xv.size(); ++i) ov[i] = std::log(xv[i]);
    };
    auto bwd = [](const TapeNode& n) {
        auto& xi = *n.in[0];
        if (!xi.requires_grad) return;
        xi.ensure_grad();
        for (size_t i = 0; i < n.out->data.size(); ++i)
            xi.grad[i] += n.out->grad[i] / xi.data[i];
    };
    return custom_op("log", {x}, x.shape(), fwd, bwd);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    auto fwd = [m, k, n](const TapeNode& nd) {
        const auto& av = nd.in[0]->data;
        const auto& bv = nd.in[1]->data;
        auto& ov = nd.out->data;
        par::parallel_for(m, [&](int64_t i) {
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int p = 0; p < k; ++p) acc += double(av[i * k + p]) * double(bv[p * n + j]);
                ov[i * n + j] = static_cast<real>(acc);
            }
        });
    };
    auto bwd = [m, k, n](const TapeNode& nd) {
        auto& ai = *nd.in[0];
        auto& bi = *nd.in[1];
        const auto& g = nd.out->grad;
        if (ai.requires_grad) {
            ai.ensure_grad();
            par::parallel_for(int64_t(m) * k, [&](int64_t idx) {
                int i = static_cast<int>(idx / k), p = static_cast<int>(idx % k);
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += double(g[i * n + j]) * double(bi.data[p * n + j]);
                ai.grad[idx] += static_cast<real>(acc);
            });
        }
        if (bi.requires_grad) {
            bi.ensure_grad();
            par::parallel_for(int64_t(k) * n, [&](int64_t idx) {
                int p = static_cast<int>(idx / n), j = static_cast<int>(idx % n);
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += double(ai.data[i * k + p]) * double(g[i * n + j]);
                bi.grad[idx] += static_cast<real>(acc);
            });
        }
    };
    return custom_op("matmul", {a, b}, {m, n}, fwd, bwd);
}

Tensor conv2d(const Tensor& img, const Tensor& kernel) {
    image3_check(img, "conv2d");
    if (kernel.shape().size() != 4)
        throw std::invalid_argument("conv2d: kernel must be {O,C,kh,kw}, got " +
                                    shape_str(kernel.shape()));
    const int C = img.shape()[0], H = img.shape()[1], W = img.shape()[2];
    const int O = kernel.shape()[0], KC = kernel.shape()[1], kh = kernel.shape()[2],
              kw = kernel.shape()[3];
    if (KC != C)
        throw std::invalid_argument("conv2d: channel mismatch, image " + shape_str(img.shape()) +
                                    " kernel " + shape_str(kernel.shape()));
    if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d: kernel extents must be odd");
    const int ph = kh / 2, pw = kw / 2;

    auto fwd = [=](const TapeNode& nd) {
        const auto& iv = nd.in[0]->data;
        const auto& kv = nd.in[1]->data;
        auto& ov = nd.out->data;
        par::parallel_for(int64_t(O) * H, [&](int64_t row) {
            const int o = static_cast<int>(row / H), y = static_cast<int>(row % H);
            for (int x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int c = 0; c < C; ++c)
                    for (int dy = 0; dy < kh; ++dy) {
                        const int sy = y + dy - ph;
                        if (sy < 0 || sy >= H) continue;
                        for (int dx = 0; dx < kw; ++dx) {
                            const int sx = x + dx - pw;
                            if (sx < 0 || sx >= W) continue;
                            acc += double(iv[(c * H + sy) * W + sx]) *
                                   double(kv[((o * C + c) * kh + dy) * kw + dx]);
                        }
                    }
                ov[(o * H + y) * W + x] = static_cast<real>(acc);
            }
        });
    };
    auto bwd = [=](const TapeNode& nd) {
        auto& ii = *nd.in[0];
        auto& ki = *nd.in[1];
        const auto& g = nd.out->grad;
        if (ii.requires_grad) {
            ii.ensure_grad();
            par::parallel_for(int64_t(C) * H, [&](int64_t row) {
                const int c = static_cast<int>(row / H), y = static_cast<int>(row % H);
                for (int x = 0; x < W; ++x) {
                    double acc = 0.0;
                    for (int o = 0; o < O; ++o)
                        for (int dy = 0; dy < kh; ++dy) {
                            const int oy = y - dy + ph;
                            if (oy < 0 || oy >= H) continue;
                            for (int dx = 0; dx < kw; ++dx) {
                                const int ox = x - dx + pw;
                                if (ox < 0 || ox >= W) continue;
                                acc += double(g[(o * H + oy) * W + ox]) *
                                       double(ki.data[((o * C + c) * kh + dy) * kw + dx]);
                            }
                        }
                    ii.grad[(c * H + y) * W + x] += static_cast<real>(acc);
                }
            });
        }
        if (ki.requires_grad) {
            ki.ensure_grad();
            par::parallel_for(int64_t(O) * C * kh * kw, [&](int64_t idx) {
                const int dx = static_cast<int>(idx % kw);
                const int dy = static_cast<int>((idx / kw) % kh);
                const int c = static_cast<int>((idx / (int64_t(kw) * kh)) % C);
                const int o = static_cast<int>(idx / (int64_t(kw) * kh * C));
                double acc = 0.0;
                for (int y = 0; y < H; ++y) {
                    const int sy = y + dy - ph;
                    if (sy < 0 || sy >= H) continue;
                    for (int x = 0; x < W; ++x) {
                        const int sx = x + dx - pw;
                        if (sx < 0 || sx >= W) continue;
                        acc += double(g[(o * H + y) * W + x]) * double(ii.data[(c * H + sy) * W + sx]);
                    }
                }
                ki.grad[idx] += static_cast<real>(acc);
            });
        }
    };
    return custom_op("conv2d", {img, kernel}, {O, H, W}, fwd, bwd);
}

Tensor bilinear_resize(const Tensor& img, int oh, int ow) {
    image3_check(img, "bilinear_resize");
    if (oh < 1 || ow < 1) throw std::invalid_argument("bilinear_resize: invalid target size");
    const int C = img.shape()[0], H = img.shape()[1], W = img.shape()[2];
    const double sy = double(H) / oh, sx = double(W) / ow;

    struct Corner {
        int x0, x1, y0, y1;
        double fx, fy;
    };
    auto corner = [=](int y, int x) {
        Corner c;
        double srcy = (y + 0.5) * sy - 0.5;
        double srcx = (x + 0.5) * sx - 0.5;
        srcy = std::min(std::max(srcy, 0.0), double(H - 1));
        srcx = std::min(std::max(srcx, 0.0), double(W - 1));
        c.y0 = static_cast<int>(srcy);
        c.x0 = static_cast<int>(srcx);
        c.y1 = std::min(c.y0 + 1, H - 1);
        c.x1 = std::min(c.x0 + 1, W - 1);
        c.fy = srcy - c.y0;
        c.fx = srcx - c.x0;
        return c;
    };

    auto fwd = [=](const TapeNode& nd) {
        const auto& iv = nd.in[0]->data;
        auto& ov = nd.out->data;
        par::parallel_for(int64_t(oh) * ow, [&](int64_t p) {
            const int y = static_cast<int>(p / ow), x = static_cast<int>(p % ow);
            const Corner c = corner(y, x);
            for (int ch = 0; ch < C; ++ch) {
                const real* base = iv.data() + size_t(ch) * H * W;
                double v = (1 - c.fy) * ((1 - c.fx) * base[c.y0 * W + c.x0] + c.fx * base[c.y0 * W + c.x1]) +
                           c.fy * ((1 - c.fx) * base[c.y1 * W + c.x0] + c.fx * base[c.y1 * W + c.x1]);
                ov[(size_t(ch) * oh + y) * ow + x] = static_cast<real>(v);
            }
        });
    };
    auto bwd = [=](const TapeNode& nd) {
        auto& ii = *nd.in[0];
        if (!ii.requires_grad) return;
        ii.ensure_grad();
        par::PartitionedAccumulator acc(ii.data.size());
        par::parallel_for_2(int64_t(oh) * ow, [&](int64_t p, int tid) {
            double* buf = acc.buffer(tid);
            const int y = static_cast<int>(p / ow), x = static_cast<int>(p % ow);
            const Corner c = corner(y, x);
            for (int ch = 0; ch < C; ++ch) {
                const double g = nd.out->grad[(size_t(ch) * oh + y) * ow + x];
                double* base = buf + size_t(ch) * H * W;
                base[c.y0 * W + c.x0] += g * (1 - c.fy) * (1 - c.fx);
                base[c.y0 * W + c.x1] += g * (1 - c.fy) * c.fx;
                base[c.y1 * W + c.x0] += g * c.fy * (1 - c.fx);
                base[c.y1 * W + c.x1] += g * c.fy * c.fx;
            }
        });
        acc.combine_into(ii.grad.data());
    };
    return custom_op("bilinear_resize", {img}, {C, oh, ow}, fwd, bwd);
}

Tensor spatial_mean(const Tensor& img) {
    image3_check(img, "spatial_mean");
    const int C = img.shape()[0];
    const int64_t hw = int64_t(img.shape()[1]) * img.shape()[2];
    auto fwd = [=](const TapeNode& nd) {
        const auto& iv = nd.in[0]->data;
        for (int c = 0; c < C; ++c) {
            double acc = par::reduce_sum(hw, [&](int64_t i) { return double(iv[c * hw + i]); });
            nd.out->data[c] = static_cast<real>(acc / double(hw));
        }
    };
    auto bwd = [=](const TapeNode& nd) {
        auto& ii = *nd.in[0];
        if (!ii.requires_grad) return;
        ii.ensure_grad();
        for (int c = 0; c < C; ++c) {
            const real g = nd.out->grad[c] / real(hw);
            for (int64_t i = 0; i < hw; ++i) ii.grad[c * hw + i] += g;
        }
    };
    return custom_op("spatial_mean", {img}, {C}, fwd, bwd);
}

Tensor spatial_variance(const Tensor& img) {
    image3_check(img, "spatial_variance");
    const int C = img.shape()[0];
    const int64_t hw = int64_t(img.shape()[1]) * img.shape()[2];
    auto fwd = [=](const TapeNode& nd) {
        const auto& iv = nd.in[0]->data;
        for (int c = 0; c < C; ++c) {
            double mean = par::reduce_sum(hw, [&](int64_t i) { return double(iv[c * hw + i]); }) / double(hw);
            double var = par::reduce_sum(hw, [&](int64_t i) {
                             double d = double(iv[c * hw + i]) - mean;
                             return d * d;
                         }) /
                         double(hw);
            nd.out->data[c] = static_cast<real>(var);
        }
    };
    auto bwd = [=](const TapeNode& nd) {
        auto& ii = *nd.in[0];
        if (!ii.requires_grad) return;
        ii.ensure_grad();
        for (int c = 0; c < C; ++c) {
            double mean =
                par::reduce_sum(hw, [&](int64_t i) { return double(ii.data[c * hw + i]); }) / double(hw);
            const double g = nd.out->grad[c] * 2.0 / double(hw);
            for (int64_t i = 0; i < hw; ++i)
                ii.grad[c * hw + i] += static_cast<real>(g * (double(ii.data[c * hw + i]) - mean));
        }
    };
    return custom_op("spatial_variance", {img}, {C}, fwd, bwd);
}

Tensor gram(const Tensor& img) {
    image3_check(img, "gram");
    const int C = img.shape()[0];
    const int64_t hw = int64_t(img.shape()[1]) * img.shape()[2];
    auto fwd = [=](const TapeNode& nd) {
        const auto& iv = nd.in[0]->data;
        par::parallel_for(int64_t(C) * C, [&](int64_t idx) {
            const int i = static_cast<int>(idx / C), j = static_cast<int>(idx % C);
            double acc = 0.0;
            for (int64_t p = 0; p < hw; ++p) acc += double(iv[i * hw + p]) * double(iv[j * hw + p]);
            nd.out->data[idx] = static_cast<real>(acc / double(hw));
        });
    };
    auto bwd = [=](const TapeNode& nd) {
        auto& ii = *nd.in[0];
        if (!ii.requires_grad) return;
        ii.ensure_grad();
        const auto& g = nd.out->grad;
        par::parallel_for(int64_t(C) * hw, [&](int64_t idx) {
            const int i = static_cast<int>(idx / hw);
            const int64_t p = idx % hw;
            double acc = 0.0;
            for (int j = 0; j < C; ++j)
                acc += (double(g[i * C + j]) + double(g[j * C + i])) * double(ii.data[j * hw + p]);
            ii.grad[idx] += static_cast<real>(acc / double(hw));
        });
    };
    return custom_op("gram", {img}, {C, C}, fwd, bwd);
}

Tensor pixel_unshuffle(const Tensor& img, int r) {
    image3_check(img, "pixel_unshuffle");
    const int C = img.shape()[0], H = img.shape()[1], W = img.shape()[2];
    if (r < 1 || H % r != 0 || W % r != 0)
        throw std::invalid_argument("pixel_unshuffle: factor " + std::to_string(r) +
                                    " does not divide " + shape_str(img.shape()));
    const int oh = H / r, ow = W / r;
    auto src_index = [=](int64_t dst) {
        const int x = static_cast<int>(dst % ow);
        const int y = static_cast<int>((dst / ow) % oh);
        const int oc = static_cast<int>(dst / (int64_t(ow) * oh));
        const int c = oc / (r * r);
        const int dy = (oc % (r * r)) / r;
        const int dx = oc % r;
        return (int64_t(c) * H + (y * r + dy)) * W + (x * r + dx);
    };
    auto fwd = [=](const TapeNode& nd) {
        const auto& iv = nd.in[0]->data;
        auto& ov = nd.out->data;
        par::parallel_for(static_cast<int64_t>(ov.size()),
                          [&](int64_t i) { ov[i] = iv[src_index(i)]; });
    };
    auto bwd = [=](const TapeNode& nd) {
        auto& ii = *nd.in[0];
        if (!ii.requires_grad) return;
        ii.ensure_grad();
        const auto& g = nd.out->grad;
        for (size_t i = 0; i < g.size(); ++i) ii.grad[src_index(int64_t(i))] += g[i];
    };
    return custom_op("pixel_unshuffle", {img}, {C * r * r, oh, ow}, fwd, bwd);
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    int64_t n = 1;
    for (int e : shape) n *= e;
    if (n != x.numel())
        throw std::invalid_argument("reshape: element count mismatch " + shape_str(x.shape()) +
                                    " -> " + shape_str(shape));
    auto fwd = [](const TapeNode& nd) { nd.out->data = nd.in[0]->data; };
    auto bwd = [](const TapeNode& nd) {
        auto& xi = *nd.in[0];
        if (!xi.requires_grad) return;
        xi.ensure_grad();
        for (size_t i = 0; i < xi.grad.size(); ++i) xi.grad[i] += nd.out->grad[i];
    };
    return custom_op("reshape", {x}, std::move(shape), fwd, bwd);
}

Tensor gather(const Tensor& x, int64_t index) {
    if (index < 0 || index >= x.numel())
        throw std::invalid_argument("gather: index " + std::to_string(index) + " out of range for " +
                                    shape_str(x.shape()));
    auto fwd = [index](const TapeNode& nd) { nd.out->data[0] = nd.in[0]->data[index]; };
    auto bwd = [index](const TapeNode& nd) {
        auto& xi = *nd.in[0];
        if (!xi.requires_grad) return;
        xi.ensure_grad();
        xi.grad[index] += nd.out->grad[0];
    };
    return custom_op("gather", {x}, {1}, fwd, bwd);
}

Tensor mean_all(const Tensor& x) {
    const int64_t n = x.numel();
    Tensor flat = reshape(x, {1, 1, static_cast<int>(n)});
    return spatial_mean(flat);
}

}  // namespace texpro::tc
