#include "levelsmith/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace levelsmith::ad {

namespace {

void check_finite(const Value& x, const char* op) {
#ifndef NDEBUG
    for (double v : x->v)
        if (!std::isfinite(v)) throw NonFiniteInput(std::string(op) + ": non-finite input");
#else
    (void)x;
    (void)op;
#endif
}

void require(bool cond, const char* msg) {
    if (!cond) throw ShapeMismatch(msg);
}

}  // namespace

bool all_finite(const Tensor& t) {
    for (double v : t.v)
        if (!std::isfinite(v)) return false;
    return true;
}

Value make_input(std::vector<int> shape, std::vector<double> values) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->v = std::move(values);
    require(static_cast<std::int64_t>(t->v.size()) == t->size(), "make_input: size mismatch");
    return t;
}

Value make_zeros(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->v.assign(static_cast<std::size_t>(t->size()), 0.0);
    t->requires_grad = requires_grad;
    if (requires_grad) t->g.assign(t->v.size(), 0.0);
    return t;
}

Value make_param(std::vector<int> shape, double stddev, std::mt19937_64& rng) {
    auto t = make_zeros(std::move(shape), true);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t->v) v = dist(rng);
    return t;
}

Value make_param_const(std::vector<int> shape, double fill) {
    auto t = make_zeros(std::move(shape), true);
    std::fill(t->v.begin(), t->v.end(), fill);
    return t;
}

Value Tape::result(std::vector<int> shape, bool requires_grad) {
    return make_zeros(std::move(shape), requires_grad);
}

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

Value Tape::dense(const Value& x, const Value& w, const Value& b) {
    require(x->shape.size() == 2 && w->shape.size() == 2 && b->shape.size() == 1,
            "dense: expects x(N,I), w(O,I), b(O)");
    const int n = x->dim(0), in = x->dim(1), out = w->dim(0);
    require(w->dim(1) == in && b->dim(0) == out, "dense: dimension mismatch");
    check_finite(x, "dense");
    const bool rg = x->requires_grad || w->requires_grad || b->requires_grad;
    Value y = result({n, out}, rg);
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out; ++o) {
            double acc = b->v[o];
            const double* xr = &x->v[static_cast<std::size_t>(i) * in];
            const double* wr = &w->v[static_cast<std::size_t>(o) * in];
            for (int j = 0; j < in; ++j) acc += xr[j] * wr[j];
            y->v[static_cast<std::size_t>(i) * out + o] = acc;
        }
    if (rg)
        record([x, w, b, y, n, in, out] {
            for (int i = 0; i < n; ++i)
                for (int o = 0; o < out; ++o) {
                    const double dy = y->g[static_cast<std::size_t>(i) * out + o];
                    if (dy == 0.0) continue;
                    if (b->requires_grad) b->g[o] += dy;
                    const double* xr = &x->v[static_cast<std::size_t>(i) * in];
                    const double* wr = &w->v[static_cast<std::size_t>(o) * in];
                    if (x->requires_grad) {
                        double* dxr = &x->g[static_cast<std::size_t>(i) * in];
                        for (int j = 0; j < in; ++j) dxr[j] += dy * wr[j];
                    }
                    if (w->requires_grad) {
                        double* dwr = &w->g[static_cast<std::size_t>(o) * in];
                        for (int j = 0; j < in; ++j) dwr[j] += dy * xr[j];
                    }
                }
        });
    return y;
}

Value Tape::conv2d(const Value& x, const Value& w, const Value& b, int stride, int pad) {
    require(x->shape.size() == 4 && w->shape.size() == 4 && b->shape.size() == 1,
            "conv2d: expects x(N,C,H,W), w(O,C,kh,kw), b(O)");
    const int n = x->dim(0), cin = x->dim(1), h = x->dim(2), wd = x->dim(3);
    const int cout = w->dim(0), kh = w->dim(2), kw = w->dim(3);
    require(w->dim(1) == cin && b->dim(0) == cout, "conv2d: channel mismatch");
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (wd + 2 * pad - kw) / stride + 1;
    require(ho >= 1 && wo >= 1, "conv2d: output would be empty");
    check_finite(x, "conv2d");
    const bool rg = x->requires_grad || w->requires_grad || b->requires_grad;
    Value y = result({n, cout, ho, wo}, rg);

    auto xi = [=](int ni, int ci, int r, int c) {
        return ((static_cast<std::size_t>(ni) * cin + ci) * h + r) * wd + c;
    };
    auto wi = [=](int o, int ci, int a, int bb) {
        return ((static_cast<std::size_t>(o) * cin + ci) * kh + a) * kw + bb;
    };
    auto yi = [=](int ni, int o, int r, int c) {
        return ((static_cast<std::size_t>(ni) * cout + o) * ho + r) * wo + c;
    };
    for (int ni = 0; ni < n; ++ni)
        for (int o = 0; o < cout; ++o)
            for (int r = 0; r < ho; ++r)
                for (int c = 0; c < wo; ++c) {
                    double acc = b->v[o];
                    for (int ci = 0; ci < cin; ++ci)
                        for (int a = 0; a < kh; ++a) {
                            const int hi = r * stride - pad + a;
                            if (hi < 0 || hi >= h) continue;
                            for (int bb = 0; bb < kw; ++bb) {
                                const int wj = c * stride - pad + bb;
                                if (wj < 0 || wj >= wd) continue;
                                acc += x->v[xi(ni, ci, hi, wj)] * w->v[wi(o, ci, a, bb)];
                            }
                        }
                    y->v[yi(ni, o, r, c)] = acc;
                }
    if (rg)
        record([=] {
            for (int ni = 0; ni < n; ++ni)
                for (int o = 0; o < cout; ++o)
                    for (int r = 0; r < ho; ++r)
                        for (int c = 0; c < wo; ++c) {
                            const double dy = y->g[yi(ni, o, r, c)];
                            if (dy == 0.0) continue;
                            if (b->requires_grad) b->g[o] += dy;
                            for (int ci = 0; ci < cin; ++ci)
                                for (int a = 0; a < kh; ++a) {
                                    const int hi = r * stride - pad + a;
                                    if (hi < 0 || hi >= h) continue;
                                    for (int bb = 0; bb < kw; ++bb) {
                                        const int wj = c * stride - pad + bb;
                                        if (wj < 0 || wj >= wd) continue;
                                        if (x->requires_grad)
                                            x->g[xi(ni, ci, hi, wj)] +=
                                                dy * w->v[wi(o, ci, a, bb)];
                                        if (w->requires_grad)
                                            w->g[wi(o, ci, a, bb)] +=
                                                dy * x->v[xi(ni, ci, hi, wj)];
                                    }
                                }
                        }
        });
    return y;
}

Value Tape::conv_transpose2d(const Value& x, const Value& w, const Value& b, int stride,
                             int pad) {
    require(x->shape.size() == 4 && w->shape.size() == 4 && b->shape.size() == 1,
            "conv_transpose2d: expects x(N,C,H,W), w(C,O,kh,kw), b(O)");
    const int n = x->dim(0), cin = x->dim(1), h = x->dim(2), wd = x->dim(3);
    const int cout = w->dim(1), kh = w->dim(2), kw = w->dim(3);
    require(w->dim(0) == cin && b->dim(0) == cout, "conv_transpose2d: channel mismatch");
    const int ho = (h - 1) * stride - 2 * pad + kh;
    const int wo = (wd - 1) * stride - 2 * pad + kw;
    require(ho >= 1 && wo >= 1, "conv_transpose2d: output would be empty");
    check_finite(x, "conv_transpose2d");
    const bool rg = x->requires_grad || w->requires_grad || b->requires_grad;
    Value y = result({n, cout, ho, wo}, rg);

    auto xi = [=](int ni, int ci, int r, int c) {
        return ((static_cast<std::size_t>(ni) * cin + ci) * h + r) * wd + c;
    };
    auto wi = [=](int ci, int o, int a, int bb) {
        return ((static_cast<std::size_t>(ci) * cout + o) * kh + a) * kw + bb;
    };
    auto yi = [=](int ni, int o, int r, int c) {
        return ((static_cast<std::size_t>(ni) * cout + o) * ho + r) * wo + c;
    };
    for (int ni = 0; ni < n; ++ni)
        for (int o = 0; o < cout; ++o)
            for (int r = 0; r < ho; ++r)
                for (int c = 0; c < wo; ++c) y->v[yi(ni, o, r, c)] = b->v[o];
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < cin; ++ci)
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < wd; ++c) {
                    const double xv = x->v[xi(ni, ci, r, c)];
                    for (int o = 0; o < cout; ++o)
                        for (int a = 0; a < kh; ++a) {
                            const int hr = r * stride - pad + a;
                            if (hr < 0 || hr >= ho) continue;
                            for (int bb = 0; bb < kw; ++bb) {
                                const int wc = c * stride - pad + bb;
                                if (wc < 0 || wc >= wo) continue;
                                y->v[yi(ni, o, hr, wc)] += xv * w->v[wi(ci, o, a, bb)];
                            }
                        }
                }
    if (rg)
        record([=] {
            for (int ni = 0; ni < n; ++ni) {
                if (b->requires_grad)
                    for (int o = 0; o < cout; ++o)
                        for (int r = 0; r < ho; ++r)
                            for (int c = 0; c < wo; ++c) b->g[o] += y->g[yi(ni, o, r, c)];
                for (int ci = 0; ci < cin; ++ci)
                    for (int r = 0; r < h; ++r)
                        for (int c = 0; c < wd; ++c) {
                            const double xv = x->v[xi(ni, ci, r, c)];
                            double dx = 0.0;
                            for (int o = 0; o < cout; ++o)
                                for (int a = 0; a < kh; ++a) {
                                    const int hr = r * stride - pad + a;
                                    if (hr < 0 || hr >= ho) continue;
                                    for (int bb = 0; bb < kw; ++bb) {
                                        const int wc = c * stride - pad + bb;
                                        if (wc < 0 || wc >= wo) continue;
                                        const double dy = y->g[yi(ni, o, hr, wc)];
                                        dx += dy * w->v[wi(ci, o, a, bb)];
                                        if (w->requires_grad) w->g[wi(ci, o, a, bb)] += dy * xv;
                                    }
                                }
                            if (x->requires_grad) x->g[xi(ni, ci, r, c)] += dx;
                        }
            }
        });
    return y;
}

Value Tape::batchnorm2d(const Value& x, const Value& gamma, const Value& beta,
                        std::vector<double>& running_mean, std::vector<double>& running_var,
                        bool train, double momentum, double eps) {
    require(x->shape.size() == 4, "batchnorm2d: expects x(N,C,H,W)");
    const int n = x->dim(0), ch = x->dim(1), h = x->dim(2), wd = x->dim(3);
    require(gamma->dim(0) == ch && beta->dim(0) == ch, "batchnorm2d: channel mismatch");
    if (running_mean.empty()) running_mean.assign(ch, 0.0);
    if (running_var.empty()) running_var.assign(ch, 1.0);
    check_finite(x, "batchnorm2d");
    const bool rg = x->requires_grad || gamma->requires_grad || beta->requires_grad;
    Value y = result(x->shape, rg);

    const std::size_t plane = static_cast<std::size_t>(h) * wd;
    const std::size_t per_ch = static_cast<std::size_t>(n) * plane;
    auto idx = [=](int ni, int ci, std::size_t s) {
        return (static_cast<std::size_t>(ni) * ch + ci) * plane + s;
    };

    auto mean_var = std::make_shared<std::vector<double>>(2 * ch);
    for (int ci = 0; ci < ch; ++ci) {
        double m, var;
        if (train) {
            double sum = 0.0;
            for (int ni = 0; ni < n; ++ni)
                for (std::size_t s = 0; s < plane; ++s) sum += x->v[idx(ni, ci, s)];
            m = sum / static_cast<double>(per_ch);
            double sq = 0.0;
            for (int ni = 0; ni < n; ++ni)
                for (std::size_t s = 0; s < plane; ++s) {
                    const double d = x->v[idx(ni, ci, s)] - m;
                    sq += d * d;
                }
            var = sq / static_cast<double>(per_ch);
            running_mean[ci] = momentum * running_mean[ci] + (1.0 - momentum) * m;
            running_var[ci] = momentum * running_var[ci] + (1.0 - momentum) * var;
        } else {
            m = running_mean[ci];
            var = running_var[ci];
        }
        (*mean_var)[ci] = m;
        (*mean_var)[ch + ci] = var;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int ni = 0; ni < n; ++ni)
            for (std::size_t s = 0; s < plane; ++s)
                y->v[idx(ni, ci, s)] =
                    gamma->v[ci] * (x->v[idx(ni, ci, s)] - m) * inv + beta->v[ci];
    }
    if (rg)
        record([=, eps = eps] {
            for (int ci = 0; ci < ch; ++ci) {
                const double m = (*mean_var)[ci];
                const double var = (*mean_var)[ch + ci];
                const double inv = 1.0 / std::sqrt(var + eps);
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (int ni = 0; ni < n; ++ni)
                    for (std::size_t s = 0; s < plane; ++s) {
                        const double dy = y->g[idx(ni, ci, s)];
                        sum_dy += dy;
                        sum_dy_xhat += dy * (x->v[idx(ni, ci, s)] - m) * inv;
                    }
                if (beta->requires_grad) beta->g[ci] += sum_dy;
                if (gamma->requires_grad) gamma->g[ci] += sum_dy_xhat;
                if (!x->requires_grad) continue;
                const double gm = gamma->v[ci];
                if (train) {
                    const double count = static_cast<double>(per_ch);
                    for (int ni = 0; ni < n; ++ni)
                        for (std::size_t s = 0; s < plane; ++s) {
                            const double xhat = (x->v[idx(ni, ci, s)] - m) * inv;
                            const double dy = y->g[idx(ni, ci, s)];
                            x->g[idx(ni, ci, s)] +=
                                gm * inv *
                                (dy - sum_dy / count - xhat * sum_dy_xhat / count);
                        }
                } else {
                    for (int ni = 0; ni < n; ++ni)
                        for (std::size_t s = 0; s < plane; ++s)
                            x->g[idx(ni, ci, s)] += gm * inv * y->g[idx(ni, ci, s)];
                }
            }
        });
    return y;
}

Value Tape::relu(const Value& x) {
    check_finite(x, "relu");
    Value y = result(x->shape, x->requires_grad);
    for (std::size_t i = 0; i < x->v.size(); ++i) y->v[i] = x->v[i] > 0.0 ? x->v[i] : 0.0;
    if (x->requires_grad)
        record([x, y] {
            for (std::size_t i = 0; i < x->v.size(); ++i)
                if (x->v[i] > 0.0) x->g[i] += y->g[i];
        });
    return y;
}

Value Tape::leaky_relu(const Value& x, double slope) {
    check_finite(x, "leaky_relu");
    Value y = result(x->shape, x->requires_grad);
    for (std::size_t i = 0; i < x->v.size(); ++i)
        y->v[i] = x->v[i] > 0.0 ? x->v[i] : slope * x->v[i];
    if (x->requires_grad)
        record([x, y, slope] {
            for (std::size_t i = 0; i < x->v.size(); ++i)
                x->g[i] += (x->v[i] > 0.0 ? 1.0 : slope) * y->g[i];
        });
    return y;
}

Value Tape::sigmoid(const Value& x) {
    check_finite(x, "sigmoid");
    Value y = result(x->shape, x->requires_grad);
    for (std::size_t i = 0; i < x->v.size(); ++i) y->v[i] = 1.0 / (1.0 + std::exp(-x->v[i]));
    if (x->requires_grad)
        record([x, y] {
            for (std::size_t i = 0; i < x->v.size(); ++i)
                x->g[i] += y->v[i] * (1.0 - y->v[i]) * y->g[i];
        });
    return y;
}

Value Tape::channel_softmax(const Value& x) {
    require(x->shape.size() == 4, "channel_softmax: expects x(N,C,H,W)");
    check_finite(x, "channel_softmax");
    const int n = x->dim(0), ch = x->dim(1), h = x->dim(2), wd = x->dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * wd;
    Value y = result(x->shape, x->requires_grad);
    auto idx = [=](int ni, int ci, std::size_t s) {
        return (static_cast<std::size_t>(ni) * ch + ci) * plane + s;
    };
    for (int ni = 0; ni < n; ++ni)
        for (std::size_t s = 0; s < plane; ++s) {
            double mx = x->v[idx(ni, 0, s)];
            for (int ci = 1; ci < ch; ++ci) mx = std::max(mx, x->v[idx(ni, ci, s)]);
            double sum = 0.0;
            for (int ci = 0; ci < ch; ++ci) {
                const double e = std::exp(x->v[idx(ni, ci, s)] - mx);
                y->v[idx(ni, ci, s)] = e;
                sum += e;
            }
            for (int ci = 0; ci < ch; ++ci) y->v[idx(ni, ci, s)] /= sum;
        }
    if (x->requires_grad)
        record([=] {
            for (int ni = 0; ni < n; ++ni)
                for (std::size_t s = 0; s < plane; ++s) {
                    double dot = 0.0;
                    for (int ci = 0; ci < ch; ++ci)
                        dot += y->g[idx(ni, ci, s)] * y->v[idx(ni, ci, s)];
                    for (int ci = 0; ci < ch; ++ci)
                        x->g[idx(ni, ci, s)] +=
                            y->v[idx(ni, ci, s)] * (y->g[idx(ni, ci, s)] - dot);
                }
        });
    return y;
}

Value Tape::mean(const Value& x) {
    check_finite(x, "mean");
    Value y = result({1}, x->requires_grad);
    double sum = 0.0;
    for (double v : x->v) sum += v;
    y->v[0] = sum / static_cast<double>(x->v.size());
    if (x->requires_grad)
        record([x, y] {
            const double d = y->g[0] / static_cast<double>(x->v.size());
            for (double& gi : x->g) gi += d;
        });
    return y;
}

Value Tape::log(const Value& x) {
    for (double v : x->v)
        if (!(v > 0.0)) throw LogOfNonPositive("log: input must be strictly positive");
    Value y = result(x->shape, x->requires_grad);
    for (std::size_t i = 0; i < x->v.size(); ++i) y->v[i] = std::log(x->v[i]);
    if (x->requires_grad)
        record([x, y] {
            for (std::size_t i = 0; i < x->v.size(); ++i) x->g[i] += y->g[i] / x->v[i];
        });
    return y;
}

Value Tape::affine(const Value& x, double mul, double off) {
    Value y = result(x->shape, x->requires_grad);
    for (std::size_t i = 0; i < x->v.size(); ++i) y->v[i] = mul * x->v[i] + off;
    if (x->requires_grad)
        record([x, y, mul] {
            for (std::size_t i = 0; i < x->v.size(); ++i) x->g[i] += mul * y->g[i];
        });
    return y;
}

Value Tape::add(const Value& a, const Value& b) {
    require(a->shape == b->shape, "add: shape mismatch");
    Value y = result(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < a->v.size(); ++i) y->v[i] = a->v[i] + b->v[i];
    if (y->requires_grad)
        record([a, b, y] {
            for (std::size_t i = 0; i < y->v.size(); ++i) {
                if (a->requires_grad) a->g[i] += y->g[i];
                if (b->requires_grad) b->g[i] += y->g[i];
            }
        });
    return y;
}

Value Tape::sub(const Value& a, const Value& b) {
    require(a->shape == b->shape, "sub: shape mismatch");
    Value y = result(a->shape, a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < a->v.size(); ++i) y->v[i] = a->v[i] - b->v[i];
    if (y->requires_grad)
        record([a, b, y] {
            for (std::size_t i = 0; i < y->v.size(); ++i) {
                if (a->requires_grad) a->g[i] += y->g[i];
                if (b->requires_grad) b->g[i] -= y->g[i];
            }
        });
    return y;
}

Value Tape::reshape(const Value& x, std::vector<int> shape) {
    Value y = result(std::move(shape), x->requires_grad);
    require(y->size() == x->size(), "reshape: element count mismatch");
    y->v = x->v;
    if (x->requires_grad)
        record([x, y] {
            for (std::size_t i = 0; i < x->v.size(); ++i) x->g[i] += y->g[i];
        });
    return y;
}

Value Tape::concat_cols(const Value& a, const Value& b) {
    require(a->shape.size() == 2 && b->shape.size() == 2 && a->dim(0) == b->dim(0),
            "concat_cols: expects (N,A) and (N,B)");
    const int n = a->dim(0), ca = a->dim(1), cb = b->dim(1);
    Value y = result({n, ca + cb}, a->requires_grad || b->requires_grad);
    for (int i = 0; i < n; ++i) {
        std::copy_n(&a->v[static_cast<std::size_t>(i) * ca], ca,
                    &y->v[static_cast<std::size_t>(i) * (ca + cb)]);
        std::copy_n(&b->v[static_cast<std::size_t>(i) * cb], cb,
                    &y->v[static_cast<std::size_t>(i) * (ca + cb) + ca]);
    }
    if (y->requires_grad)
        record([a, b, y, n, ca, cb] {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < ca + cb; ++j) {
                    const double dy = y->g[static_cast<std::size_t>(i) * (ca + cb) + j];
                    if (j < ca) {
                        if (a->requires_grad) a->g[static_cast<std::size_t>(i) * ca + j] += dy;
                    } else if (b->requires_grad) {
                        b->g[static_cast<std::size_t>(i) * cb + (j - ca)] += dy;
                    }
                }
        });
    return y;
}

Value Tape::concat_channels(const Value& a, const Value& b) {
    require(a->shape.size() == 4 && b->shape.size() == 4 && a->dim(0) == b->dim(0) &&
                a->dim(2) == b->dim(2) && a->dim(3) == b->dim(3),
            "concat_channels: expects (N,C1,H,W) and (N,C2,H,W)");
    const int n = a->dim(0), c1 = a->dim(1), c2 = b->dim(1);
    const std::size_t plane = static_cast<std::size_t>(a->dim(2)) * a->dim(3);
    Value y = result({n, c1 + c2, a->dim(2), a->dim(3)}, a->requires_grad || b->requires_grad);
    for (int i = 0; i < n; ++i) {
        std::copy_n(&a->v[static_cast<std::size_t>(i) * c1 * plane], c1 * plane,
                    &y->v[static_cast<std::size_t>(i) * (c1 + c2) * plane]);
        std::copy_n(&b->v[static_cast<std::size_t>(i) * c2 * plane], c2 * plane,
                    &y->v[static_cast<std::size_t>(i) * (c1 + c2) * plane + c1 * plane]);
    }
    if (y->requires_grad)
        record([a, b, y, n, c1, c2, plane] {
            for (int i = 0; i < n; ++i) {
                const std::size_t base = static_cast<std::size_t>(i) * (c1 + c2) * plane;
                if (a->requires_grad)
                    for (std::size_t j = 0; j < c1 * plane; ++j)
                        a->g[static_cast<std::size_t>(i) * c1 * plane + j] += y->g[base + j];
                if (b->requires_grad)
                    for (std::size_t j = 0; j < c2 * plane; ++j)
                        b->g[static_cast<std::size_t>(i) * c2 * plane + j] +=
                            y->g[base + c1 * plane + j];
            }
        });
    return y;
}

void Tape::backward(const Value& loss) {
    if (consumed_) throw GraphConsumed("tape already consumed by a previous backward pass");
    if (loss->size() != 1) throw NotScalar("backward: loss must be scalar");
    consumed_ = true;
    if (!loss->requires_grad) return;  // nothing to differentiate
    loss->g[0] = 1.0;
    for (auto it = back_.rbegin(); it != back_.rend(); ++it) (*it)();
}

void Tape::clear() {
    back_.clear();
    consumed_ = false;
}

// ---------------------------------------------------------------------------
// Optimizer utilities
// ---------------------------------------------------------------------------

void rmsprop_step(const std::vector<Value>& params, RmsPropState& state) {
    for (const Value& p : params) {
        if (!p->requires_grad) throw ShapeMismatch("rmsprop: parameter has no gradient");
        auto& acc = state.accumulator[p.get()];
        if (acc.empty()) acc.assign(p->v.size(), 0.0);
        if (acc.size() != p->v.size()) throw ShapeMismatch("rmsprop: accumulator shape mismatch");
        for (std::size_t i = 0; i < p->v.size(); ++i) {
            acc[i] = state.decay * acc[i] + (1.0 - state.decay) * p->g[i] * p->g[i];
            p->v[i] -= state.learning_rate * p->g[i] / (std::sqrt(acc[i]) + state.epsilon);
        }
    }
}

void clip_weights(const std::vector<Value>& params, double c) {
    if (!(c > 0.0)) throw NonPositiveClip("clip constant must be positive");
    for (const Value& p : params)
        for (double& v : p->v) v = std::clamp(v, -c, c);
}

double max_abs(const std::vector<Value>& params) {
    double m = 0.0;
    for (const Value& p : params)
        for (double v : p->v) m = std::max(m, std::abs(v));
    return m;
}

double grad_norm(const std::vector<Value>& params) {
    double sq = 0.0;
    for (const Value& p : params)
        for (double g : p->g) sq += g * g;
    return std::sqrt(sq);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'L', 'V', 'S', 'M', 'T', 'N', 'S', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
void read_raw(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
}
}  // namespace

void save_blocks(const std::filesystem::path& path, const std::vector<NamedBlock>& blocks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TensorError("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof kMagic);
    write_raw(out, kVersion);
    write_raw(out, static_cast<std::uint32_t>(blocks.size()));
    for (const auto& block : blocks) {
        write_raw(out, static_cast<std::uint32_t>(block.name.size()));
        out.write(block.name.data(), static_cast<std::streamsize>(block.name.size()));
        write_raw(out, kDtypeF64);
        write_raw(out, static_cast<std::uint8_t>(block.dims.size()));
        for (int d : block.dims) write_raw(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(block.data.data()),
                  static_cast<std::streamsize>(block.data.size() * sizeof(double)));
    }
    if (!out) throw TensorError("write failed for " + path.string());
}

std::vector<NamedBlock> load_blocks(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TensorError("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw TensorError(path.string() + ": bad magic");
    std::uint32_t version = 0, count = 0;
    read_raw(in, version);
    if (version != kVersion) throw TensorError(path.string() + ": unsupported version");
    read_raw(in, count);
    std::vector<NamedBlock> blocks(count);
    for (auto& block : blocks) {
        std::uint32_t name_len = 0;
        read_raw(in, name_len);
        block.name.resize(name_len);
        in.read(block.name.data(), name_len);
        std::uint8_t dtype = 0, rank = 0;
        read_raw(in, dtype);
        read_raw(in, rank);
        if (dtype != kDtypeF64) throw TensorError(path.string() + ": unsupported dtype");
        std::int64_t n = 1;
        block.dims.resize(rank);
        for (auto& d : block.dims) {
            std::uint32_t dim = 0;
            read_raw(in, dim);
            d = static_cast<int>(dim);
            n *= d;
        }
        block.data.resize(static_cast<std::size_t>(n));
        in.read(reinterpret_cast<char*>(block.data.data()),
                static_cast<std::streamsize>(block.data.size() * sizeof(double)));
        if (!in) throw TensorError(path.string() + ": truncated file");
    }
    return blocks;
}

}  // namespace levelsmith::ad
