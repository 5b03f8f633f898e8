#include "movedec/kernels_ref.hpp"

#include <limits>

namespace movedec::nn::kernels_ref {

namespace {

struct Dims {
    int batch, in_sp[3], out_sp[3], k[3];
    long in_n, out_n, k_n;
};

Dims dims_of(const std::vector<int>& xs, const ConvSpec& s) {
    Dims d{};
    d.batch = xs[0];
    d.in_n = d.out_n = d.k_n = 1;
    for (int a = 0; a < 3; ++a) {
        d.in_sp[a] = a < s.rank ? xs[static_cast<std::size_t>(2 + a)] : 1;
        d.out_sp[a] = a < s.rank ? s.out_size(d.in_sp[a], a) : 1;
        d.k[a] = s.kernel[static_cast<std::size_t>(a)];
        d.in_n *= d.in_sp[a];
        d.out_n *= d.out_sp[a];
        d.k_n *= d.k[a];
    }
    return d;
}

}  // namespace

void conv_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y, const ConvSpec& s) {
    const Dims d = dims_of(x.shape, s);
    for (int n = 0; n < d.batch; ++n)
        for (int oc = 0; oc < s.out_ch; ++oc)
            for (int oa = 0; oa < d.out_sp[0]; ++oa)
                for (int ob = 0; ob < d.out_sp[1]; ++ob)
                    for (int ocx = 0; ocx < d.out_sp[2]; ++ocx) {
                        double acc = b.v[static_cast<std::size_t>(oc)];
                        for (int ic = 0; ic < s.in_ch; ++ic)
                            for (int ka = 0; ka < d.k[0]; ++ka)
                                for (int kb = 0; kb < d.k[1]; ++kb)
                                    for (int kc = 0; kc < d.k[2]; ++kc) {
                                        const int ia = oa * s.stride + ka - s.pad_left(0);
                                        const int ib = ob * s.stride + kb - s.pad_left(1);
                                        const int icc = ocx * s.stride + kc - s.pad_left(2);
                                        if (ia < 0 || ia >= d.in_sp[0] || ib < 0 ||
                                            ib >= d.in_sp[1] || icc < 0 || icc >= d.in_sp[2])
                                            continue;
                                        const long xi =
                                            ((static_cast<long>(n) * s.in_ch + ic) * d.in_sp[0] + ia) *
                                                d.in_sp[1] * d.in_sp[2] +
                                            static_cast<long>(ib) * d.in_sp[2] + icc;
                                        const long wi =
                                            ((static_cast<long>(oc) * s.in_ch + ic) * d.k[0] + ka) *
                                                d.k[1] * d.k[2] +
                                            static_cast<long>(kb) * d.k[2] + kc;
                                        acc += x.v[static_cast<std::size_t>(xi)] *
                                               w.v[static_cast<std::size_t>(wi)];
                                    }
                        const long yi = ((static_cast<long>(n) * s.out_ch + oc) * d.out_sp[0] + oa) *
                                            d.out_sp[1] * d.out_sp[2] +
                                        static_cast<long>(ob) * d.out_sp[2] + ocx;
                        y.v[static_cast<std::size_t>(yi)] = acc;
                    }
}

void conv_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx, const ConvSpec& s) {
    const Dims d = dims_of(dx.shape, s);
    std::fill(dx.v.begin(), dx.v.end(), 0.0);
    for (int n = 0; n < d.batch; ++n)
        for (int oc = 0; oc < s.out_ch; ++oc)
            for (int oa = 0; oa < d.out_sp[0]; ++oa)
                for (int ob = 0; ob < d.out_sp[1]; ++ob)
                    for (int ocx = 0; ocx < d.out_sp[2]; ++ocx) {
                        const long gi = ((static_cast<long>(n) * s.out_ch + oc) * d.out_sp[0] + oa) *
                                            d.out_sp[1] * d.out_sp[2] +
                                        static_cast<long>(ob) * d.out_sp[2] + ocx;
                        const double g = dy.v[static_cast<std::size_t>(gi)];
                        for (int ic = 0; ic < s.in_ch; ++ic)
                            for (int ka = 0; ka < d.k[0]; ++ka)
                                for (int kb = 0; kb < d.k[1]; ++kb)
                                    for (int kc = 0; kc < d.k[2]; ++kc) {
                                        const int ia = oa * s.stride + ka - s.pad_left(0);
                                        const int ib = ob * s.stride + kb - s.pad_left(1);
                                        const int icc = ocx * s.stride + kc - s.pad_left(2);
                                        if (ia < 0 || ia >= d.in_sp[0] || ib < 0 ||
                                            ib >= d.in_sp[1] || icc < 0 || icc >= d.in_sp[2])
                                            continue;
                                        const long xi =
                                            ((static_cast<long>(n) * s.in_ch + ic) * d.in_sp[0] + ia) *
                                                d.in_sp[1] * d.in_sp[2] +
                                            static_cast<long>(ib) * d.in_sp[2] + icc;
                                        const long wi =
                                            ((static_cast<long>(oc) * s.in_ch + ic) * d.k[0] + ka) *
                                                d.k[1] * d.k[2] +
                                            static_cast<long>(kb) * d.k[2] + kc;
                                        dx.v[static_cast<std::size_t>(xi)] +=
                                            g * w.v[static_cast<std::size_t>(wi)];
                                    }
                    }
}

void conv_backward_params(const Tensor& dy, const Tensor& x, Tensor& dw, Tensor& db,
                          const ConvSpec& s) {
    const Dims d = dims_of(x.shape, s);
    for (int n = 0; n < d.batch; ++n)
        for (int oc = 0; oc < s.out_ch; ++oc)
            for (int oa = 0; oa < d.out_sp[0]; ++oa)
                for (int ob = 0; ob < d.out_sp[1]; ++ob)
                    for (int ocx = 0; ocx < d.out_sp[2]; ++ocx) {
                        const long gi = ((static_cast<long>(n) * s.out_ch + oc) * d.out_sp[0] + oa) *
                                            d.out_sp[1] * d.out_sp[2] +
                                        static_cast<long>(ob) * d.out_sp[2] + ocx;
                        const double g = dy.v[static_cast<std::size_t>(gi)];
                        db.v[static_cast<std::size_t>(oc)] += g;
                        for (int ic = 0; ic < s.in_ch; ++ic)
                            for (int ka = 0; ka < d.k[0]; ++ka)
                                for (int kb = 0; kb < d.k[1]; ++kb)
                                    for (int kc = 0; kc < d.k[2]; ++kc) {
                                        const int ia = oa * s.stride + ka - s.pad_left(0);
                                        const int ib = ob * s.stride + kb - s.pad_left(1);
                                        const int icc = ocx * s.stride + kc - s.pad_left(2);
                                        if (ia < 0 || ia >= d.in_sp[0] || ib < 0 ||
                                            ib >= d.in_sp[1] || icc < 0 || icc >= d.in_sp[2])
                                            continue;
                                        const long xi =
                                            ((static_cast<long>(n) * s.in_ch + ic) * d.in_sp[0] + ia) *
                                                d.in_sp[1] * d.in_sp[2] +
                                            static_cast<long>(ib) * d.in_sp[2] + icc;
                                        const long wi =
                                            ((static_cast<long>(oc) * s.in_ch + ic) * d.k[0] + ka) *
                                                d.k[1] * d.k[2] +
                                            static_cast<long>(kb) * d.k[2] + kc;
                                        dw.v[static_cast<std::size_t>(wi)] +=
                                            g * x.v[static_cast<std::size_t>(xi)];
                                    }
                    }
}

void dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y) {
    const int n = x.shape[0], f = x.shape[1], g = w.shape[1];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < g; ++j) {
            double acc = b.v[static_cast<std::size_t>(j)];
            for (int k = 0; k < f; ++k)
                acc += x.v[static_cast<std::size_t>(i * f + k)] *
                       w.v[static_cast<std::size_t>(k * g + j)];
            y.v[static_cast<std::size_t>(i * g + j)] = acc;
        }
}

void dense_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx) {
    const int n = dx.shape[0], f = dx.shape[1], g = w.shape[1];
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < f; ++k) {
            double acc = 0.0;
            for (int j = 0; j < g; ++j)
                acc += dy.v[static_cast<std::size_t>(i * g + j)] *
                       w.v[static_cast<std::size_t>(k * g + j)];
            dx.v[static_cast<std::size_t>(i * f + k)] = acc;
        }
}

void dense_backward_params(const Tensor& dy, const Tensor& x, Tensor& dw, Tensor& db) {
    const int n = x.shape[0], f = x.shape[1], g = dy.shape[1];
    for (int k = 0; k < f; ++k)
        for (int j = 0; j < g; ++j)
            for (int i = 0; i < n; ++i)
                dw.v[static_cast<std::size_t>(k * g + j)] +=
                    x.v[static_cast<std::size_t>(i * f + k)] *
                    dy.v[static_cast<std::size_t>(i * g + j)];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < g; ++j)
            db.v[static_cast<std::size_t>(j)] += dy.v[static_cast<std::size_t>(i * g + j)];
}

void maxpool_forward(const Tensor& x, Tensor& y, std::vector<int>& argmax, const PoolSpec& s) {
    const int batch = x.shape[0], ch = x.shape[1];
    int in_sp[3] = {1, 1, 1}, out_sp[3] = {1, 1, 1};
    long in_n = 1, out_n = 1;
    for (int a = 0; a < s.rank; ++a) {
        in_sp[a] = x.shape[static_cast<std::size_t>(2 + a)];
        out_sp[a] = in_sp[a] / s.window;
        in_n *= in_sp[a];
        out_n *= out_sp[a];
    }
    argmax.assign(y.v.size(), 0);
    for (long row = 0; row < static_cast<long>(batch) * ch; ++row)
        for (int oa = 0; oa < out_sp[0]; ++oa)
            for (int ob = 0; ob < out_sp[1]; ++ob)
                for (int oc = 0; oc < out_sp[2]; ++oc) {
                    double best = -std::numeric_limits<double>::infinity();
                    long best_i = 0;
                    for (int wa = 0; wa < (s.rank >= 1 ? s.window : 1); ++wa)
                        for (int wb = 0; wb < (s.rank >= 2 ? s.window : 1); ++wb)
                            for (int wc = 0; wc < (s.rank >= 3 ? s.window : 1); ++wc) {
                                const long ia = static_cast<long>(oa) * s.window + wa;
                                const long ib = s.rank >= 2 ? static_cast<long>(ob) * s.window + wb : 0;
                                const long icx = s.rank >= 3 ? static_cast<long>(oc) * s.window + wc : 0;
                                const long idx = row * in_n + (ia * in_sp[1] + ib) * in_sp[2] + icx;
                                if (x.v[static_cast<std::size_t>(idx)] > best) {
                                    best = x.v[static_cast<std::size_t>(idx)];
                                    best_i = idx;
                                }
                            }
                    const long o = row * out_n + (static_cast<long>(oa) * out_sp[1] + ob) * out_sp[2] + oc;
                    y.v[static_cast<std::size_t>(o)] = best;
                    argmax[static_cast<std::size_t>(o)] = static_cast<int>(best_i);
                }
}

}  // namespace movedec::nn::kernels_ref
