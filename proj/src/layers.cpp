#include "movedec/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace movedec::nn {

Tensor glorot_init(int fan_in, int fan_out, std::vector<int> shape, std::uint64_t seed) {
    if (fan_in <= 0 || fan_out <= 0)
        throw std::invalid_argument("glorot_init fans must be positive, got " +
                                    std::to_string(fan_in) + ", " + std::to_string(fan_out));
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(seed);
    Tensor t(std::move(shape));
    for (double& x : t.v) x = rng.uniform(-limit, limit);
    return t;
}

LayerParams make_conv(LayerKind kind, int in_ch, int out_ch, std::array<int, 3> kernel,
                      kernels::Padding padding, std::uint64_t seed) {
    const int rank = kind == LayerKind::conv1d ? 1 : kind == LayerKind::conv2d ? 2 : 3;
    long k_n = 1;
    std::vector<int> wshape{out_ch, in_ch};
    for (int a = 0; a < rank; ++a) {
        k_n *= kernel[static_cast<std::size_t>(a)];
        wshape.push_back(kernel[static_cast<std::size_t>(a)]);
    }
    LayerParams p;
    p.kind = kind;
    p.hyper.kernel = kernel;
    p.hyper.padding = padding;
    p.weights = Param(glorot_init(static_cast<int>(in_ch * k_n), static_cast<int>(out_ch * k_n),
                                  wshape, seed));
    p.biases = Param(Tensor::zeros({out_ch}));
    return p;
}

LayerParams make_dense(int in, int out, std::uint64_t seed) {
    LayerParams p;
    p.kind = LayerKind::dense;
    p.hyper.units = out;
    p.weights = Param(glorot_init(in, out, {in, out}, seed));
    p.biases = Param(Tensor::zeros({out}));
    return p;
}

LayerParams make_lstm(int input_size, int hidden, std::uint64_t seed) {
    LayerParams p;
    p.kind = LayerKind::lstm;
    p.hyper.units = hidden;
    p.weights = Param(
        glorot_init(input_size + hidden, 4 * hidden, {input_size + hidden, 4 * hidden}, seed));
    Tensor b = Tensor::zeros({4 * hidden});
    for (int i = hidden; i < 2 * hidden; ++i) b.v[static_cast<std::size_t>(i)] = 1.0;
    p.biases = Param(std::move(b));
    return p;
}

kernels::ConvSpec conv_spec_of(const LayerParams& p, int in_ch) {
    kernels::ConvSpec s;
    s.rank = p.kind == LayerKind::conv1d ? 1 : p.kind == LayerKind::conv2d ? 2 : 3;
    s.in_ch = in_ch;
    s.out_ch = p.weights.value.shape[0];
    s.kernel = p.hyper.kernel;
    s.stride = p.hyper.stride;
    s.padding = p.hyper.padding;
    return s;
}

Tensor conv_apply(const Tensor& x, const LayerParams& p) {
    const kernels::ConvSpec s = conv_spec_of(p, x.shape[1]);
    Tensor y(kernels::conv_out_shape(x.shape, s));
    kernels::conv_forward(x, p.weights.value, p.biases.value, y, s);
    return y;
}

Tensor dense_apply(const Tensor& x, const LayerParams& p) {
    if (x.rank() != 2 || x.shape[1] != p.weights.value.shape[0])
        throw ShapeError("dense input " + Tensor::shape_str(x.shape) + " does not match weights " +
                         Tensor::shape_str(p.weights.value.shape));
    Tensor y({x.shape[0], p.weights.value.shape[1]});
    kernels::dense_forward(x, p.weights.value, p.biases.value, y);
    return y;
}

Tensor activation(const Tensor& x, Activation kind) {
    Tensor y = x;
    switch (kind) {
        case Activation::relu:
            for (double& e : y.v) e = e > 0.0 ? e : 0.0;
            break;
        case Activation::sigmoid:
            for (double& e : y.v) e = 1.0 / (1.0 + std::exp(-e));
            break;
        case Activation::tanh:
            for (double& e : y.v) e = std::tanh(e);
            break;
    }
    return y;
}

Tensor dropout_apply(const Tensor& x, double rate, bool train, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
    if (!train || rate == 0.0) return x;
    Tensor y = x;
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& e : y.v) e = rng.uniform() >= rate ? e * keep_scale : 0.0;
    return y;
}

void lstm_apply(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const LayerParams& p,
                Tensor& h, Tensor& c) {
    const int hidden = p.hyper.units;
    const int n = x.shape[0], f = x.shape[1];
    if (p.weights.value.shape[0] != f + hidden || p.weights.value.shape[1] != 4 * hidden)
        throw ShapeError("lstm weights " + Tensor::shape_str(p.weights.value.shape) +
                         " do not match input width " + std::to_string(f) + " and hidden " +
                         std::to_string(hidden));
    if (h_prev.shape[0] != n || h_prev.shape[1] != hidden || !c_prev.same_shape(h_prev))
        throw ShapeError("lstm state shape mismatch");

    Tensor xh({n, f + hidden});
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < f; ++i)
            xh.v[static_cast<std::size_t>(r * (f + hidden) + i)] =
                x.v[static_cast<std::size_t>(r * f + i)];
        for (int i = 0; i < hidden; ++i)
            xh.v[static_cast<std::size_t>(r * (f + hidden) + f + i)] =
                h_prev.v[static_cast<std::size_t>(r * hidden + i)];
    }
    Tensor z({n, 4 * hidden});
    kernels::dense_forward(xh, p.weights.value, p.biases.value, z);

    h = Tensor({n, hidden});
    c = Tensor({n, hidden});
    for (int r = 0; r < n; ++r)
        for (int u = 0; u < hidden; ++u) {
            const double* zr = z.v.data() + static_cast<long>(r) * 4 * hidden;
            const double ig = 1.0 / (1.0 + std::exp(-zr[u]));
            const double fg = 1.0 / (1.0 + std::exp(-zr[hidden + u]));
            const double gg = std::tanh(zr[2 * hidden + u]);
            const double og = 1.0 / (1.0 + std::exp(-zr[3 * hidden + u]));
            const double cv = fg * c_prev.v[static_cast<std::size_t>(r * hidden + u)] + ig * gg;
            c.v[static_cast<std::size_t>(r * hidden + u)] = cv;
            h.v[static_cast<std::size_t>(r * hidden + u)] = og * std::tanh(cv);
        }
}

double bce_loss(const Tensor& p, const Tensor& y) {
    if (!p.same_shape(y)) throw ShapeError("bce_loss prediction/label shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        const double pc = std::clamp(p.v[i], Graph::kBceEps, 1.0 - Graph::kBceEps);
        acc -= y.v[i] * std::log(pc) + (1.0 - y.v[i]) * std::log(1.0 - pc);
    }
    return acc / static_cast<double>(p.v.size());
}

LstmNodes lstm_step(Graph& g, Graph::NodeId x, Graph::NodeId h_prev, Graph::NodeId c_prev,
                    Graph::NodeId w, Graph::NodeId b, int hidden) {
    const Graph::NodeId z = g.dense(g.concat_cols({x, h_prev}), w, b);
    const Graph::NodeId ig = g.sigmoid(g.slice_cols(z, 0, hidden));
    const Graph::NodeId fg = g.sigmoid(g.slice_cols(z, hidden, 2 * hidden));
    const Graph::NodeId gg = g.tanh(g.slice_cols(z, 2 * hidden, 3 * hidden));
    const Graph::NodeId og = g.sigmoid(g.slice_cols(z, 3 * hidden, 4 * hidden));
    const Graph::NodeId c = g.add(g.mul(fg, c_prev), g.mul(ig, gg));
    const Graph::NodeId h = g.mul(og, g.tanh(c));
    return {h, c};
}

}  // namespace movedec::nn
