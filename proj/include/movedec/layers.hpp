#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "movedec/tape.hpp"
#include "movedec/tensor.hpp"

namespace movedec::nn {

enum class LayerKind { conv1d, conv2d, conv3d, dense, lstm, dropout };
enum class Activation { relu, sigmoid, tanh };

struct LayerHyper {
    std::array<int, 3> kernel{1, 1, 1};
    int stride = 1;
    kernels::Padding padding = kernels::Padding::valid;
    int units = 0;
    double drop_rate = 0.0;
};

// One layer's trainable state plus the hyperparameters that fix its shapes.
struct LayerParams {
    LayerKind kind = LayerKind::dense;
    Param weights;
    Param biases;
    LayerHyper hyper;
};

// Uniform on [-L, L], L = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_init(int fan_in, int fan_out, std::vector<int> shape, std::uint64_t seed);

// conv weights [out_ch, in_ch, k...], zero biases
LayerParams make_conv(LayerKind kind, int in_ch, int out_ch, std::array<int, 3> kernel,
                      kernels::Padding padding, std::uint64_t seed);
LayerParams make_dense(int in, int out, std::uint64_t seed);
// packed weights [(input+hidden) x 4*hidden], gate order [i|f|g|o];
// biases zero except the forget slice, which starts at 1
LayerParams make_lstm(int input_size, int hidden, std::uint64_t seed);

kernels::ConvSpec conv_spec_of(const LayerParams& p, int in_ch);

// value-level forms of the ops (inference paths and tests)
Tensor conv_apply(const Tensor& x, const LayerParams& p);
Tensor dense_apply(const Tensor& x, const LayerParams& p);
Tensor activation(const Tensor& x, Activation kind);
Tensor dropout_apply(const Tensor& x, double rate, bool train, Rng& rng);
void lstm_apply(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const LayerParams& p,
                Tensor& h, Tensor& c);
double bce_loss(const Tensor& p, const Tensor& y);

// graph-level LSTM step built from dense/slice/gate ops; w and b are the
// node ids of the packed LSTM parameters so one graph can reuse them for
// every timestep
struct LstmNodes {
    Graph::NodeId h;
    Graph::NodeId c;
};
LstmNodes lstm_step(Graph& g, Graph::NodeId x, Graph::NodeId h_prev, Graph::NodeId c_prev,
                    Graph::NodeId w, Graph::NodeId b, int hidden);

}  // namespace movedec::nn
