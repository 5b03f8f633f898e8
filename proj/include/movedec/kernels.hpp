#pragma once

#include <array>
#include <vector>

#include "movedec/tensor.hpp"

// Data-parallel inner loops behind the layer ops. Every parallel loop writes
// a disjoint slice of its output, so results are bit-identical for any
// thread count. Reductions (weight gradients, biases) are parallelized over
// the reduced-into index, never across it.
//
// A serial nested-loop reference for each kernel lives in kernels_ref.hpp;
// the unit tests pin the two against each other and tools/bench_kernels
// compares their throughput.

namespace movedec::nn::kernels {

enum class Padding { valid, same };

struct ConvSpec {
    int rank = 1;  // spatial dims, 1..3
    int in_ch = 1;
    int out_ch = 1;
    std::array<int, 3> kernel{1, 1, 1};
    int stride = 1;
    Padding padding = Padding::valid;

    int pad_left(int axis) const {
        return padding == Padding::same ? (kernel[static_cast<std::size_t>(axis)] - 1) / 2 : 0;
    }
    int pad_total(int axis) const {
        return padding == Padding::same ? kernel[static_cast<std::size_t>(axis)] - 1 : 0;
    }
    int out_size(int in, int axis) const {
        return (in + pad_total(axis) - kernel[static_cast<std::size_t>(axis)]) / stride + 1;
    }
};

// x: [N, Cin, S...]; w: [Cout, Cin, K...]; b: [Cout]; y: [N, Cout, O...]
std::vector<int> conv_out_shape(const std::vector<int>& x_shape, const ConvSpec& s);
void conv_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y, const ConvSpec& s);
void conv_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx, const ConvSpec& s);
// accumulates into dw/db
void conv_backward_params(const Tensor& dy, const Tensor& x, Tensor& dw, Tensor& db,
                          const ConvSpec& s);

// x: [N, F]; w: [F, G]; b: [G]; y: [N, G]
void dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y);
void dense_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx);
void dense_backward_params(const Tensor& dy, const Tensor& x, Tensor& dw, Tensor& db);

// Max pooling with window == stride over every spatial axis of [N, C, S...].
// argmax records the flat input index feeding each output element.
struct PoolSpec {
    int rank = 1;
    int window = 2;
};
std::vector<int> pool_out_shape(const std::vector<int>& x_shape, const PoolSpec& s);
void maxpool_forward(const Tensor& x, Tensor& y, std::vector<int>& argmax, const PoolSpec& s);
void maxpool_backward(const Tensor& dy, const std::vector<int>& argmax, Tensor& dx);

}  // namespace movedec::nn::kernels
