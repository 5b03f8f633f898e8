#pragma once

#include <vector>

#include "movedec/kernels.hpp"

// Naive nested-loop forms of every kernel, kept deliberately simple and
// serial. The unit tests pin the parallel kernels against these, and
// tools/bench_kernels reports the speed difference.

namespace movedec::nn::kernels_ref {

using kernels::ConvSpec;
using kernels::PoolSpec;

void conv_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y, const ConvSpec& s);
void conv_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx, const ConvSpec& s);
void conv_backward_params(const Tensor& dy, const Tensor& x, Tensor& dw, Tensor& db,
                          const ConvSpec& s);

void dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y);
void dense_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx);
void dense_backward_params(const Tensor& dy, const Tensor& x, Tensor& dw, Tensor& db);

void maxpool_forward(const Tensor& x, Tensor& y, std::vector<int>& argmax, const PoolSpec& s);

}  // namespace movedec::nn::kernels_ref
