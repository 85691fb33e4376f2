#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <cstring>
#include <sstream>

#include "mgvsr/error.hpp"
#include "mgvsr/layers.hpp"
#include "mgvsr/tensor.hpp"
#include "mgvsr/tensor_io.hpp"
#include "support.hpp"

namespace mgvsr {
namespace {

using test_support::random_tensor;

// Direct summation over the zero-padded window.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
  const long n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const long k = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  Tensor<double> out({x.dim(0), w.dim(0), x.dim(2), x.dim(3)});
  for (long in = 0; in < n; ++in)
    for (long ik = 0; ik < k; ++ik)
      for (long y = 0; y < h; ++y)
        for (long xx = 0; xx < wd; ++xx) {
          double s = b[ik];
          for (long ic = 0; ic < c; ++ic)
            for (long dy = 0; dy < kh; ++dy)
              for (long dx = 0; dx < kw; ++dx) {
                const long sy = y + dy - kh / 2, sx = xx + dx - kw / 2;
                if (sy < 0 || sy >= h || sx < 0 || sx >= wd) continue;
                s += w.at4(ik, ic, dy, dx) * x.at4(in, ic, sy, sx);
              }
          out.at4(in, ik, y, xx) = s;
        }
  return out;
}

TEST(Tensor, ConstructionChecksLength) {
  EXPECT_THROW(Tensor<double>({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor<float> t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_THROW(t.reshaped({5, 5}), ShapeError);
  EXPECT_THROW(t.slice0(2), OutOfRange);
}

TEST(Tensor, StackUnstackRoundTrip) {
  std::mt19937_64 rng(1);
  const Tensor<double> t = random_tensor({4, 2, 3}, rng);
  EXPECT_EQ(stack(unstack(t)), t);
  EXPECT_EQ(t.slice0(2).shape(), (Shape{2, 3}));
  EXPECT_EQ(t.slice0(2)[5], t[2 * 6 + 5]);
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(2);
  const Tensor<double> x = random_tensor({2, 3, 5, 4}, rng);
  Tensor<double> w({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) w.at4(c, c, 0, 0) = 1.0;
  EXPECT_EQ(ops::conv2d_forward(x, w, Tensor<double>({3})), x);
}

TEST(Conv2d, ZeroWeightsGiveBias) {
  std::mt19937_64 rng(3);
  const Tensor<double> x = random_tensor({1, 2, 4, 4}, rng);
  const Tensor<double> b({3}, std::vector<double>{0.5, -1.0, 2.0});
  const auto y = ops::conv2d_forward(x, Tensor<double>({3, 2, 3, 3}), b);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(y[k * 16 + i], b[k]);
}

TEST(Conv2d, MatchesDirectSummation) {
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor<double> x = random_tensor({2, 3, 5, 5}, rng);
    const Tensor<double> w = random_tensor({4, 3, 3, 3}, rng);
    const Tensor<double> b = random_tensor({4}, rng);
    const auto got = ops::conv2d_forward(x, w, b);
    const auto want = naive_conv(x, w, b);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
  std::mt19937_64 rng(99);
  const Tensor<double> x = random_tensor({1, 2, 7, 6}, rng);
  const Tensor<double> w = random_tensor({3, 2, 5, 5}, rng);
  const Tensor<double> b = random_tensor({3}, rng);
  EXPECT_LT(test_support::relative_error(ops::conv2d_forward(x, w, b), naive_conv(x, w, b)), 1e-13);
}

TEST(Conv2d, SinglePrecisionAgrees) {
  std::mt19937_64 rng(5);
  const Tensor<double> x = random_tensor({2, 4, 6, 6}, rng);
  const Tensor<double> w = random_tensor({5, 4, 3, 3}, rng);
  const Tensor<double> b = random_tensor({5}, rng);
  const auto single = ops::conv2d_forward(x.cast<float>(), w.cast<float>(), b.cast<float>()).cast<double>();
  EXPECT_LT(test_support::relative_error(single, naive_conv(x, w, b)), 1e-5);
}

TEST(Conv2d, RejectsBadShapes) {
  const Tensor<double> x({1, 3, 4, 4});
  EXPECT_THROW(ops::conv2d_forward(x, Tensor<double>({2, 2, 3, 3}), Tensor<double>({2})), ShapeError);
  EXPECT_THROW(ops::conv2d_forward(x, Tensor<double>({2, 3, 2, 2}), Tensor<double>({2})), ShapeError);
  EXPECT_THROW(ops::conv2d_forward(x, Tensor<double>({2, 3, 3, 3}), Tensor<double>({3})), ShapeError);
  EXPECT_THROW(ops::conv2d_backward(x, Tensor<double>({2, 3, 3, 3}), Tensor<double>({1, 2, 4, 5})), ShapeError);
}

TEST(Conv2d, BackwardIdentities) {
  std::mt19937_64 rng(6);
  const Tensor<double> x = random_tensor({2, 3, 4, 5}, rng);
  const Tensor<double> w = random_tensor({4, 3, 3, 3}, rng);
  const auto zero = ops::conv2d_backward(x, w, Tensor<double>({2, 4, 4, 5}));
  for (const auto* t : {&zero.input, &zero.weight, &zero.bias})
    for (double v : t->data()) EXPECT_EQ(v, 0.0);

  const Tensor<double> g = random_tensor({2, 4, 4, 5}, rng);
  const auto grads = ops::conv2d_backward(x, w, g);
  EXPECT_EQ(grads.input.shape(), x.shape());
  EXPECT_EQ(grads.weight.shape(), w.shape());
  for (std::size_t k = 0; k < 4; ++k) {
    double sum = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < 20; ++i) sum += g[(n * 4 + k) * 20 + i];
    EXPECT_NEAR(grads.bias[k], sum, 1e-12);
  }
}

TEST(PixelShuffle, HandIndexedLayout) {
  // 1 x 4 x 2 x 2 with value = 10 * channel + (2y + x).
  Tensor<double> in({1, 4, 2, 2});
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x) in.at4(0, c, y, x) = 10.0 * c + 2.0 * y + x;
  const auto out = ops::pixel_shuffle(in, 2);
  ASSERT_EQ(out.shape(), (Shape{1, 1, 4, 4}));
  const double want[4][4] = {{0, 10, 1, 11}, {20, 30, 21, 31}, {2, 12, 3, 13}, {22, 32, 23, 33}};
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) EXPECT_EQ(out.at4(0, 0, y, x), want[y][x]) << y << "," << x;
}

TEST(PixelShuffle, PermutationProperties) {
  std::mt19937_64 rng(7);
  for (std::size_t r : {1u, 2u, 3u}) {
    const Tensor<double> x = random_tensor({2, 2 * r * r, 3, 4}, rng);
    const auto y = ops::pixel_shuffle(x, r);
    EXPECT_EQ(ops::pixel_shuffle_backward(y, r), x);
    EXPECT_EQ(ops::pixel_shuffle(ops::pixel_shuffle_backward(y, r), r), y);
    auto sorted_x = std::vector<double>(x.data().begin(), x.data().end());
    auto sorted_y = std::vector<double>(y.data().begin(), y.data().end());
    std::sort(sorted_x.begin(), sorted_x.end());
    std::sort(sorted_y.begin(), sorted_y.end());
    EXPECT_EQ(sorted_x, sorted_y);
  }
  EXPECT_EQ(ops::pixel_shuffle(Tensor<double>({1, 8, 2, 2}), 1), Tensor<double>({1, 8, 2, 2}));
  const auto c = ops::pixel_shuffle(Tensor<double>({1, 4, 3, 3}, 0.25), 2);
  for (double v : c.data()) EXPECT_EQ(v, 0.25);
  EXPECT_THROW(ops::pixel_shuffle(Tensor<double>({1, 6, 2, 2}), 2), ShapeError);
}

TEST(LeakyRelu, Values) {
  const Tensor<double> x({1, 1, 1, 4}, std::vector<double>{-2.0, -0.5, 0.0, 3.0});
  const auto y = ops::leaky_relu(x, 0.1);
  EXPECT_DOUBLE_EQ(y[0], -0.2);
  EXPECT_DOUBLE_EQ(y[1], -0.05);
  EXPECT_EQ(y[2], 0.0);
  EXPECT_EQ(y[3], 3.0);
  const auto z = ops::leaky_relu(x, 0.0);
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
  const Tensor<double> pos({1, 1, 2, 2}, std::vector<double>{0.0, 1.0, 2.0, 3.0});
  EXPECT_EQ(ops::leaky_relu(pos, 0.1), pos);
  const auto g = ops::leaky_relu_backward(x, Tensor<double>(x.shape(), 1.0), 0.1);
  EXPECT_EQ(g[0], 0.1);
  EXPECT_EQ(g[3], 1.0);
}

TEST(Elementwise, AddConcatSplit) {
  std::mt19937_64 rng(8);
  const Tensor<double> a = random_tensor({2, 3, 4, 4}, rng);
  const Tensor<double> b = random_tensor({2, 5, 4, 4}, rng);
  EXPECT_EQ(ops::add(a, Tensor<double>(a.shape())), a);
  EXPECT_THROW(ops::add(a, b), ShapeError);
  const auto [ra, rb] = ops::split_channels(ops::concat_channels(a, b), 3);
  EXPECT_EQ(ra, a);
  EXPECT_EQ(rb, b);
  EXPECT_THROW(ops::concat_channels(a, Tensor<double>({2, 3, 4, 5})), ShapeError);
}

TEST(NearestUpsample, BlocksAndBackwardSums) {
  std::mt19937_64 rng(9);
  const Tensor<double> x = random_tensor({1, 2, 3, 2}, rng);
  const auto up = ops::nearest_upsample(x, 4);
  ASSERT_EQ(up.shape(), (Shape{1, 2, 12, 8}));
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 12; ++y)
      for (std::size_t xx = 0; xx < 8; ++xx) EXPECT_EQ(up.at4(0, c, y, xx), x.at4(0, c, y / 4, xx / 4));
  const Tensor<double> g = random_tensor(up.shape(), rng);
  const auto back = ops::nearest_upsample_backward(g, 4);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t xx = 0; xx < 2; ++xx) {
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
          for (std::size_t j = 0; j < 4; ++j) s += g.at4(0, c, 4 * y + i, 4 * xx + j);
        EXPECT_NEAR(back.at4(0, c, y, xx), s, 1e-12);
      }
}

TEST(Layers, Deterministic) {
  std::mt19937_64 rng(10);
  const Tensor<float> x = random_tensor({2, 4, 9, 7}, rng).cast<float>();
  const Tensor<float> w = random_tensor({6, 4, 3, 3}, rng).cast<float>();
  const Tensor<float> b = random_tensor({6}, rng).cast<float>();
  EXPECT_EQ(ops::conv2d_forward(x, w, b), ops::conv2d_forward(x, w, b));
  const Tensor<float> g = random_tensor({2, 6, 9, 7}, rng).cast<float>();
  const auto g1 = ops::conv2d_backward(x, w, g), g2 = ops::conv2d_backward(x, w, g);
  EXPECT_EQ(g1.input, g2.input);
  EXPECT_EQ(g1.weight, g2.weight);
}

TEST(TensorIo, RoundTripAndLayout) {
  std::mt19937_64 rng(11);
  const Tensor<double> t = random_tensor({2, 3, 4}, rng);
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 8u * (1 + 3 + 24));
  std::int64_t rank = 0;
  std::memcpy(&rank, bytes.data(), 8);
  EXPECT_EQ(rank, 3);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 32, 8);
  EXPECT_EQ(first, t[0]);
  EXPECT_EQ(read_tensor(ss), t);

  const auto path = std::filesystem::temp_directory_path() / "mgvsr_tensor_io_test.bin";
  save_tensor(path, t);
  EXPECT_EQ(load_tensor(path), t);
  std::filesystem::remove(path);
  EXPECT_THROW(load_tensor(path), IoError);

  std::stringstream truncated(bytes.substr(0, 40));
  EXPECT_THROW(read_tensor(truncated), IoError);
}

}  // namespace
}  // namespace mgvsr
