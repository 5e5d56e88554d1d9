#pragma once

#include <cstdint>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fedul/common.hpp"

namespace fedul {

using Vec = std::vector<double>;

/// Row-major dense matrix of 64-bit floats. All model parameters and
/// embeddings live in these; public operations keep entries finite.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool empty() const { return rows == 0 || cols == 0; }
  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  bool operator==(const DenseMatrix&) const = default;
};

/// Counter-based random stream. The draw sequence is a pure function of
/// (seed, stream), so identical pairs replay identical sequences and forked
/// streams are independent regardless of evaluation order. This is what lets
/// parallel and serial federated rounds produce bit-identical results.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  /// Derived stream with its own counter; `tag` distinguishes siblings.
  RngStream fork(std::uint64_t tag) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double next_uniform01();
  /// Uniform integer in [0, n), n > 0.
  std::uint64_t next_below(std::uint64_t n);
  /// Standard normal draw (Box-Muller; two u64 per call).
  double next_normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Standard matrix-vector product. Throws DimensionError on mismatch.
Vec matvec(const DenseMatrix& m, std::span<const double> v);

/// Max-shifted softmax; output sums to 1 within 1e-12 and is invariant to
/// constant shifts of the logits.
Vec softmax(std::span<const double> logits);

/// Elementwise independent Gaussian draws; var = 0 yields the mean exactly.
Vec sample_gaussian(RngStream& rng, std::span<const double> mean,
                    std::span<const double> var);

/// Central-difference gradient (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
Vec finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> x, double h);

// Small vector helpers used throughout.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double a, std::span<const double> x, std::span<double> y);  // y += a*x
bool all_finite(std::span<const double> a);
/// Index of the maximum entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> a);

}  // namespace fedul
