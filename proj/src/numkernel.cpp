#include "fedul/numkernel.hpp"

#include <cmath>
#include <limits>

namespace fedul {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer: full-avalanche mix of a 64-bit word.
std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

bool DenseMatrix::all_finite() const { return fedul::all_finite(data); }

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  key_ = mix64(mix64(seed_ + kGolden) ^ (stream_ * 0xD1342543DE82EF95ULL + 1));
}

RngStream RngStream::fork(std::uint64_t tag) const {
  return RngStream(seed_, mix64(stream_ * 0xA24BAED4963EE407ULL + tag * kGolden + 0x9FB21C651E98DF25ULL));
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::next_uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
  if (n == 0) throw DomainError("next_below: n must be positive");
  // Fixed-cost multiply-shift map; bias < n / 2^64 is irrelevant here and a
  // constant draw count per call keeps streams replayable.
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

double RngStream::next_normal() {
  // u1 in (0, 1] so the log never sees zero.
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Vec matvec(const DenseMatrix& m, std::span<const double> v) {
  if (m.cols != v.size())
    throw DimensionError("matvec: matrix has " + std::to_string(m.cols) +
                         " cols, vector has " + std::to_string(v.size()));
  Vec out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) out[r] = dot(m.row(r), v);
  return out;
}

Vec softmax(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("softmax: empty input");
  if (!all_finite(logits)) throw DomainError("softmax: non-finite logit");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  Vec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Vec sample_gaussian(RngStream& rng, std::span<const double> mean,
                    std::span<const double> var) {
  if (mean.size() != var.size())
    throw DimensionError("sample_gaussian: mean/var length mismatch");
  Vec out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (var[i] < 0.0) throw DomainError("sample_gaussian: negative variance");
    // sqrt(0) * z == 0 exactly, so zero variance returns the mean bit-exact.
    out[i] = mean[i] + std::sqrt(var[i]) * rng.next_normal();
  }
  return out;
}

Vec finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> x, double h) {
  Vec xp(x.begin(), x.end());
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = xp[i];
    xp[i] = orig + h;
    double fp = f(xp);
    xp[i] = orig - h;
    double fm = f(xp);
    xp[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw DomainError("finite_diff_grad: non-finite function value");
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

std::size_t argmax(std::span<const double> a) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < a.size(); ++i)
    if (a[i] > a[best]) best = i;
  return best;
}

}  // namespace fedul
