#include "ricci/spectral.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

#include "ricci/error.hpp"

namespace ricci {

namespace {

// d-th derivative of sin and cos at theta.
double sin_derivative(int d, double theta) {
  switch (d % 4) {
    case 0: return std::sin(theta);
    case 1: return std::cos(theta);
    case 2: return -std::sin(theta);
    default: return -std::cos(theta);
  }
}

double cos_derivative(int d, double theta) {
  return sin_derivative(d + 1, theta);
}

std::vector<double> apply(const std::vector<double>& m, std::span<const double> f) {
  const std::size_t size = f.size();
  std::vector<double> out(size, 0.0);
  for (std::size_t i = 0; i < size; ++i) {
    const double* row = m.data() + i * size;
    double acc = 0.0;
    for (std::size_t j = 0; j < size; ++j) acc += row[j] * f[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace

SpectralLine::SpectralLine(int intervals, double length) : n_(intervals), length_(length) {
  if (intervals < 2 || !(length > 0.0)) throw InvalidArgument("SpectralLine: bad grid");
  const int size = n_ + 1;
  const double pi = std::numbers::pi;
  const double inv_n = 1.0 / n_;

  for (int d = 1; d <= 3; ++d) {
    auto& m = odd_d_[d - 1];
    m.assign(static_cast<std::size_t>(size) * size, 0.0);
    for (int i = 0; i < size; ++i) {
      for (int j = 1; j < n_; ++j) {
        double acc = 0.0;
        for (int k = 1; k < n_; ++k) {
          const double wave = k * pi / length_;
          acc += std::pow(wave, d) * sin_derivative(d, k * i * pi * inv_n) *
                 std::sin(k * j * pi * inv_n);
        }
        m[static_cast<std::size_t>(i) * size + j] = 2.0 * inv_n * acc;
      }
    }
  }

  for (int d = 1; d <= 2; ++d) {
    auto& m = even_d_[d - 1];
    m.assign(static_cast<std::size_t>(size) * size, 0.0);
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        const double endpoint = (j == 0 || j == n_) ? 0.5 : 1.0;
        double acc = 0.0;
        for (int k = 1; k <= n_; ++k) {
          const double nyquist = (k == n_) ? 0.5 : 1.0;
          const double wave = k * pi / length_;
          acc += nyquist * std::pow(wave, d) * cos_derivative(d, k * i * pi * inv_n) *
                 std::cos(k * j * pi * inv_n);
        }
        m[static_cast<std::size_t>(i) * size + j] = 2.0 * inv_n * endpoint * acc;
      }
    }
  }

  even_int_.assign(static_cast<std::size_t>(size) * size, 0.0);
  for (int i = 0; i < size; ++i) {
    const double x = i * length_ * inv_n;
    for (int j = 0; j < size; ++j) {
      const double endpoint = (j == 0 || j == n_) ? 0.5 : 1.0;
      double acc = 0.5 * x;
      for (int k = 1; k < n_; ++k) {
        acc += length_ / (k * pi) * std::sin(k * i * pi * inv_n) * std::cos(k * j * pi * inv_n);
      }
      even_int_[static_cast<std::size_t>(i) * size + j] = 2.0 * inv_n * endpoint * acc;
    }
  }
}

std::shared_ptr<const SpectralLine> SpectralLine::get(int intervals, double length) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, std::shared_ptr<const SpectralLine>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{intervals, length}];
  if (!slot) slot = std::make_shared<const SpectralLine>(intervals, length);
  return slot;
}

std::vector<double> SpectralLine::odd_derivative(std::span<const double> f, int order) const {
  if (order < 1 || order > 3 || f.size() != static_cast<std::size_t>(n_ + 1)) {
    throw InvalidArgument("odd_derivative: bad order or size");
  }
  return apply(odd_d_[order - 1], f);
}

std::vector<double> SpectralLine::even_derivative(std::span<const double> f, int order) const {
  if (order < 1 || order > 2 || f.size() != static_cast<std::size_t>(n_ + 1)) {
    throw InvalidArgument("even_derivative: bad order or size");
  }
  return apply(even_d_[order - 1], f);
}

std::vector<double> SpectralLine::even_cumulative_integral(std::span<const double> f) const {
  if (f.size() != static_cast<std::size_t>(n_ + 1)) {
    throw InvalidArgument("even_cumulative_integral: bad size");
  }
  return apply(even_int_, f);
}

}  // namespace ricci
