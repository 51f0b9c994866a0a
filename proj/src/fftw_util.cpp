#include "diowave/fftw_util.hpp"

#include <fftw3.h>

#include <algorithm>
#include <stdexcept>

namespace diowave {

int fft_friendly_size(int n) {
  if (n < 1) throw std::invalid_argument("fft_friendly_size: n must be >= 1");
  for (int m = n;; ++m) {
    int r = m;
    for (int f : {2, 3, 5})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

SmallFft::SmallFft(int rank, const std::vector<int>& dims) {
  if (rank < 1 || std::size_t(rank) != dims.size())
    throw std::invalid_argument("SmallFft: rank does not match the dimension list");
  n_ = 1;
  for (int d : dims) {
    if (d < 1) throw std::invalid_argument("SmallFft: dimensions must be positive");
    n_ *= std::size_t(d);
  }
  buf_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n_));
  if (!buf_) throw std::bad_alloc();
  std::fill(buf_, buf_ + n_, std::complex<double>(0.0));
  auto* raw = reinterpret_cast<fftw_complex*>(buf_);
  fwd_ = fftw_plan_dft(rank, dims.data(), raw, raw, FFTW_FORWARD, FFTW_ESTIMATE);
  bwd_ = fftw_plan_dft(rank, dims.data(), raw, raw, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!fwd_ || !bwd_) {
    if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    if (bwd_) fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
    fftw_free(buf_);
    throw std::runtime_error("SmallFft: FFTW planning failed");
  }
}

SmallFft::~SmallFft() {
  if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  if (bwd_) fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
  if (buf_) fftw_free(buf_);
}

void SmallFft::forward() { fftw_execute(static_cast<fftw_plan>(fwd_)); }

void SmallFft::backward() { fftw_execute(static_cast<fftw_plan>(bwd_)); }


BatchFft1D::BatchFft1D(int n, int count) : n_(n), count_(count) {
  if (n < 1 || count < 1)
    throw std::invalid_argument("BatchFft1D: sizes must be positive");
  const std::size_t total = std::size_t(n) * std::size_t(count);
  buf_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(total));
  if (!buf_) throw std::bad_alloc();
  std::fill(buf_, buf_ + total, std::complex<double>(0.0));
  auto* raw = reinterpret_cast<fftw_complex*>(buf_);
  fwd_ = fftw_plan_many_dft(1, &n_, count_, raw, nullptr, 1, n_, raw, nullptr, 1, n_,
                            FFTW_FORWARD, FFTW_ESTIMATE);
  bwd_ = fftw_plan_many_dft(1, &n_, count_, raw, nullptr, 1, n_, raw, nullptr, 1, n_,
                            FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!fwd_ || !bwd_) {
    if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    if (bwd_) fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
    fftw_free(buf_);
    throw std::runtime_error("BatchFft1D: FFTW planning failed");
  }
}

BatchFft1D::~BatchFft1D() {
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
  fftw_free(buf_);
}

void BatchFft1D::forward() { fftw_execute(static_cast<fftw_plan>(fwd_)); }
void BatchFft1D::backward() { fftw_execute(static_cast<fftw_plan>(bwd_)); }

}  // namespace diowave
