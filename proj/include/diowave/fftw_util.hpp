#pragma once
// Thin FFTW wrappers. Plans use FFTW_ESTIMATE only: planning stays
// deterministic across runs, which the byte-identical output contract needs.

#include <complex>
#include <cstddef>
#include <vector>

// FFTW's C types stay out of this header; the implementation owns them.

namespace diowave {

// Smallest 5-smooth (2^a 3^b 5^c) size >= n; FFTW's O(n log n) fast path.
int fft_friendly_size(int n);

// Fixed-shape in-place complex DFT over an internally owned buffer.
// forward applies e^{-i<k,x>}, backward e^{+i<k,x>}; both unnormalized.
class SmallFft {
 public:
  SmallFft(int rank, const std::vector<int>& dims);
  ~SmallFft();
  SmallFft(const SmallFft&) = delete;
  SmallFft& operator=(const SmallFft&) = delete;

  std::size_t size() const { return n_; }
  std::complex<double>* data() { return buf_; }
  const std::complex<double>* data() const { return buf_; }

  void forward();
  void backward();

 private:
  std::size_t n_ = 0;
  std::complex<double>* buf_ = nullptr;
  void* fwd_ = nullptr;
  void* bwd_ = nullptr;
};

// In-place batch of `count` independent length-n complex DFTs over an
// internally owned buffer laid out [line][n]. Unnormalized, like SmallFft.
class BatchFft1D {
 public:
  BatchFft1D(int n, int count);
  ~BatchFft1D();
  BatchFft1D(const BatchFft1D&) = delete;
  BatchFft1D& operator=(const BatchFft1D&) = delete;

  int line_length() const { return n_; }
  int lines() const { return count_; }
  std::complex<double>* data() { return buf_; }

  void forward();
  void backward();

 private:
  int n_ = 0, count_ = 0;
  std::complex<double>* buf_ = nullptr;
  void* fwd_ = nullptr;
  void* bwd_ = nullptr;
};

}  // namespace diowave
