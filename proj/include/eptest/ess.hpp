#pragma once

#include <algorithm>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "eptest/errors.hpp"

namespace eptest {

struct EssResult {
  double ess = 0.0;
  bool degenerate = false;  ///< constant chain; ess is reported as the chain length
};

/// Normalized autocorrelations rho_0..rho_{n-1} via a zero-padded FFT.
inline std::vector<double> autocorrelation(std::span<const double> chain) {
  const std::size_t n = chain.size();
  double mean = 0.0;
  for (double x : chain) mean += x;
  mean /= static_cast<double>(n);
  std::size_t size = 1;
  while (size < 2 * n) size <<= 1;
  std::vector<double> padded(size, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = chain[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, padded);
  for (auto& c : spectrum) c = std::complex<double>(std::norm(c), 0.0);
  std::vector<double> acov;
  fft.inv(acov, spectrum);
  std::vector<double> rho(n, 0.0);
  if (!(acov[0] > 0.0)) return rho;
  for (std::size_t t = 0; t < n; ++t) rho[t] = acov[t] / acov[0];
  return rho;
}

/// Effective sample size with Geyer's initial monotone positive sequence.
inline EssResult effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 10) throw DomainError("effective_sample_size needs at least 10 draws");
  const double first = chain[0];
  bool constant = true;
  for (double x : chain) constant = constant && x == first;
  if (constant) return {static_cast<double>(n), true};

  const std::vector<double> rho = autocorrelation(chain);
  // Gamma_k = rho_{2k} + rho_{2k+1}, truncated at the first non-positive pair and made monotone.
  double tau = -1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho[2 * k] + rho[2 * k + 1];
    if (!(pair > 0.0)) break;
    pair = std::min(pair, previous);
    previous = pair;
    tau += 2.0 * pair;
  }
  const double length = static_cast<double>(n);
  if (!(tau > 0.0)) return {length, false};
  return {std::min(length, length / tau), false};
}

}  // namespace eptest
