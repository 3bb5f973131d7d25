// Copyright 2026 The citysound Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reference spectral analysis in long double, written from the textbook
// definitions with no shared code from the library.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace citysound::oracle {

// numpy.pad(mode="reflect") applied repeatedly until `pad` samples exist on
// each side.
inline std::vector<long double> reflect_pad(const std::vector<long double>& x, std::size_t pad) {
  std::vector<long double> y = x;
  std::size_t left = 0, right = 0;
  while (left < pad || right < pad) {
    if (y.size() == 1) {
      y.insert(y.begin(), pad - left, y.front());
      y.insert(y.end(), pad - right, y.back());
      break;
    }
    const std::size_t n = y.size();
    const std::size_t add_l = std::min(pad - left, n - 1);
    const std::size_t add_r = std::min(pad - right, n - 1);
    std::vector<long double> z;
    z.reserve(n + add_l + add_r);
    for (std::size_t k = add_l; k >= 1; --k) z.push_back(y[k]);
    z.insert(z.end(), y.begin(), y.end());
    for (std::size_t k = 1; k <= add_r; ++k) z.push_back(y[n - 1 - k]);
    y = std::move(z);
    left += add_l;
    right += add_r;
  }
  return y;
}

// |DFT| of Hann (periodic, sin^2 form) or rectangular frames.
inline std::vector<std::vector<long double>> naive_stft(const std::vector<long double>& x,
                                                        std::size_t n_fft, std::size_t hop,
                                                        bool hann, bool centered) {
  const std::vector<long double> s = centered ? reflect_pad(x, n_fft / 2) : x;
  std::vector<std::vector<long double>> out;
  const long double pi = std::numbers::pi_v<long double>;
  for (std::size_t start = 0;; start += hop) {
    if (centered) {
      if (start + n_fft > s.size()) break;
    } else if (start > 0 && start + n_fft > s.size()) {
      break;
    }
    std::vector<long double> frame(n_fft, 0.0L);
    for (std::size_t n = 0; n < n_fft; ++n) {
      const long double v = start + n < s.size() ? s[start + n] : 0.0L;
      const long double sn = std::sin(pi * n / n_fft);
      frame[n] = v * (hann ? sn * sn : 1.0L);
    }
    std::vector<long double> mag(n_fft / 2 + 1);
    for (std::size_t k = 0; k <= n_fft / 2; ++k) {
      long double re = 0, im = 0;
      for (std::size_t n = 0; n < n_fft; ++n) {
        // Reduce k*n mod n_fft so the angle stays small and exact.
        const long double a = 2 * pi * ((k * n) % n_fft) / n_fft;
        re += frame[n] * std::cos(a);
        im -= frame[n] * std::sin(a);
      }
      mag[k] = std::sqrt(re * re + im * im);
    }
    out.push_back(std::move(mag));
    if (!centered && s.size() < n_fft) break;
  }
  return out;
}

inline double oracle_hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

}  // namespace citysound::oracle
