/* Copyright 2026 The openseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */


#pragma once

#include <cstddef>
#include <span>

namespace openseg::cli {

/// Mean and Student-t confidence interval of repeated wall-clock measurements.
struct TimingSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;     // sample standard deviation (n - 1)
  double half_width = 0.0;  // t_{(1+c)/2, n-1} * stddev / sqrt(n); 0 when n < 2
  double confidence = 0.95;
};

TimingSummary summarize_timings(std::span<const double> seconds, double confidence = 0.95);

}  // namespace openseg::cli
