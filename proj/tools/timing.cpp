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


#include "timing.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

namespace openseg::cli {

TimingSummary summarize_timings(std::span<const double> seconds, double confidence)
{
  TimingSummary s;
  s.n = seconds.size();
  s.confidence = confidence;
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double v : seconds) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) return s;
  double ss = 0.0;
  for (double v : seconds) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  const boost::math::students_t dist(static_cast<double>(s.n - 1));
  const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
  s.half_width = t * s.stddev / std::sqrt(static_cast<double>(s.n));
  return s;
}

}  // namespace openseg::cli
