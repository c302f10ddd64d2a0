// Copyright 2026 The atlas-nas Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ATLAS_CLOCK_HPP_
#define ATLAS_CLOCK_HPP_

#include <atomic>
#include <chrono>

namespace atlas {

/// Monotonic time source for budget accounting. The real clock follows
/// wall time and ignores charge(); the simulated clock only moves when
/// charged, which makes budgeted runs machine-independent in tests.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
  virtual void charge(double seconds) = 0;
  virtual bool simulated() const = 0;
};

class RealClock final : public Clock {
 public:
  RealClock() : start_(std::chrono::steady_clock::now()) {}
  double now() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }
  void charge(double) override {}
  bool simulated() const override { return false; }

 private:
  std::chrono::steady_clock::time_point start_;
};

class SimClock final : public Clock {
 public:
  double now() const override { return t_.load(std::memory_order_relaxed); }
  void charge(double seconds) override {
    if (seconds > 0.0) t_.fetch_add(seconds, std::memory_order_relaxed);
  }
  bool simulated() const override { return true; }

 private:
  std::atomic<double> t_{0.0};
};

}  // namespace atlas

#endif  // ATLAS_CLOCK_HPP_
