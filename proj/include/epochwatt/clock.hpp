// Copyright 2026 The epochwatt Authors
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

#pragma once

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <stop_token>

namespace epochwatt {

/// Monotonic session time in seconds. Simulated clocks make sampling
/// deterministic and let tests run long epochs instantly.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
  /// Blocks until now() >= t. Returns false if `stop` was requested first.
  virtual bool wait_until(double t, std::stop_token stop) = 0;
};

/// Wall-clock time since construction (std::chrono::steady_clock).
class SteadyClock final : public Clock {
 public:
  SteadyClock();
  double now() const override;
  bool wait_until(double t, std::stop_token stop) override;

 private:
  std::chrono::steady_clock::time_point origin_;
  std::mutex mutex_;
  std::condition_variable_any cv_;
};

/// Simulated time that moves only when told to.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(double start = 0.0) : now_(start) {}
  double now() const override;
  bool wait_until(double t, std::stop_token stop) override;

  void advance(double seconds);
  void set(double t);

 private:
  mutable std::mutex mutex_;
  std::condition_variable_any cv_;
  double now_;
};

/// Simulated time running `speedup` times faster than the wall clock.
class ScaledClock final : public Clock {
 public:
  explicit ScaledClock(double speedup);
  double now() const override;
  bool wait_until(double t, std::stop_token stop) override;

 private:
  double speedup_;
  std::chrono::steady_clock::time_point origin_;
  std::mutex mutex_;
  std::condition_variable_any cv_;
};

}  // namespace epochwatt
