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

#include "epochwatt/clock.hpp"

#include <cmath>
#include <stdexcept>

namespace epochwatt {
namespace {

using Seconds = std::chrono::duration<double>;

bool sleep_until(std::mutex& mutex, std::condition_variable_any& cv,
                 std::chrono::steady_clock::time_point deadline,
                 std::stop_token stop) {
  std::unique_lock lock(mutex);
  cv.wait_until(lock, stop, deadline, [] { return false; });
  return !stop.stop_requested();
}

}  // namespace

SteadyClock::SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

double SteadyClock::now() const {
  return Seconds(std::chrono::steady_clock::now() - origin_).count();
}

bool SteadyClock::wait_until(double t, std::stop_token stop) {
  const auto deadline =
      origin_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                    Seconds(t));
  return sleep_until(mutex_, cv_, deadline, stop);
}

double ManualClock::now() const {
  std::lock_guard lock(mutex_);
  return now_;
}

bool ManualClock::wait_until(double t, std::stop_token stop) {
  std::unique_lock lock(mutex_);
  return cv_.wait(lock, stop, [&] { return now_ >= t; });
}

void ManualClock::advance(double seconds) {
  if (!(seconds >= 0.0)) throw std::invalid_argument("clock cannot go back");
  {
    std::lock_guard lock(mutex_);
    now_ += seconds;
  }
  cv_.notify_all();
}

void ManualClock::set(double t) {
  {
    std::lock_guard lock(mutex_);
    if (t < now_) throw std::invalid_argument("clock cannot go back");
    now_ = t;
  }
  cv_.notify_all();
}

ScaledClock::ScaledClock(double speedup)
    : speedup_(speedup), origin_(std::chrono::steady_clock::now()) {
  if (!(speedup > 0.0) || !std::isfinite(speedup)) {
    throw std::invalid_argument("speedup must be positive");
  }
}

double ScaledClock::now() const {
  return speedup_ * Seconds(std::chrono::steady_clock::now() - origin_).count();
}

bool ScaledClock::wait_until(double t, std::stop_token stop) {
  const auto deadline =
      origin_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                    Seconds(t / speedup_));
  return sleep_until(mutex_, cv_, deadline, stop);
}

}  // namespace epochwatt
