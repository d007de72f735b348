#pragma once

// Timing, speedup and cost accounting for a campaign run on the local
// worker pool, billed as if each worker were a rented virtual machine.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include "mcpar/errors.hpp"

namespace mcpar {

inline constexpr double kBytesPerMB = 1024.0 * 1024.0;

struct TimingBreakdown {
  double split_ms = 0.0;
  double process_ms = 0.0;
  double merge_ms = 0.0;
  double total_ms = 0.0;
  std::size_t n_tasks = 0;
  std::size_t n_workers = 0;
};

enum class Billing {
  hourly,     // every started hour of every worker is charged
  fractional  // exact wall time
};

struct PriceSheet {
  double vm_hour_price = 0.0;
  /// Per MB kept in storage, charged as one month.
  double storage_price = 0.0;
  /// Per MB of outbound transfer; inbound is free.
  double egress_price = 0.0;
  Billing billing = Billing::hourly;

  void validate() const {
    if (!(vm_hour_price >= 0.0) || !(storage_price >= 0.0) || !(egress_price >= 0.0)) {
      throw ConfigError("prices must be non-negative");
    }
  }
};

/// Serial baseline estimated from the mean time of one task.
inline double extrapolate_serial(double avg_task_ms, std::size_t n_tasks) {
  if (!(avg_task_ms > 0.0)) throw InvalidParams("average task time must be positive");
  return avg_task_ms * static_cast<double>(n_tasks);
}

inline double speedup(double serial_ms, double total_ms) {
  if (!(total_ms > 0.0)) throw InvalidParams("total time must be positive");
  return serial_ms / total_ms;
}

inline double estimate_cost(const TimingBreakdown& t, std::uint64_t bytes_stored, std::uint64_t bytes_egress,
                            const PriceSheet& prices) {
  prices.validate();
  if (t.total_ms < 0.0) throw InvalidParams("negative run time");
  const double hours = t.total_ms / 3.6e6;
  const double billed_hours = prices.billing == Billing::hourly ? std::ceil(hours) : hours;
  const double vm = static_cast<double>(t.n_workers) * billed_hours * prices.vm_hour_price;
  const double storage = static_cast<double>(bytes_stored) / kBytesPerMB * prices.storage_price;
  const double egress = static_cast<double>(bytes_egress) / kBytesPerMB * prices.egress_price;
  return vm + storage + egress;
}

}  // namespace mcpar
