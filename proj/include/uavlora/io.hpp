#pragma once

#include <string>

#include "uavlora/network.hpp"

namespace uavlora {

/// Topology document: positions in meters, per-ED shadowing draws, seed and area.
std::string topology_to_json(const Topology& topo);
Topology topology_from_json(const std::string& text);

struct AllocationSummary {
  double energy_efficiency = 0.0;
  /// Allocated EDs whose assignment passes every per-ED check.
  std::size_t feasible_count = 0;
};

AllocationSummary summarize(const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg);

/// Allocation document: per ED {sf, tp_dbm, skipped} plus {ee, feasible_count}.
std::string allocation_to_json(const AllocationState& alloc, const AllocationSummary& summary,
                               const std::string& scheme = {});
AllocationState allocation_from_json(const std::string& text);

std::string read_text_file(const std::string& path);
/// Writes through a temporary sibling and renames it into place.
void write_text_file_atomic(const std::string& path, const std::string& content);

}  // namespace uavlora
