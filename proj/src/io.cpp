#include "uavlora/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "uavlora/error.hpp"

namespace uavlora {

using nlohmann::json;

namespace {

json position_json(const Position3D& p) { return {{"x", p.x}, {"y", p.y}, {"z", p.z}}; }

Position3D position_from(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
}

json parse_document(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed ") + what + " document: " + e.what());
  }
}

}  // namespace

std::string topology_to_json(const Topology& topo) {
  json eds = json::array();
  for (std::size_t i = 0; i < topo.size(); ++i) {
    json e = position_json(topo.eds[i]);
    e["shadow_los_db"] = topo.shadowing[i].los_db;
    e["shadow_nlos_db"] = topo.shadowing[i].nlos_db;
    eds.push_back(std::move(e));
  }
  json j{{"seed", topo.seed},
         {"area", {{"width_m", topo.area.width_m}, {"height_m", topo.area.height_m}}},
         {"gateway", position_json(topo.gateway)},
         {"eds", eds}};
  return j.dump(2);
}

Topology topology_from_json(const std::string& text) {
  const json j = parse_document(text, "topology");
  try {
    Topology topo;
    topo.seed = j.at("seed").get<std::uint64_t>();
    topo.area = {j.at("area").at("width_m").get<double>(), j.at("area").at("height_m").get<double>()};
    topo.gateway = position_from(j.at("gateway"));
    for (const auto& e : j.at("eds")) {
      topo.eds.push_back(position_from(e));
      topo.shadowing.push_back({e.value("shadow_los_db", 0.0), e.value("shadow_nlos_db", 0.0)});
    }
    topo.validate();
    return topo;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("incomplete topology document: ") + e.what());
  }
}

AllocationSummary summarize(const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg) {
  AllocationSummary s;
  s.energy_efficiency = energy_efficiency(alloc, topo, cfg);
  const ValidationReport report = validate_allocation(alloc, topo, cfg);
  std::vector<bool> bad(alloc.size(), false);
  for (const auto& v : report.violations) {
    if (v.kind != Violation::SfOverloaded && v.ed_index < bad.size()) bad[v.ed_index] = true;
  }
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    if (alloc[i] && !bad[i]) ++s.feasible_count;
  }
  return s;
}

std::string allocation_to_json(const AllocationState& alloc, const AllocationSummary& summary,
                               const std::string& scheme) {
  json eds = json::array();
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    if (alloc[i]) {
      eds.push_back({{"sf", alloc[i]->sf.value()}, {"tp_dbm", alloc[i]->tp.value}, {"skipped", false}});
    } else {
      eds.push_back({{"sf", nullptr}, {"tp_dbm", nullptr}, {"skipped", true}});
    }
  }
  json j{{"eds", eds}, {"summary", {{"ee", summary.energy_efficiency}, {"feasible_count", summary.feasible_count}}}};
  if (!scheme.empty()) j["scheme"] = scheme;
  return j.dump(2);
}

AllocationState allocation_from_json(const std::string& text) {
  const json j = parse_document(text, "allocation");
  try {
    const auto& eds = j.at("eds");
    AllocationState state(eds.size());
    for (std::size_t i = 0; i < eds.size(); ++i) {
      if (eds[i].at("skipped").get<bool>()) continue;
      state.assign(i, {SpreadingFactor(eds[i].at("sf").get<int>()), TransmitPowerDbm{eds[i].at("tp_dbm").get<double>()}});
    }
    return state;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("incomplete allocation document: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace uavlora
