#include "terla/netsim/topology.hpp"

#include <set>
#include <string>

#include "terla/error.hpp"

namespace terla::netsim {

std::size_t Segment::host_capacity() const {
  std::size_t n = 0;
  for (const auto& s : subnets) n += s.hosts.size();
  return n;
}

void NetworkTopology::validate() const {
  if (segments.empty()) throw ConfigError("topology has no segments");
  std::set<std::string> segment_ids, subnet_ids, host_ids;
  bool any_undefended = false, any_defended = false;
  for (const auto& seg : segments) {
    if (!segment_ids.insert(seg.id).second) throw ConfigError("duplicate segment id '" + seg.id + "'");
    if (seg.subnets.empty()) throw ConfigError("segment '" + seg.id + "' has no subnets");
    any_undefended = any_undefended || !seg.defended;
    any_defended = any_defended || seg.defended;
    for (const auto& sub : seg.subnets) {
      if (!subnet_ids.insert(sub.id).second) throw ConfigError("duplicate subnet id '" + sub.id + "'");
      if (sub.hosts.empty()) throw ConfigError("subnet '" + sub.id + "' has no hosts");
      if (sub.min_active && (*sub.min_active == 0 || *sub.min_active > sub.hosts.size())) {
        throw ConfigError("subnet '" + sub.id + "' min_active must lie in [1, " +
                          std::to_string(sub.hosts.size()) + "]");
      }
      for (const auto& h : sub.hosts) {
        if (!host_ids.insert(h.id).second) throw ConfigError("duplicate host id '" + h.id + "'");
        if (h.services.empty()) throw ConfigError("host '" + h.id + "' runs no services");
      }
    }
  }
  if (!any_undefended) throw ConfigError("topology needs an undefended segment for the attacker foothold");
  if (!any_defended) throw ConfigError("topology has no defended segment");
}

std::vector<std::size_t> NetworkTopology::defended_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i].defended) out.push_back(i);
  return out;
}

std::vector<std::size_t> NetworkTopology::undefended_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (!segments[i].defended) out.push_back(i);
  return out;
}

namespace {

Subnet make_subnet(const std::string& id, std::size_t hosts, std::size_t ot_hosts) {
  Subnet sub;
  sub.id = id;
  for (std::size_t i = 0; i < hosts; ++i) {
    HostSpec h;
    h.id = id + "_h" + std::to_string(i);
    h.is_ot = i < ot_hosts;
    h.services = {"svc0"};
    if (i % 2 == 1) h.services.push_back("svc1");
    sub.hosts.push_back(std::move(h));
  }
  return sub;
}

}  // namespace

NetworkTopology NetworkTopology::desk_default() {
  NetworkTopology topo;

  Segment contractor{"contractor", false, std::nullopt, {make_subnet("contractor_net", 3, 0)}};
  Segment zone_a{"op_zone_a", true, MissionPhase::Phase2A, {make_subnet("op_zone_a_net", 4, 1)}};
  Segment zone_b{"op_zone_b", true, MissionPhase::Phase2B, {make_subnet("op_zone_b_net", 6, 1)}};
  Segment office{"office", true, std::nullopt, {make_subnet("office_net", 8, 0)}};
  Segment hq{"hq", true, std::nullopt, {make_subnet("hq_admin", 4, 0), make_subnet("hq_public", 4, 0)}};

  topo.segments = {contractor, zone_a, zone_b, office, hq};
  return topo;
}

}  // namespace terla::netsim
