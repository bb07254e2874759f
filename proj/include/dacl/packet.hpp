#pragma once

#include <cstdint>
#include <vector>

#include "dacl/netmodel.hpp"

namespace dacl {

using PacketId = std::int64_t;

struct Packet {
  PacketId id = 0;
  CommodityId commodity = 0;
  NodeId source = 0;
  std::int64_t birth = 0;     // first slot the packet can be served in
  int hops = 0;
  std::int64_t delivery = -1; // slot boundary at which it reached the destination
};

/// Append-only packet storage; queues hold ids into it.
class PacketPool {
 public:
  PacketId create(CommodityId d, NodeId source, std::int64_t birth) {
    const PacketId id = static_cast<PacketId>(packets_.size());
    packets_.push_back({id, d, source, birth, 0, -1});
    return id;
  }
  Packet& at(PacketId id) { return packets_[static_cast<std::size_t>(id)]; }
  const Packet& at(PacketId id) const { return packets_[static_cast<std::size_t>(id)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(packets_.size()); }

 private:
  std::vector<Packet> packets_;
};

}  // namespace dacl
