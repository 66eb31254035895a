#include "fedgate/cluster.hpp"

#include <algorithm>
#include <cmath>

#include "fedgate/authz.hpp"

namespace fedgate {

Cluster::Cluster(SimConfig config) : config_(config), rng_(config.seed) {
  if (config_.heartbeatInterval <= 0 || config_.expiryCheckInterval <= 0 ||
      config_.heartbeatTimeout <= 0) {
    throw Error(ErrorCode::InvalidArgument, "heartbeat intervals must be positive");
  }
  if (!(config_.blockSizeMB > 0) || !(config_.bandwidthMBps > 0)) {
    throw Error(ErrorCode::InvalidArgument, "block size and bandwidth must be positive");
  }
  if (config_.replicationFactor == 0) throw Error(ErrorCode::InvalidArgument, "replication factor 0");
}

void Cluster::add_node(const std::string& nodeId, const std::string& rackId) {
  if (nodeId.empty() || rackId.empty()) throw Error(ErrorCode::InvalidArgument, "empty node or rack id");
  if (!nodes_.emplace(nodeId, rackId).second) throw Error(ErrorCode::DuplicateNode, nodeId);
}

const std::string& Cluster::rack_of(const std::string& nodeId) const {
  auto it = nodes_.find(nodeId);
  if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, nodeId);
  return it->second;
}

std::vector<std::string> Cluster::racks() const {
  std::set<std::string> out;
  for (const auto& [_, rack] : nodes_) out.insert(rack);
  return {out.begin(), out.end()};
}

void Cluster::add_namenode(const std::string& namespaceId, const std::string& rackId,
                           FileAttrs rootAttrs) {
  if (nameNodes_.contains(namespaceId)) throw Error(ErrorCode::DuplicateNode, namespaceId);
  add_node(namespaceId, rackId);
  NameNodeState nn{namespaceId, NamespaceTree(std::move(rootAttrs)), {}, LocalAuditLog(namespaceId), {}};
  nn.blockKey = random_secret(rng_);
  nameNodes_.emplace(namespaceId, std::move(nn));
  for (auto& [_, dn] : dataNodes_) register_with(dn, namespaceId);
}

void Cluster::register_with(DataNodeState& dn, const std::string& namespaceId) {
  dn.lastHeartbeat[namespaceId] = now_;
  dn.alivePerNN[namespaceId] = true;
  ++counters_.registrationAuthEvents;
}

void Cluster::register_datanode(const std::string& nodeId, const std::string& rackId,
                                const std::map<std::string, HandshakeTicket>* tickets) {
  if (dataNodes_.contains(nodeId) || nodes_.contains(nodeId)) throw Error(ErrorCode::DuplicateNode, nodeId);
  if (config_.secureMode) {
    if (tickets == nullptr || !authoritySecret_) {
      throw Error(ErrorCode::AuthenticationRequired, nodeId + " presented no tickets");
    }
    for (const auto& [ns, _] : nameNodes_) {
      auto it = tickets->find(ns);
      if (it == tickets->end() ||
          validate_token(it->second, *authoritySecret_, node_now(ns)) != TokenStatus::Valid) {
        throw Error(ErrorCode::AuthenticationRequired, nodeId + " has no valid ticket for " + ns);
      }
    }
  }
  add_node(nodeId, rackId);
  DataNodeState dn;
  dn.nodeId = nodeId;
  for (const auto& [ns, _] : nameNodes_) register_with(dn, ns);
  dataNodes_.emplace(nodeId, std::move(dn));
}

void Cluster::tick(ClusterTime dtSeconds) {
  if (dtSeconds <= 0) throw Error(ErrorCode::InvalidArgument, "tick needs dt > 0");
  const ClusterTime target = now_ + dtSeconds;
  while (true) {
    const ClusterTime nextBeat = (now_ / config_.heartbeatInterval + 1) * config_.heartbeatInterval;
    const ClusterTime nextCheck = (now_ / config_.expiryCheckInterval + 1) * config_.expiryCheckInterval;
    const ClusterTime t = std::min(nextBeat, nextCheck);
    if (t > target) break;
    now_ = t;
    if (t % config_.heartbeatInterval == 0) {
      for (auto& [id, dn] : dataNodes_) {
        if (dn.silenced) continue;
        for (auto& [ns, last] : dn.lastHeartbeat) {
          last = t;
          dn.alivePerNN[ns] = true;
          ++counters_.heartbeats[{id, ns}];
        }
      }
    }
    if (t % config_.expiryCheckInterval == 0) {
      for (auto& [id, dn] : dataNodes_) {
        for (auto& [ns, last] : dn.lastHeartbeat) {
          if (t - last >= config_.heartbeatTimeout) dn.alivePerNN[ns] = false;
        }
      }
    }
  }
  now_ = target;
}

void Cluster::silence_datanode(const std::string& nodeId) {
  auto it = dataNodes_.find(nodeId);
  if (it == dataNodes_.end()) throw Error(ErrorCode::UnknownNode, nodeId);
  it->second.silenced = true;
}

void Cluster::resume_datanode(const std::string& nodeId) {
  auto it = dataNodes_.find(nodeId);
  if (it == dataNodes_.end()) throw Error(ErrorCode::UnknownNode, nodeId);
  it->second.silenced = false;
}

void Cluster::set_node_clock_offset(const std::string& nodeId, ClusterTime offsetSeconds) {
  if (!nodes_.contains(nodeId)) throw Error(ErrorCode::UnknownNode, nodeId);
  clockOffsets_[nodeId] = offsetSeconds;
}

ClusterTime Cluster::node_now(const std::string& nodeId) const {
  if (!nodes_.contains(nodeId)) throw Error(ErrorCode::UnknownNode, nodeId);
  auto it = clockOffsets_.find(nodeId);
  return now_ + (it == clockOffsets_.end() ? 0 : it->second);
}

bool Cluster::is_live(const std::string& namespaceId, const std::string& dataNode) const {
  auto it = dataNodes_.find(dataNode);
  if (it == dataNodes_.end()) return false;
  auto alive = it->second.alivePerNN.find(namespaceId);
  return alive != it->second.alivePerNN.end() && alive->second;
}

std::vector<std::string> Cluster::live_datanodes(const std::string& namespaceId) const {
  std::vector<std::string> out;
  for (const auto& [id, _] : dataNodes_) {
    if (is_live(namespaceId, id)) out.push_back(id);
  }
  return out;
}

Proximity Cluster::proximity(const std::string& reader, const std::string& node) const {
  if (reader == node) return Proximity::Local;
  return rack_of(reader) == rack_of(node) ? Proximity::SameRack : Proximity::RemoteRack;
}

std::string Cluster::pick(std::vector<std::string> candidates) {
  std::uniform_int_distribution<std::size_t> dist(0, candidates.size() - 1);
  return candidates[dist(rng_)];
}

std::vector<std::string> Cluster::place_replicas(const std::string& namespaceId,
                                                 const std::string& writerNode, std::size_t factor) {
  if (factor == 0) throw Error(ErrorCode::InvalidArgument, "replication factor must be >= 1");
  namenode(namespaceId);
  const auto live = live_datanodes(namespaceId);
  if (live.size() < factor) {
    throw Error(ErrorCode::InsufficientNodes, std::to_string(live.size()) + " live DataNodes for factor " +
                                                  std::to_string(factor));
  }

  std::vector<std::string> chosen;
  auto unused = [&](auto&& predicate) {
    std::vector<std::string> out;
    for (const auto& id : live) {
      if (std::find(chosen.begin(), chosen.end(), id) == chosen.end() && predicate(id)) out.push_back(id);
    }
    return out;
  };
  auto any = [](const std::string&) { return true; };
  auto take = [&](auto&& predicate) {
    auto candidates = unused(predicate);
    if (candidates.empty()) candidates = unused(any);
    chosen.push_back(pick(std::move(candidates)));
  };

  // First replica: the writer itself when it hosts a live DataNode.
  if (std::find(live.begin(), live.end(), writerNode) != live.end()) {
    chosen.push_back(writerNode);
  } else {
    chosen.push_back(pick(live));
  }
  const std::string localRack = rack_of(chosen.front());
  if (factor >= 2) take([&](const std::string& id) { return rack_of(id) != localRack; });
  if (factor >= 3) take([&](const std::string& id) { return rack_of(id) == localRack; });

  // Remaining replicas: cycle over racks, least-used racks first.
  std::size_t cursor = 0;
  while (chosen.size() < factor) {
    std::map<std::string, std::size_t> usage;
    for (const auto& rack : racks()) usage[rack] = 0;
    for (const auto& id : chosen) ++usage[rack_of(id)];
    std::vector<std::string> order;
    for (const auto& [rack, _] : usage) order.push_back(rack);
    std::stable_sort(order.begin(), order.end(),
                     [&](const auto& a, const auto& b) { return usage[a] < usage[b]; });
    bool placed = false;
    for (std::size_t i = 0; i < order.size() && !placed; ++i) {
      const auto& rack = order[(cursor + i) % order.size()];
      auto candidates = unused([&](const std::string& id) { return rack_of(id) == rack; });
      if (!candidates.empty()) {
        chosen.push_back(pick(std::move(candidates)));
        placed = true;
      }
    }
    ++cursor;
    if (!placed) throw Error(ErrorCode::InsufficientNodes, "no unused live DataNode left");
  }
  return chosen;
}

std::string Cluster::select_replica(const std::string& namespaceId, const std::string& readerNode,
                                    const Block& block) const {
  const std::string* best = nullptr;
  Proximity bestClass = Proximity::RemoteRack;
  for (const auto& node : block.replicas) {
    if (!is_live(namespaceId, node)) continue;
    const auto cls = proximity(readerNode, node);
    if (best == nullptr || cls < bestClass || (cls == bestClass && node < *best)) {
      best = &node;
      bestClass = cls;
    }
  }
  if (best == nullptr) throw Error(ErrorCode::NoLiveReplica, block.blockId);
  return *best;
}

void Cluster::mkdir(const std::string& namespaceId, const std::string& path, FileAttrs attrs,
                    std::set<std::string> tags) {
  Inode dir;
  dir.isDirectory = true;
  dir.attrs = std::move(attrs);
  dir.tags = std::move(tags);
  namenode(namespaceId).tree.insert(path, std::move(dir));
}

FileEntry Cluster::write_file(const std::string& namespaceId, const std::string& path, double sizeMB,
                              const std::string& creator, const std::string& writerNode,
                              std::size_t authEvents) {
  if (sizeMB < 0 || !std::isfinite(sizeMB)) throw Error(ErrorCode::InvalidArgument, "negative file size");
  auto& nn = namenode(namespaceId);
  require_normalized(path);
  if (nn.tree.exists(path)) throw Error(ErrorCode::FileExists, path);
  const auto parent = parent_path(path);
  const auto& parentInode = nn.tree.at(*parent);
  auto attrs = inherit_acl_on_create(parentInode, creator);
  ++counters_.clientCalls;

  std::vector<double> sizes;
  if (sizeMB == 0) {
    sizes.push_back(0.0);
  } else {
    const auto full = static_cast<std::size_t>(std::floor(sizeMB / config_.blockSizeMB));
    sizes.assign(full, config_.blockSizeMB);
    const double rest = sizeMB - static_cast<double>(full) * config_.blockSizeMB;
    if (rest > 1e-9) sizes.push_back(rest);
  }

  std::vector<Block> blocks;
  for (double s : sizes) {
    Block b;
    b.blockId = "blk_" + std::to_string(nextBlock_++);
    b.fileId = namespaceId + ":" + path;
    b.sizeMB = s;
    b.replicas = place_replicas(namespaceId, writerNode, config_.replicationFactor);
    blocks.push_back(std::move(b));
  }

  Inode file;
  file.attrs = attrs;
  file.sizeMB = sizeMB;
  FileEntry entry{namespaceId, path, sizeMB, {}, attrs, 0.0};
  for (auto& b : blocks) {
    file.blocks.push_back(b.blockId);
    entry.blocks.push_back(b.blockId);
    for (const auto& node : b.replicas) dataNodes_.at(node).storedReplicas.insert(b.blockId);
    nn.blockPool.emplace(b.blockId, std::move(b));
  }
  nn.tree.insert(path, std::move(file));
  entry.elapsedSeconds = sizeMB / config_.bandwidthMBps +
                         config_.perCallAuthLatency * static_cast<double>(authEvents);
  return entry;
}

ReadResult Cluster::read_file(const std::string& readerNode, const std::string& namespaceId,
                              const std::string& path,
                              const std::map<std::string, BlockToken>* blockTokens,
                              std::size_t authEvents) {
  const auto& nn = namenode(namespaceId);
  const auto& inode = nn.tree.at(path);
  if (inode.isDirectory) throw Error(ErrorCode::InvalidArgument, path + " is a directory");
  ++counters_.clientCalls;

  std::vector<std::string> sources;
  for (const auto& id : inode.blocks) sources.push_back(select_replica(namespaceId, readerNode, nn.blockPool.at(id)));

  if (config_.secureMode) {
    for (std::size_t i = 0; i < inode.blocks.size(); ++i) {
      const auto& id = inode.blocks[i];
      ++counters_.blockTokenChecks;
      const BlockToken* token = nullptr;
      if (blockTokens != nullptr) {
        auto it = blockTokens->find(id);
        if (it != blockTokens->end()) token = &it->second;
      }
      if (token == nullptr) throw Error(ErrorCode::TokenInvalid, "no block token for " + id);
      if (token->blockId != id || !token->modes.contains(OpKind::Read)) {
        throw Error(ErrorCode::TokenInvalid, "block token does not cover Read on " + id);
      }
      const auto status = validate_token(*token, nn.blockKey, node_now(sources[i]));
      if (status != TokenStatus::Valid) {
        throw Error(ErrorCode::TokenInvalid, id + " token " + std::string(to_string(status)) + " at " + sources[i]);
      }
    }
  }

  ReadResult result;
  for (std::size_t i = 0; i < inode.blocks.size(); ++i) {
    const auto& block = nn.blockPool.at(inode.blocks[i]);
    result.bytesMB += block.sizeMB;
    result.elapsedSeconds += block.sizeMB / config_.bandwidthMBps;
    if (proximity(readerNode, sources[i]) == Proximity::RemoteRack) {
      ++result.remoteBlocks;
      result.elapsedSeconds += config_.remoteRackPenalty;
    }
    result.servedBy.push_back(sources[i]);
  }
  result.elapsedSeconds += config_.perCallAuthLatency * static_cast<double>(authEvents);
  return result;
}

const NameNodeState& Cluster::namenode(const std::string& namespaceId) const {
  auto it = nameNodes_.find(namespaceId);
  if (it == nameNodes_.end()) throw Error(ErrorCode::UnknownService, namespaceId);
  return it->second;
}

NameNodeState& Cluster::namenode(const std::string& namespaceId) {
  auto it = nameNodes_.find(namespaceId);
  if (it == nameNodes_.end()) throw Error(ErrorCode::UnknownService, namespaceId);
  return it->second;
}

std::vector<std::string> Cluster::namenode_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : nameNodes_) out.push_back(id);
  return out;
}

const DataNodeState& Cluster::datanode(const std::string& nodeId) const {
  auto it = dataNodes_.find(nodeId);
  if (it == dataNodes_.end()) throw Error(ErrorCode::UnknownNode, nodeId);
  return it->second;
}

std::vector<std::string> Cluster::datanode_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : dataNodes_) out.push_back(id);
  return out;
}

}  // namespace fedgate
