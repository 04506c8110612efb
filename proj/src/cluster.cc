#include "hail/cluster.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hail/error.h"

namespace hail {

namespace {

constexpr int kClientEndpointBase = 1000000;
constexpr char kDeadMarker[] = "DEAD";

using SteadyClock = std::chrono::steady_clock;

double SecondsSince(SteadyClock::time_point start) {
  return std::chrono::duration<double>(SteadyClock::now() - start).count();
}

uint64_t ParseUnsigned(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const uint64_t v = std::stoull(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  Throw(ErrorCode::kSyntaxError, "cluster config: " + key + " expects a non-negative integer, got " + value);
}

void ValidateFileName(const std::string& name) {
  const bool ok = !name.empty() && name.size() <= kMaxFileIdLength &&
                  std::all_of(name.begin(), name.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_';
                  }) &&
                  name[0] != '.';
  if (!ok) Throw(ErrorCode::kInvalidArgument, "file IDs use [A-Za-z0-9._-] and may not start with '.': " + name);
}

}  // namespace

// ---- configuration ---------------------------------------------------------

std::vector<int> ParseSortKeys(std::string_view text, const Schema* schema) {
  std::vector<int> keys;
  std::string s(text);
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) {
    if (tok == "NONE" || tok == "none" || tok == "-") {
      keys.push_back(0);
      continue;
    }
    std::string body = tok[0] == '@' ? tok.substr(1) : tok;
    if (!body.empty() && std::all_of(body.begin(), body.end(), ::isdigit)) {
      keys.push_back(std::stoi(body));
    } else if (schema != nullptr && schema->PositionOf(tok)) {
      keys.push_back(*schema->PositionOf(tok));
    } else {
      Throw(ErrorCode::kSyntaxError, "unknown sort key " + tok);
    }
  }
  return keys;
}

ClusterConfig ClusterConfig::FromText(std::string_view text) {
  ClusterConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string key;
    if (!(fields >> key)) continue;
    std::string rest;
    std::getline(fields, rest);
    rest.erase(0, rest.find_first_not_of(" \t"));
    rest.erase(rest.find_last_not_of(" \t\r") + 1);
    if (key == "datanodes") {
      c.datanodes = static_cast<int>(ParseUnsigned(key, rest));
    } else if (key == "map_slots") {
      c.map_slots = static_cast<int>(ParseUnsigned(key, rest));
    } else if (key == "replication") {
      c.replication = static_cast<int>(ParseUnsigned(key, rest));
    } else if (key == "sort_keys") {
      c.sort_keys = ParseSortKeys(rest);
    } else if (key == "block_size") {
      c.block_size = ParseUnsigned(key, rest);
    } else if (key == "partition_size") {
      c.partition_size = ParseUnsigned(key, rest);
    } else if (key == "expiry_seconds") {
      double s = 0;
      try {
        s = std::stod(rest);
      } catch (const std::exception&) {
        Throw(ErrorCode::kSyntaxError, "cluster config: bad expiry_seconds " + rest);
      }
      if (s < 0) Throw(ErrorCode::kSyntaxError, "cluster config: expiry_seconds must be >= 0");
      c.expiry = std::chrono::milliseconds(static_cast<int64_t>(s * 1000));
    } else if (key == "storage_root") {
      c.storage_root = rest;
    } else {
      Throw(ErrorCode::kSyntaxError, "cluster config: unknown key " + key);
    }
  }
  if (c.datanodes < 1 || c.map_slots < 1 || c.replication < 1 || c.block_size == 0 || c.partition_size == 0) {
    Throw(ErrorCode::kSyntaxError, "cluster config: counts and sizes must be positive");
  }
  if (!c.sort_keys.empty() && static_cast<int>(c.sort_keys.size()) != c.replication) {
    Throw(ErrorCode::kSyntaxError, "cluster config: need one sort key per replica");
  }
  return c;
}

ClusterConfig ClusterConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Throw(ErrorCode::kIoError, "cannot open cluster config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FromText(ss.str());
}

std::string ClusterConfig::ToText() const {
  std::ostringstream out;
  out << "datanodes " << datanodes << "\n"
      << "map_slots " << map_slots << "\n"
      << "replication " << replication << "\n";
  if (!sort_keys.empty()) {
    out << "sort_keys";
    for (int k : sort_keys) {
      if (k == 0) {
        out << " NONE";
      } else {
        out << " " << k;
      }
    }
    out << "\n";
  }
  out << "block_size " << block_size << "\n"
      << "partition_size " << partition_size << "\n"
      << "expiry_seconds " << expiry.count() / 1000.0 << "\n";
  if (!storage_root.empty()) out << "storage_root " << storage_root.string() << "\n";
  return out.str();
}

ReplicaConfig ReplicaConfig::FromCluster(const ClusterConfig& config) {
  ReplicaConfig r;
  r.replication = config.replication;
  r.sort_keys = config.sort_keys;
  r.partition_size = config.partition_size;
  return r;
}

std::vector<int> ReplicaConfig::KeysForPipeline() const {
  if (sort_keys.empty()) return std::vector<int>(replication, 0);
  return sort_keys;
}

void ReplicaConfig::Validate(const Schema& schema) const {
  if (replication < 1) Throw(ErrorCode::kInvalidArgument, "replication must be >= 1");
  if (partition_size == 0) Throw(ErrorCode::kInvalidArgument, "partition size must be >= 1");
  if (!sort_keys.empty() && static_cast<int>(sort_keys.size()) != replication) {
    Throw(ErrorCode::kInvalidArgument, "need exactly one sort key per replica");
  }
  for (int k : sort_keys) {
    if (k == 0) continue;
    if (!schema.HasPosition(k)) Throw(ErrorCode::kPositionOutOfRange, "sort key @" + std::to_string(k));
    if (!IsFixedSize(schema.at(k).type)) {
      Throw(ErrorCode::kUnsupportedKeyType, "sort key " + schema.at(k).name + " is VARCHAR");
    }
  }
}

// ---- cluster ---------------------------------------------------------------

struct Cluster::Session {
  struct Message {
    Bytes frame;
    int killed = 0;
  };
  int endpoint = 0;
  Channel<Message> inbox;
};

Cluster::Cluster(ClusterConfig config)
    : config_(std::move(config)), namenode_(config_.datanodes, config_.expiry) {
  if (config_.storage_root.empty()) Throw(ErrorCode::kInvalidArgument, "cluster needs a storage_root");
  std::filesystem::create_directories(config_.storage_root / "catalog");
  killed_at_.assign(config_.datanodes, Namenode::Clock::time_point::max());
  for (int d = 1; d <= config_.datanodes; ++d) {
    datanodes_.push_back(std::make_unique<Datanode>(d, config_.storage_root / ("dn" + std::to_string(d)), this,
                                                    &namenode_, &io_));
  }
  Restart();
}

Cluster::~Cluster() {
  {
    std::lock_guard lock(sessions_mu_);
    for (auto& [id, s] : sessions_) s->inbox.Close();
  }
  datanodes_.clear();
}

std::filesystem::path Cluster::CatalogPath(const std::string& name) const {
  return config_.storage_root / "catalog" / (name + ".meta");
}

void Cluster::Restart() {
  for (int d = 1; d <= config_.datanodes; ++d) {
    if (std::filesystem::exists(datanode(d).dir() / kDeadMarker)) {
      datanode(d).Kill();
      killed_at_[d - 1] = Namenode::Clock::now() - config_.expiry;
      namenode_.ReportKilled(d, killed_at_[d - 1]);
    }
  }
  for (const auto& entry : std::filesystem::directory_iterator(config_.storage_root / "catalog")) {
    if (entry.path().extension() != ".meta") continue;
    std::ifstream in(entry.path());
    FileEntry f;
    f.name = entry.path().stem().string();
    std::string schema_text;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string key;
      fields >> key;
      if (key == "blocks") {
        fields >> f.blocks;
      } else if (key == "replication") {
        fields >> f.replication;
      } else if (!key.empty()) {
        schema_text += line + "\n";
      }
    }
    f.schema = Schema::FromConfig(schema_text);
    namenode_.CommitFile(f);
  }
  for (int d = 1; d <= config_.datanodes; ++d) {
    for (const auto& [id, path] : datanode(d).StoredBlocks()) {
      std::optional<FileEntry> f = namenode_.File(id.file);
      if (!f || id.index >= f->blocks) continue;
      try {
        ReplicaFile replica(path);
        namenode_.RegisterReplica(id, DescribeReplica(d, replica.header(), replica.index()));
      } catch (const HailError&) {
        // A replica that fails verification is simply not served.
      }
    }
  }
}

Datanode& Cluster::datanode(int id) {
  if (id < 1 || id > config_.datanodes) Throw(ErrorCode::kInvalidArgument, "no datanode " + std::to_string(id));
  return *datanodes_[id - 1];
}

bool Cluster::IsUp(int id) const {
  if (id < 1 || id > config_.datanodes) return false;
  return datanodes_[id - 1]->alive();
}

Namenode::Clock::time_point Cluster::KilledAt(int id) const {
  std::lock_guard lock(sessions_mu_);
  return killed_at_.at(id - 1);
}

void Cluster::KillNode(int id, bool persist) {
  datanode(id).Kill();
  const auto now = Namenode::Clock::now();
  namenode_.ReportKilled(id, now);
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(sessions_mu_);
    killed_at_[id - 1] = now;
    for (auto& [e, s] : sessions_) sessions.push_back(s);
  }
  for (auto& s : sessions) s->inbox.Push({{}, id});
  if (persist) std::ofstream(datanode(id).dir() / kDeadMarker) << "dead\n";
}

void Cluster::ReviveNode(int id, bool persist) {
  datanode(id).Revive();
  namenode_.ReportRevived(id);
  {
    std::lock_guard lock(sessions_mu_);
    killed_at_[id - 1] = Namenode::Clock::time_point::max();
  }
  if (persist) {
    std::error_code ec;
    std::filesystem::remove(datanode(id).dir() / kDeadMarker, ec);
  }
}

std::filesystem::path Cluster::ReplicaPath(const BlockId& block, int id) const {
  if (id < 1 || id > config_.datanodes) Throw(ErrorCode::kInvalidArgument, "no datanode " + std::to_string(id));
  return datanodes_[id - 1]->BlockPath(block);
}

std::unique_ptr<ReplicaFile> Cluster::OpenReplica(const BlockId& block, int id) {
  Datanode* node = &datanode(id);
  return std::make_unique<ReplicaFile>(node->BlockPath(block), [node] { return node->alive(); }, &io_);
}

bool Cluster::Deliver(int endpoint, Bytes frame) {
  if (endpoint >= 1 && endpoint <= config_.datanodes) return datanodes_[endpoint - 1]->Deliver(std::move(frame));
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(endpoint);
    if (it == sessions_.end()) return false;
    s = it->second;
  }
  return s->inbox.Push({std::move(frame), 0});
}

std::shared_ptr<Cluster::Session> Cluster::OpenSession() {
  auto s = std::make_shared<Session>();
  std::lock_guard lock(sessions_mu_);
  s->endpoint = kClientEndpointBase + next_session_++;
  sessions_[s->endpoint] = s;
  return s;
}

void Cluster::CloseSession(int endpoint) {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(endpoint);
  if (it == sessions_.end()) return;
  it->second->inbox.Close();
  sessions_.erase(it);
}

void Cluster::AbortFile(const std::string& name) {
  // Let frames still travelling along pipelines settle: each round drains
  // every inbox once, and a frame can hop at most once per round.
  const int rounds = 2 * config_.datanodes + 1;
  for (int i = 0; i < rounds; ++i) {
    for (auto& d : datanodes_) d->RunInActor({});
  }
  for (auto& d : datanodes_) d->ForgetFile(name);
  for (auto& d : datanodes_) d->DeleteFile(name);
  namenode_.DropFile(name);
  std::error_code ec;
  std::filesystem::remove(CatalogPath(name), ec);
}

UploadReport Cluster::UploadFile(const std::string& name, const std::filesystem::path& input, const Schema& schema,
                                 const ReplicaConfig& replicas, const UploadOptions& options) {
  std::ifstream in(input, std::ios::binary);
  if (!in) Throw(ErrorCode::kIoError, "cannot open " + input.string());
  return Upload(name, in, schema, replicas, options);
}

UploadReport Cluster::Upload(const std::string& name, std::istream& input, const Schema& schema,
                             const ReplicaConfig& replicas, const UploadOptions& options) {
  ValidateFileName(name);
  replicas.Validate(schema);
  namenode_.ReserveFile(name);
  const auto start = SteadyClock::now();
  UploadReport report;
  report.file = name;
  std::shared_ptr<Session> session = OpenSession();

  struct InFlight {
    std::vector<int> pipeline;
    uint64_t last_seq = 0;
    uint64_t next_ack = 0;
  };
  std::map<uint64_t, InFlight> in_flight;

  auto fail = [&](const std::string& why) { Throw(ErrorCode::kUploadFailed, name + ": " + why); };

  // Consumes one message from the client inbox and checks it against the
  // ack ordering rules.
  auto await_one = [&] {
    const auto wait_start = SteadyClock::now();
    std::optional<Session::Message> msg = session->inbox.PopFor(options.ack_timeout);
    report.pipeline_seconds += SecondsSince(wait_start);
    if (!msg) fail("timed out waiting for acks");
    if (msg->killed != 0) {
      for (const auto& [index, f] : in_flight) {
        if (std::find(f.pipeline.begin(), f.pipeline.end(), msg->killed) != f.pipeline.end()) {
          fail("datanode " + std::to_string(msg->killed) + " died while block " + std::to_string(index) +
               " was in its pipeline");
        }
      }
      return;
    }
    const Ack ack = DecodeAck(msg->frame);
    auto it = in_flight.find(ack.block.index);
    if (ack.block.file != name || it == in_flight.end()) fail("ack for unknown block " + ack.block.ToString());
    InFlight& f = it->second;
    const std::string where = "block " + ack.block.ToString() + " packet " + std::to_string(ack.seq);
    if (ack.kind == AckKind::kCorrupt) {
      fail("CORRUPT chunk " + std::to_string(ack.chunk) + " of " + where + " reported by datanode " +
           std::to_string(ack.datanodes.empty() ? 0 : ack.datanodes.front()));
    }
    if (ack.kind == AckKind::kFailed) fail("pipeline failure on " + where);
    if (ack.seq != f.next_ack) fail("ack out of order on " + where + ", expected " + std::to_string(f.next_ack));
    const std::vector<int> expected(f.pipeline.rbegin(), f.pipeline.rend());
    if (ack.datanodes != expected) fail("ack chain does not match the pipeline on " + where);
    const AckKind want = ack.seq == f.last_seq ? AckKind::kBlockFlushed : AckKind::kPacketValidated;
    if (ack.kind != want) fail(std::string("unexpected ") + std::string(AckKindName(ack.kind)) + " on " + where);
    if (ack.seq == f.last_seq) {
      in_flight.erase(it);
    } else {
      f.next_ack++;
    }
  };

  try {
    BlockCutter cutter(input, schema, options.block_size.value_or(config_.block_size));
    const std::vector<int> keys = replicas.KeysForPipeline();
    while (true) {
      auto t0 = SteadyClock::now();
      std::optional<LogicalBlock> block = cutter.Next();
      report.parse_seconds += SecondsSince(t0);
      if (!block) break;
      report.rows += block->records.size();
      report.bad_records += block->bad_records.size();
      report.input_bytes += block->text_bytes;

      t0 = SteadyClock::now();
      const BlockId id{name, report.blocks++};
      const Bytes bytes = Serialize(ToPax(*block, schema));
      block.reset();
      const std::vector<int> pipeline = namenode_.AllocatePipeline(id, replicas.replication);
      // The namenode may still list a node killed within the expiry window;
      // setting up a pipeline through it fails like a refused connection.
      for (int d : pipeline) {
        if (!IsUp(d)) fail("datanode " + std::to_string(d) + " in the pipeline of " + id.ToString() + " is down");
      }
      PipelineSetup setup{pipeline, keys, replicas.partition_size, session->endpoint};
      std::vector<Packet> packets = Packetize(id, bytes, setup);
      report.convert_seconds += SecondsSince(t0);

      in_flight[id.index] = InFlight{pipeline, packets.size() - 1, 0};
      for (const Packet& p : packets) {
        Bytes frame = EncodePacket(p);
        if (options.mutate_frame) options.mutate_frame(id, p.seq, frame);
        report.bytes_sent += frame.size();
        if (!Deliver(pipeline.front(), std::move(frame))) {
          fail("first datanode " + std::to_string(pipeline.front()) + " is down");
        }
      }
      if (options.on_block_sent) options.on_block_sent(id);
      while (in_flight.size() >= std::max<size_t>(options.window, 1)) await_one();
    }
    while (!in_flight.empty()) await_one();

    FileEntry entry{name, report.blocks, replicas.replication, schema};
    {
      std::ofstream meta(CatalogPath(name), std::ios::trunc);
      meta << "blocks " << entry.blocks << "\n" << "replication " << entry.replication << "\n" << schema.ToConfig();
      if (!meta) Throw(ErrorCode::kIoError, "cannot write catalog entry for " + name);
    }
    namenode_.CommitFile(entry);
  } catch (...) {
    CloseSession(session->endpoint);
    AbortFile(name);
    namenode_.ReleaseFile(name);
    throw;
  }
  CloseSession(session->endpoint);
  report.wall_seconds = SecondsSince(start);
  return report;
}

}  // namespace hail
