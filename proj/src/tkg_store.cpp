// SPDX-License-Identifier: Apache-2.0

#include "hip/tkg_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hip {

// ---- snapshots ----------------------------------------------------------

void SnapshotGraph::push(const Edge& edge) {
  edges_.push_back(edge);
  adjacency_[edge.subject].emplace_back(edge.relation, edge.object);
}

void SnapshotGraph::add_event(EntityId subject, RelationId relation, EntityId object) {
  if (relation < 0 || relation >= num_relations_) {
    throw std::out_of_range("add_event: relation " + std::to_string(relation) +
                            " outside [0, " + std::to_string(num_relations_) + ")");
  }
  push({subject, relation, object});
  push({object, relation + num_relations_, subject});
}

void SnapshotGraph::add_edge(const Edge& edge) {
  if (edge.relation < 0 || edge.relation >= 2 * num_relations_) {
    throw std::out_of_range("add_edge: relation " + std::to_string(edge.relation) +
                            " outside [0, " + std::to_string(2 * num_relations_) + ")");
  }
  const RelationId inverse = edge.relation < num_relations_ ? edge.relation + num_relations_
                                                            : edge.relation - num_relations_;
  push(edge);
  push({edge.object, inverse, edge.subject});
}

std::span<const std::pair<RelationId, EntityId>> SnapshotGraph::neighbors(EntityId subject) const {
  auto it = adjacency_.find(subject);
  if (it == adjacency_.end()) return {};
  return it->second;
}

bool SnapshotGraph::contains(const Edge& edge) const {
  for (const auto& [r, o] : neighbors(edge.subject))
    if (r == edge.relation && o == edge.object) return true;
  return false;
}

std::vector<SnapshotGraph> build_snapshots(std::span<const Quadruple> quadruples,
                                           RelationId num_relations) {
  std::vector<const Quadruple*> order;
  order.reserve(quadruples.size());
  for (const Quadruple& q : quadruples) order.push_back(&q);
  std::stable_sort(order.begin(), order.end(),
                   [](const Quadruple* a, const Quadruple* b) { return a->time < b->time; });
  std::vector<SnapshotGraph> snapshots;
  for (const Quadruple* q : order) {
    if (snapshots.empty() || snapshots.back().time() != q->time)
      snapshots.emplace_back(q->time, num_relations);
    snapshots.back().add_event(q->subject, q->relation, q->object);
  }
  return snapshots;
}

// ---- dataset io ---------------------------------------------------------

namespace {

std::vector<std::int64_t> parse_fields(std::string_view line) {
  std::vector<std::int64_t> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r'))
      ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(line.data() + pos, line.data() + end, value);
    if (ec != std::errc() || ptr != line.data() + end) {
      throw std::invalid_argument("non-integer field '" + std::string(line.substr(pos, end - pos)) +
                                  "'");
    }
    fields.push_back(value);
    pos = end;
  }
  return fields;
}

}  // namespace

std::vector<Quadruple> read_quadruples(const std::filesystem::path& file, EntityId num_entities,
                                       RelationId num_relations) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::vector<Quadruple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto where = [&] { return file.string() + ":" + std::to_string(line_no) + ": "; };
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::int64_t> fields;
    try {
      fields = parse_fields(line);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(where() + "malformed line (" + e.what() + ")");
    }
    if (fields.size() < 4 || fields.size() > 5) {
      throw std::runtime_error(where() + "malformed line (expected 4 or 5 fields, got " +
                               std::to_string(fields.size()) + ")");
    }
    const Quadruple q{static_cast<EntityId>(fields[0]), static_cast<RelationId>(fields[1]),
                      static_cast<EntityId>(fields[2]), fields[3]};
    if (fields[0] < 0 || fields[0] >= num_entities || fields[2] < 0 ||
        fields[2] >= num_entities) {
      throw std::runtime_error(where() + "entity id out of range (|E| = " +
                               std::to_string(num_entities) + ")");
    }
    if (fields[1] < 0 || fields[1] >= num_relations) {
      throw std::runtime_error(where() + "relation id out of range (|R| = " +
                               std::to_string(num_relations) + ")");
    }
    if (fields[3] < 0) throw std::runtime_error(where() + "negative timestamp");
    out.push_back(q);
  }
  if (out.empty()) std::clog << "warning: " << file.string() << " holds no quadruples\n";
  return out;
}

DatasetBundle load_dataset(const std::filesystem::path& directory,
                           std::optional<Timestamp> time_gap) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(directory)) {
    throw std::runtime_error("dataset directory not found: " + directory.string());
  }
  DatasetBundle bundle;
  bundle.name = directory.filename().string();
  if (bundle.name.empty()) bundle.name = directory.parent_path().filename().string();
  {
    std::ifstream stat(directory / "stat.txt");
    if (!stat) throw std::runtime_error("missing stat.txt in " + directory.string());
    std::string line;
    std::getline(stat, line);
    std::vector<std::int64_t> fields;
    try {
      fields = parse_fields(line);
    } catch (const std::invalid_argument&) {
      fields.clear();
    }
    if (fields.size() < 2 || fields[0] <= 0 || fields[1] <= 0) {
      throw std::runtime_error((directory / "stat.txt").string() +
                               ":1: expected 'num_entities num_relations'");
    }
    bundle.num_entities = static_cast<EntityId>(fields[0]);
    bundle.num_relations = static_cast<RelationId>(fields[1]);
  }
  for (const char* required : {"train.txt", "test.txt"}) {
    if (!fs::exists(directory / required)) {
      throw std::runtime_error("missing " + std::string(required) + " in " + directory.string());
    }
  }
  bundle.train = read_quadruples(directory / "train.txt", bundle.num_entities, bundle.num_relations);
  bundle.test = read_quadruples(directory / "test.txt", bundle.num_entities, bundle.num_relations);
  if (fs::exists(directory / "valid.txt")) {
    bundle.valid =
        read_quadruples(directory / "valid.txt", bundle.num_entities, bundle.num_relations);
    bundle.has_valid = true;
  }

  Timestamp origin = std::numeric_limits<Timestamp>::max();
  for (const auto* split : {&bundle.train, &bundle.valid, &bundle.test})
    for (const Quadruple& q : *split) origin = std::min(origin, q.time);
  if (origin == std::numeric_limits<Timestamp>::max()) origin = 0;
  Timestamp gap = 0;
  for (const auto* split : {&bundle.train, &bundle.valid, &bundle.test})
    for (const Quadruple& q : *split) gap = std::gcd(gap, q.time - origin);
  if (time_gap) {
    if (*time_gap <= 0) throw std::invalid_argument("time gap must be positive");
    gap = *time_gap;
  }
  if (gap == 0) gap = 1;
  bundle.time_origin = origin;
  bundle.time_gap = gap;
  for (auto* split : {&bundle.train, &bundle.valid, &bundle.test})
    for (Quadruple& q : *split) {
      if ((q.time - origin) % gap != 0) {
        throw std::runtime_error("timestamp " + std::to_string(q.time) +
                                 " is not a multiple of the time gap " + std::to_string(gap));
      }
      q.time = (q.time - origin) / gap;
    }

  auto bounds = [](const std::vector<Quadruple>& split) {
    Timestamp lo = std::numeric_limits<Timestamp>::max(), hi = std::numeric_limits<Timestamp>::min();
    for (const Quadruple& q : split) {
      lo = std::min(lo, q.time);
      hi = std::max(hi, q.time);
    }
    return std::pair{lo, hi};
  };
  const auto [train_lo, train_hi] = bounds(bundle.train);
  const auto [valid_lo, valid_hi] = bounds(bundle.valid);
  const auto [test_lo, test_hi] = bounds(bundle.test);
  (void)train_lo;
  (void)test_hi;
  if (!bundle.valid.empty()) {
    if (!bundle.train.empty() && train_hi >= valid_lo)
      throw std::runtime_error("split ordering violated: train overlaps valid");
    if (!bundle.test.empty() && valid_hi >= test_lo)
      throw std::runtime_error("split ordering violated: valid overlaps test");
  } else if (!bundle.train.empty() && !bundle.test.empty() && train_hi >= test_lo) {
    throw std::runtime_error("split ordering violated: train overlaps test");
  }
  return bundle;
}

void write_quadruples(const std::filesystem::path& file, std::span<const Quadruple> quadruples) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (const Quadruple& q : quadruples)
    out << q.subject << '\t' << q.relation << '\t' << q.object << '\t' << q.time << '\n';
}

void write_dataset(const std::filesystem::path& directory, const DatasetBundle& bundle) {
  std::filesystem::create_directories(directory);
  auto raw = [&](const std::vector<Quadruple>& split) {
    std::vector<Quadruple> out = split;
    for (Quadruple& q : out) q.time = bundle.to_raw(q.time);
    return out;
  };
  write_quadruples(directory / "train.txt", raw(bundle.train));
  write_quadruples(directory / "test.txt", raw(bundle.test));
  if (bundle.has_valid) write_quadruples(directory / "valid.txt", raw(bundle.valid));
  std::ofstream stat(directory / "stat.txt");
  stat << bundle.num_entities << '\t' << bundle.num_relations << '\n';
}

DatasetBundle subsample_by_activity(const DatasetBundle& bundle, int min_events,
                                    Timestamp train_span, Timestamp test_span) {
  std::vector<int> events(static_cast<std::size_t>(bundle.num_entities), 0);
  for (const auto* split : {&bundle.train, &bundle.valid, &bundle.test})
    for (const Quadruple& q : *split) {
      ++events[static_cast<std::size_t>(q.subject)];
      if (q.object != q.subject) ++events[static_cast<std::size_t>(q.object)];
    }
  std::vector<EntityId> remap(events.size(), -1);
  EntityId next = 0;
  for (std::size_t e = 0; e < events.size(); ++e)
    if (events[e] >= min_events) remap[e] = next++;

  DatasetBundle out;
  out.name = bundle.name + "-active" + std::to_string(min_events);
  out.num_entities = next;
  out.num_relations = bundle.num_relations;
  out.time_gap = bundle.time_gap;
  out.time_origin = bundle.time_origin;
  for (const auto* split : {&bundle.train, &bundle.valid, &bundle.test})
    for (const Quadruple& q : *split) {
      const EntityId s = remap[static_cast<std::size_t>(q.subject)];
      const EntityId o = remap[static_cast<std::size_t>(q.object)];
      if (s < 0 || o < 0) continue;
      const Quadruple kept{s, q.relation, o, q.time};
      if (q.time < train_span)
        out.train.push_back(kept);
      else if (q.time < train_span + test_span)
        out.test.push_back(kept);
    }
  return out;
}

// ---- vocabulary ---------------------------------------------------------

void HistoryVocabulary::update(const SnapshotGraph& snapshot) {
  if (last_updated_ && snapshot.time() <= *last_updated_) {
    throw std::invalid_argument("vocabulary update out of order: snapshot " +
                                std::to_string(snapshot.time()) + " after " +
                                std::to_string(*last_updated_));
  }
  // Multi-hot per timestamp: duplicates within one snapshot count once.
  std::set<Edge> seen(snapshot.edges().begin(), snapshot.edges().end());
  for (const Edge& e : seen) counts_[key(e.subject, e.relation)][e.object] += 1;
  last_updated_ = snapshot.time();
}

int HistoryVocabulary::count(EntityId subject, RelationId relation, EntityId object) const {
  const auto* objects = this->objects(subject, relation);
  if (!objects) return 0;
  auto it = objects->find(object);
  return it == objects->end() ? 0 : it->second;
}

const std::map<EntityId, int>* HistoryVocabulary::objects(EntityId subject,
                                                          RelationId relation) const {
  auto it = counts_.find(key(subject, relation));
  return it == counts_.end() ? nullptr : &it->second;
}

Eigen::VectorXd HistoryVocabulary::count_vector(EntityId subject, RelationId relation,
                                                EntityId num_entities) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_entities);
  if (const auto* objects = this->objects(subject, relation))
    for (const auto& [o, c] : *objects) out(o) = c;
  return out;
}

Eigen::VectorXd window_count_vector(std::span<const SnapshotGraph* const> window,
                                    EntityId subject, RelationId relation,
                                    EntityId num_entities) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_entities);
  for (const SnapshotGraph* g : window) {
    std::set<EntityId> hit;
    for (const auto& [r, o] : g->neighbors(subject))
      if (r == relation) hit.insert(o);
    for (EntityId o : hit) out(o) += 1.0;
  }
  return out;
}

// ---- store --------------------------------------------------------------

void TemporalGraphStore::append(SnapshotGraph snapshot) {
  if (!snapshots_.empty() && snapshot.time() <= snapshots_.back().time()) {
    throw std::invalid_argument("snapshot " + std::to_string(snapshot.time()) +
                                " is not after " + std::to_string(snapshots_.back().time()));
  }
  vocabulary_.update(snapshot);
  for (const Edge& e : snapshot.edges()) first_contact_[e.subject].try_emplace(e.object, snapshot.time());
  snapshots_.push_back(std::move(snapshot));
}

std::optional<Timestamp> TemporalGraphStore::latest_time() const {
  if (snapshots_.empty()) return std::nullopt;
  return snapshots_.back().time();
}

std::vector<const SnapshotGraph*> TemporalGraphStore::window(Timestamp before, int size) const {
  auto end = std::lower_bound(snapshots_.begin(), snapshots_.end(), before,
                              [](const SnapshotGraph& g, Timestamp t) { return g.time() < t; });
  const auto available = static_cast<int>(end - snapshots_.begin());
  const int take = std::min(size, available);
  std::vector<const SnapshotGraph*> out;
  for (auto it = end - take; it != end; ++it) out.push_back(&*it);
  return out;
}

std::vector<EntityId> TemporalGraphStore::candidate_entities(EntityId subject,
                                                             Timestamp up_to) const {
  std::vector<EntityId> out;
  auto it = first_contact_.find(subject);
  if (it == first_contact_.end()) return out;
  for (const auto& [object, first] : it->second)
    if (first < up_to) out.push_back(object);
  return out;
}

}  // namespace hip
