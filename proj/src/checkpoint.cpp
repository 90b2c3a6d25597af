// SPDX-License-Identifier: Apache-2.0

#include "hip/trainer.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace hip {

namespace {

constexpr std::array<char, 8> kMagic{'H', 'I', 'P', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <typename T>
  void pod(T value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void arrays(const std::map<std::string, ad::Matrix>& named) {
    pod(static_cast<std::uint64_t>(named.size()));
    for (const auto& [name, m] : named) {
      str(name);
      pod(static_cast<std::uint64_t>(m.rows()));
      pod(static_cast<std::uint64_t>(m.cols()));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) pod(m(i, j));
    }
  }
  const std::vector<char>& bytes() const { return bytes_; }
  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string source)
      : bytes_(std::move(bytes)), source_(std::move(source)) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::map<std::string, ad::Matrix> arrays() {
    std::map<std::string, ad::Matrix> out;
    const auto count = pod<std::uint64_t>();
    for (std::uint64_t k = 0; k < count; ++k) {
      std::string name = str();
      const auto rows = pod<std::uint64_t>();
      const auto cols = pod<std::uint64_t>();
      if (rows != 0 && cols > (bytes_.size() - pos_) / sizeof(double) / rows)
        throw std::runtime_error(source_ + ": truncated checkpoint (array " + name + ")");
      ad::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = pod<double>();
      out.emplace(std::move(name), std::move(m));
    }
    return out;
  }
  void read_magic() {
    need(kMagic.size());
    if (std::memcmp(bytes_.data(), kMagic.data(), kMagic.size()) != 0)
      throw std::runtime_error(source_ + ": not a checkpoint (bad magic)");
    pos_ += kMagic.size();
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error(source_ + ": truncated checkpoint");
  }

  std::vector<char> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  Writer w;
  w.bytes().insert(w.bytes().end(), kMagic.begin(), kMagic.end());
  w.pod(Checkpoint::kVersion);
  w.str(to_config_text(c.config));
  w.pod(static_cast<std::uint32_t>(c.num_entities));
  w.pod(static_cast<std::uint32_t>(c.num_relations));
  w.pod(c.epoch);
  w.pod(c.optimizer.config.learning_rate);
  w.pod(c.optimizer.config.beta1);
  w.pod(c.optimizer.config.beta2);
  w.pod(c.optimizer.config.epsilon);
  w.pod(c.optimizer.step);
  std::map<std::string, ad::Matrix> params(c.parameters.begin(), c.parameters.end());
  w.arrays(params);
  w.arrays(c.optimizer.first_moment);
  w.arrays(c.optimizer.second_moment);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());

  r.read_magic();
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion)
    throw CheckpointVersionError(path.string() + ": checkpoint version " + std::to_string(version) +
                                 ", expected " + std::to_string(Checkpoint::kVersion));
  Checkpoint c;
  c.config = parse_config_text(r.str());
  c.num_entities = static_cast<EntityId>(r.pod<std::uint32_t>());
  c.num_relations = static_cast<RelationId>(r.pod<std::uint32_t>());
  c.epoch = r.pod<std::uint64_t>();
  c.optimizer.config.learning_rate = r.pod<double>();
  c.optimizer.config.beta1 = r.pod<double>();
  c.optimizer.config.beta2 = r.pod<double>();
  c.optimizer.config.epsilon = r.pod<double>();
  c.optimizer.step = r.pod<std::uint64_t>();
  for (auto& [name, m] : r.arrays()) c.parameters.add(name, std::move(m));
  c.optimizer.first_moment = r.arrays();
  c.optimizer.second_moment = r.arrays();
  if (!r.at_end()) throw std::runtime_error(path.string() + ": trailing bytes after checkpoint");
  return c;
}

}  // namespace hip
