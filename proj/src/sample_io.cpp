#include "dualsim/bench.hpp"

#include <json.hpp>
#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dualsim {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "dualsim-samples";

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    v = to_little(v);
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_ints(const std::vector<int>& v) {
    put<uint64_t>(v.size());
    for (int x : v) put<int64_t>(x);
  }
  void put_doubles(const double* data, size_t n) {
    put<uint64_t>(n);
    for (size_t i = 0; i < n; ++i) put<double>(data[i]);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const char* data, size_t size) : data_(data), size_(size) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > size_) throw Error("sample file: truncated block");
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  size_t get_len(size_t elem) {
    const uint64_t n = get<uint64_t>();
    if (n > (size_ - pos_) / elem) throw Error("sample file: truncated array");
    return static_cast<size_t>(n);
  }
  std::vector<int> get_ints() {
    std::vector<int> v(get_len(8));
    for (int& x : v) x = static_cast<int>(get<int64_t>());
    return v;
  }
  std::vector<double> get_doubles() {
    std::vector<double> v(get_len(8));
    for (double& x : v) x = get<double>();
    return v;
  }
  bool done() const { return pos_ == size_; }

 private:
  const char* data_;
  size_t size_;
  size_t pos_ = 0;
};

std::string encode(const ProblemSample& s) {
  Writer w;
  w.put<int64_t>(s.n_b);
  w.put<int64_t>(s.n_j);
  w.put<int64_t>(s.n_l);
  w.put<int64_t>(s.n_c);
  w.put<int64_t>(static_cast<int64_t>(s.category));
  w.put<int64_t>(s.jacobian_rank);
  w.put<double>(s.dt);
  w.put<double>(s.mass_ratio);
  w.put<uint64_t>(s.delassus.rows());
  w.put<uint64_t>(s.delassus.cols());
  // Row-major.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> D = s.delassus;
  w.put_doubles(D.data(), static_cast<size_t>(D.size()));
  w.put_doubles(s.free_velocity.data(), static_cast<size_t>(s.free_velocity.size()));
  w.put_doubles(s.mus.data(), s.mus.size());
  w.put_ints(s.joint_dims);
  w.put_ints(s.joint_offsets);
  w.put_ints(s.limit_offsets);
  return w.bytes();
}

ProblemSample decode(const char* data, size_t size) {
  Reader r(data, size);
  ProblemSample s;
  s.n_b = static_cast<int>(r.get<int64_t>());
  s.n_j = static_cast<int>(r.get<int64_t>());
  s.n_l = static_cast<int>(r.get<int64_t>());
  s.n_c = static_cast<int>(r.get<int64_t>());
  const int64_t cat = r.get<int64_t>();
  if (cat < 0 || cat > static_cast<int64_t>(SampleCategory::kDenseConstraints)) {
    throw Error("sample file: invalid category");
  }
  s.category = static_cast<SampleCategory>(cat);
  s.jacobian_rank = static_cast<int>(r.get<int64_t>());
  s.dt = r.get<double>();
  s.mass_ratio = r.get<double>();
  const uint64_t rows = r.get<uint64_t>();
  const uint64_t cols = r.get<uint64_t>();
  const std::vector<double> d = r.get_doubles();
  if (rows * cols != d.size()) throw Error("sample file: matrix size mismatch");
  s.delassus = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                              Eigen::RowMajor>>(d.data(), rows, cols);
  const std::vector<double> v = r.get_doubles();
  s.free_velocity = Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
  s.mus = r.get_doubles();
  s.joint_dims = r.get_ints();
  s.joint_offsets = r.get_ints();
  s.limit_offsets = r.get_ints();
  if (!r.done()) throw Error("sample file: trailing bytes in block");
  return s;
}

uint32_t checksum(const std::string& bytes) {
  return static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

void write_samples(const std::string& path, const std::vector<ProblemSample>& samples) {
  nlohmann::json header;
  header["format"] = kFormatName;
  header["version"] = kFormatVersion;
  header["count"] = samples.size();
  header["byte_order"] = "little";
  nlohmann::json blocks = nlohmann::json::array();
  std::string body;
  for (const auto& s : samples) {
    s.validate();
    const std::string block = encode(s);
    blocks.push_back({{"offset", body.size()}, {"size", block.size()}, {"crc32", checksum(block)}});
    body += block;
  }
  header["blocks"] = blocks;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << header.dump() << '\n';
  os.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!os) throw Error("write failed for '" + path + "'");
}

std::vector<ProblemSample> read_samples(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw Error("sample file: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("sample file: header parse error: ") + e.what());
  }
  if (!header.is_object() || header.value("format", "") != kFormatName) {
    throw Error("sample file: unknown format");
  }
  if (header.value("version", -1) != kFormatVersion) {
    throw Error("sample file: unsupported version");
  }
  const std::string body((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::vector<ProblemSample> out;
  try {
    const auto& blocks = header.at("blocks");
    if (!blocks.is_array() || blocks.size() != header.at("count").get<size_t>()) {
      throw Error("sample file: block count mismatch");
    }
    for (const auto& b : blocks) {
      const size_t off = b.at("offset").get<size_t>();
      const size_t size = b.at("size").get<size_t>();
      if (off > body.size() || size > body.size() - off) throw Error("sample file: truncated");
      const std::string block = body.substr(off, size);
      if (checksum(block) != b.at("crc32").get<uint32_t>()) {
        throw Error("sample file: checksum mismatch");
      }
      ProblemSample s = decode(block.data(), block.size());
      s.validate();
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("sample file: bad header: ") + e.what());
  }
  return out;
}

}  // namespace dualsim
