#include "nlos/io/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "nlos/common/error.hpp"

namespace nlos::io {

namespace {

constexpr char kMagic[4] = {'N', 'L', 'T', '1'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  put(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string text(std::size_t n) {
    need(n, "name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated container while reading ") + what);
    }
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const ParamSet& tensors) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint64_t>(out, tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string& name = tensors.name(i);
    const Tensor& t = tensors.value(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(kDtypeF64);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) put<std::uint64_t>(out, e);
    for (double v : t.data()) put_f64(out, v);
  }
  return out;
}

ParamSet decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a tensor container (bad magic)");
  }
  Reader r(bytes);
  (void)r.get<std::uint32_t>("magic");
  const std::uint64_t count = r.get<std::uint64_t>("record count");
  ParamSet out;
  std::unordered_set<std::string> seen;
  for (std::uint64_t rec = 0; rec < count; ++rec) {
    const std::uint32_t len = r.get<std::uint32_t>("name length");
    std::string name = r.text(len);
    if (!seen.insert(name).second) throw FormatError("duplicate tensor name: " + name);
    const std::uint8_t dtype = r.get<std::uint8_t>("dtype");
    if (dtype != kDtypeF64) {
      throw FormatError("unsupported dtype " + std::to_string(dtype) + " for " + name);
    }
    const std::uint32_t rank = r.get<std::uint32_t>("rank");
    if (rank == 0) throw FormatError("tensor " + name + " has rank 0");
    r.need(8ull * rank, "extents");
    Shape shape(rank);
    std::uint64_t elements = 1;
    for (std::size_t& e : shape) {
      e = r.get<std::uint64_t>("extent");
      if (e == 0) throw FormatError("tensor " + name + " has a zero extent");
      if (elements > r.remaining() / e) throw FormatError("truncated payload for " + name);
      elements *= e;
    }
    r.need(elements * 8, "payload");
    std::vector<double> data(elements);
    for (double& v : data) v = std::bit_cast<double>(r.get<std::uint64_t>("payload"));
    out.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after the last record");
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_container(const std::filesystem::path& path, const ParamSet& tensors) {
  write_bytes(path, encode(tensors));
}

ParamSet read_container(const std::filesystem::path& path) { return decode(read_bytes(path)); }

std::uint64_t checksum(const std::vector<std::uint8_t>& bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace nlos::io
