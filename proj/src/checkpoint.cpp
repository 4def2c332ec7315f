#include "lta/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lta/error.hpp"

namespace lta {

namespace {

constexpr char kMagic[8] = {'L', 'T', 'A', 'C', 'K', 'P', 'T', '1'};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    char buf[sizeof(T)];
    std::memcpy(buf, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) fail(ErrorCode::kCorruptCheckpoint, "checkpoint truncated");
  }

  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ag::ParameterSet& params, const nlohmann::json& header,
                     const std::filesystem::path& path) {
  std::string out(kMagic, sizeof(kMagic));
  const std::string head = header.dump();
  put<std::uint64_t>(out, head.size());
  out += head;
  put<std::uint64_t>(out, params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Eigen::Index k = 0; k < p.value.size(); ++k) put<double>(out, p.value.data()[k]);
  }
  put<std::uint64_t>(out, fnv1a(out));

  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kMissingFile, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kMissingFile, "cannot open checkpoint " + path.string());
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof(kMagic) + 8 ||
      std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorCode::kCorruptCheckpoint, path.string() + ": not a checkpoint");
  }
  {
    Reader tail(data);
    tail.bytes(data.size() - 8);
    if (tail.get<std::uint64_t>() != fnv1a(data.substr(0, data.size() - 8))) {
      fail(ErrorCode::kCorruptCheckpoint, path.string() + ": checksum mismatch");
    }
  }

  Reader r(data);
  r.bytes(sizeof(kMagic));
  Checkpoint ckpt;
  const auto head_len = r.get<std::uint64_t>();
  try {
    ckpt.header = nlohmann::json::parse(r.bytes(head_len));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kCorruptCheckpoint, std::string("checkpoint header: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.bytes(name_len);
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows > (1u << 24) || cols > (1u << 24))
      fail(ErrorCode::kCorruptCheckpoint, "implausible parameter shape");
    auto& p = ckpt.params.add(std::move(name), static_cast<Eigen::Index>(rows),
                              static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = r.get<double>();
  }
  if (r.pos() != data.size() - 8) fail(ErrorCode::kCorruptCheckpoint, "trailing bytes");
  return ckpt;
}

void restore_parameters(const ag::ParameterSet& loaded, ag::ParameterSet& params) {
  require(loaded.size() == params.size(), ErrorCode::kModelMismatch,
          "checkpoint has " + std::to_string(loaded.size()) + " tensors, model has " +
              std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = loaded[i];
    auto& dst = params[i];
    require(src.name == dst.name && src.value.rows() == dst.value.rows() &&
                src.value.cols() == dst.value.cols(),
            ErrorCode::kModelMismatch, "checkpoint tensor '" + src.name +
                                           "' does not match model tensor '" +
                                           dst.name + "'");
    dst.value = src.value;
  }
}

void expect_model(const nlohmann::json& header, const std::string& expected) {
  const std::string found = header.value("model", std::string());
  require(found == expected, ErrorCode::kModelMismatch,
          "expected '" + expected + "' checkpoint, found '" + found + "'");
}

std::string config_hash(const nlohmann::json& config) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a(config.dump());
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = digits[h & 0xf];
  return out;
}

}  // namespace lta
