#include "steer/imaging/image_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "steer/error.hpp"

namespace steer::imaging {

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(bytes.data(), 8);
}

bool get_u64(std::istream& is, std::uint64_t& v) {
  std::array<unsigned char, 8> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return true;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::IoFailure, "cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::IoFailure, "cannot open '" + path.string() + "' for reading");
  return is;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw Error(ErrorKind::IoFailure, "write to '" + path.string() + "' failed");
}

std::pair<std::size_t, std::size_t> plane_dims(const ad::Tensor& t) {
  if (t.rank() < 2) throw Error(ErrorKind::ShapeMismatch, "image output needs at least two axes");
  const std::size_t h = t.dim(t.rank() - 2), w = t.dim(t.rank() - 1);
  if (h * w != t.size()) throw Error(ErrorKind::ShapeMismatch, "image output expects a single plane");
  return {h, w};
}

void require_finite(const ad::Tensor& t, const std::filesystem::path& path) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "refusing to write non-finite value to '" + path.string() + "'");
  }
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

}  // namespace

void write_flat(const std::filesystem::path& path, const ad::Tensor& tensor) {
  require_finite(tensor, path);
  auto os = open_out(path);
  os.write(kFlatMagic, sizeof kFlatMagic);
  put_u64(os, tensor.rank());
  for (auto extent : tensor.shape()) put_u64(os, extent);
  for (double v : tensor.values()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  finish(os, path);
}

ad::Tensor read_flat(const std::filesystem::path& path) {
  auto is = open_in(path);
  char magic[sizeof kFlatMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kFlatMagic, sizeof magic) != 0) {
    throw Error(ErrorKind::MalformedHeader, "'" + path.string() + "' is not a flat-binary tensor (bad magic)");
  }
  std::uint64_t rank = 0;
  if (!get_u64(is, rank) || rank == 0 || rank > kMaxFlatRank) {
    throw Error(ErrorKind::MalformedHeader, "'" + path.string() + "' has an invalid rank");
  }
  ad::Shape shape;
  std::uint64_t count = 1;
  for (std::uint64_t i = 0; i < rank; ++i) {
    std::uint64_t extent = 0;
    if (!get_u64(is, extent) || extent == 0) {
      throw Error(ErrorKind::MalformedHeader, "'" + path.string() + "' has an invalid extent");
    }
    if (extent > kMaxFlatElements || count > kMaxFlatElements / extent) {
      throw Error(ErrorKind::DimensionOverflow, "'" + path.string() + "' declares more than 2^32 elements");
    }
    count *= extent;
    shape.push_back(static_cast<std::size_t>(extent));
  }
  std::vector<double> values(static_cast<std::size_t>(count));
  for (auto& v : values) {
    std::uint64_t bits = 0;
    if (!get_u64(is, bits)) throw Error(ErrorKind::IoFailure, "'" + path.string() + "' ends before its payload");
    v = std::bit_cast<double>(bits);
  }
  return ad::Tensor::from(std::move(shape), std::move(values));
}

void write_pgm16(const std::filesystem::path& path, const ad::Tensor& image) {
  const auto [h, w] = plane_dims(image);
  require_finite(image, path);
  auto v = image.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  auto os = open_out(path);
  os << "P5\n" << w << ' ' << h << "\n65535\n";
  for (double x : v) {
    const double scaled = range > 0.0 ? (x - *lo) / range * 65535.0 : 0.0;
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(scaled, 0.0, 65535.0)));
    const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
    os.write(bytes, 2);
  }
  finish(os, path);
}

ad::Tensor read_pgm16(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  if (!(is >> magic >> w >> h >> maxval) || magic != "P5" || w == 0 || h == 0 || maxval == 0 || maxval > 65535) {
    throw Error(ErrorKind::MalformedHeader, "'" + path.string() + "' is not a binary PGM");
  }
  if (w > kMaxFlatElements / h) throw Error(ErrorKind::DimensionOverflow, "'" + path.string() + "' is too large");
  is.get();
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<double> values(w * h);
  for (auto& x : values) {
    unsigned char b[2] = {0, 0};
    if (!is.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(bytes))) {
      throw Error(ErrorKind::IoFailure, "'" + path.string() + "' ends before its pixel data");
    }
    const unsigned q = bytes == 2 ? (static_cast<unsigned>(b[0]) << 8) | b[1] : b[0];
    x = static_cast<double>(q) / static_cast<double>(maxval);
  }
  return ad::Tensor::from({h, w}, std::move(values));
}

std::string format_csv(const ad::Tensor& image) {
  const auto [h, w] = plane_dims(image);
  auto v = image.values();
  std::string out;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      if (j) out += ',';
      out += format_double(v[i * w + j]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const ad::Tensor& image) {
  require_finite(image, path);
  auto text = format_csv(image);
  auto os = open_out(path);
  os << text;
  finish(os, path);
}

ad::Tensor read_csv(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{} || (next != end && *next != ',')) {
        throw Error(ErrorKind::MalformedHeader,
                    "'" + path.string() + "' line " + std::to_string(rows + 1) + ": unparsable value");
      }
      values.push_back(v);
      ++count;
      p = next + 1;
    }
    if (rows == 0) cols = count;
    else if (count != cols) {
      throw Error(ErrorKind::MalformedHeader, "'" + path.string() + "' has ragged rows");
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorKind::MalformedHeader, "'" + path.string() + "' holds no data");
  return ad::Tensor::from({rows, cols}, std::move(values));
}

}  // namespace steer::imaging
