#include "jointrecon/grid_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace jointrecon {

namespace {

constexpr char kMagic[] = "JRGRID01";
constexpr std::size_t kMagicSize = 8;

void put_f32(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((bits >> shift) & 0xFFu));
  }
}

double get_f32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::string header(const char* dtype, Eigen::Index height, Eigen::Index width) {
  nlohmann::ordered_json h;
  h["dtype"] = dtype;
  h["height"] = height;
  h["width"] = width;
  std::string out(kMagic, kMagicSize);
  out += h.dump();
  out.push_back('\n');
  return out;
}

}  // namespace

std::string encode_grid(const RealGrid& grid) {
  std::string out = header("f32", grid.rows(), grid.cols());
  out.reserve(out.size() + 4 * static_cast<std::size_t>(grid.size()));
  for (Eigen::Index k = 0; k < grid.size(); ++k) put_f32(out, grid.data()[k]);
  return out;
}

std::string encode_grid(const ComplexGrid& grid) {
  std::string out = header("c64as2f32", grid.rows(), grid.cols());
  out.reserve(out.size() + 8 * static_cast<std::size_t>(grid.size()));
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    put_f32(out, grid.data()[k].real());
    put_f32(out, grid.data()[k].imag());
  }
  return out;
}

AnyGrid decode_grid(const std::string& bytes) {
  if (bytes.size() < kMagicSize || bytes.compare(0, kMagicSize, kMagic) != 0) {
    throw FormatError("grid: bad magic");
  }
  const auto eol = bytes.find('\n', kMagicSize);
  if (eol == std::string::npos) throw FormatError("grid: unterminated header");

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(kMagicSize, eol - kMagicSize));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("grid: header is not JSON: ") + e.what());
  }
  if (!h.is_object() || !h.contains("dtype") || !h.contains("height") || !h.contains("width") ||
      !h["dtype"].is_string() || !h["height"].is_number_integer() ||
      !h["width"].is_number_integer()) {
    throw FormatError("grid: header missing dtype/height/width");
  }
  const auto dtype = h["dtype"].get<std::string>();
  const auto height = h["height"].get<long long>();
  const auto width = h["width"].get<long long>();
  if (height < 0 || width < 0) throw FormatError("grid: negative shape");

  std::size_t per_entry;
  if (dtype == "f32") {
    per_entry = 4;
  } else if (dtype == "c64as2f32") {
    per_entry = 8;
  } else {
    throw FormatError("grid: unknown dtype '" + dtype + "'");
  }
  const std::size_t count = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  const std::size_t payload = bytes.size() - eol - 1;
  if (payload != count * per_entry) {
    throw FormatError("grid: payload has " + std::to_string(payload) + " bytes, expected " +
                      std::to_string(count * per_entry));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + eol + 1);
  if (per_entry == 4) {
    RealGrid g(height, width);
    for (std::size_t k = 0; k < count; ++k) g.data()[k] = get_f32(p + 4 * k);
    return g;
  }
  ComplexGrid g(height, width);
  for (std::size_t k = 0; k < count; ++k) {
    g.data()[k] = Complex(get_f32(p + 8 * k), get_f32(p + 8 * k + 4));
  }
  return g;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void save_grid(const RealGrid& grid, const std::filesystem::path& path) {
  write_file(path, encode_grid(grid));
}

void save_grid(const ComplexGrid& grid, const std::filesystem::path& path) {
  write_file(path, encode_grid(grid));
}

AnyGrid load_grid(const std::filesystem::path& path) {
  try {
    return decode_grid(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

RealGrid load_real_grid(const std::filesystem::path& path) {
  auto g = load_grid(path);
  if (auto* r = std::get_if<RealGrid>(&g)) return std::move(*r);
  throw FormatError(path.string() + ": expected dtype f32");
}

ComplexGrid load_complex_grid(const std::filesystem::path& path) {
  auto g = load_grid(path);
  if (auto* c = std::get_if<ComplexGrid>(&g)) return std::move(*c);
  throw FormatError(path.string() + ": expected dtype c64as2f32");
}

RealGrid round_to_f32(const RealGrid& grid) {
  return grid.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
}

ComplexGrid round_to_f32(const ComplexGrid& grid) {
  // Works on the interleaved doubles: GCC 11 at -O3 folds away the float
  // round trip when it happens inside a std::complex constructor.
  ComplexGrid out(grid.rows(), grid.cols());
  const auto* src = reinterpret_cast<const double*>(grid.data());
  auto* dst = reinterpret_cast<double*>(out.data());
  for (Eigen::Index k = 0; k < 2 * grid.size(); ++k) {
    dst[k] = static_cast<double>(static_cast<float>(src[k]));
  }
  return out;
}

}  // namespace jointrecon
