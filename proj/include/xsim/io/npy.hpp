#pragma once

// Activation dumps in the NumPy .npy format, version 1.0: magic string,
// little-endian header length, ASCII dict header padded to a 64-byte
// boundary, then the raw payload. Reads 2-D '<f4' and '<f8' arrays in C or
// Fortran order; writes '<f8' C order exactly as numpy.save does.

#include "xsim/core.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <regex>
#include <string>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "npy payload handling assumes a little-endian host");

namespace xsim::io {

namespace detail {

inline constexpr std::array<char, 6> kNpyMagic = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

struct NpyHeader {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::int64_t> shape;
  std::size_t payload_offset = 0;
};

inline NpyHeader parse_npy_header(const std::vector<char>& bytes, const std::string& path) {
  auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorCode::FormatError, path + ": " + why);
  };
  if (bytes.size() < 10 || !std::equal(kNpyMagic.begin(), kNpyMagic.end(), bytes.begin())) {
    throw fail("not an npy file (bad magic)");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t prefix = 0;
  if (major == 1) {
    header_len = static_cast<unsigned char>(bytes[8]) |
                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    prefix = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw fail("truncated header");
    for (int i = 3; i >= 0; --i) {
      header_len = (header_len << 8) | static_cast<unsigned char>(bytes[8 + i]);
    }
    prefix = 12;
  } else {
    throw fail("unsupported npy version " + std::to_string(major));
  }
  if (bytes.size() < prefix + header_len) throw fail("truncated header");
  const std::string header(bytes.data() + prefix, header_len);

  NpyHeader h;
  h.payload_offset = prefix + header_len;
  std::smatch match;
  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  if (!std::regex_search(header, match, descr_re)) throw fail("header has no descr");
  h.descr = match[1];
  if (!std::regex_search(header, match, order_re)) throw fail("header has no fortran_order");
  h.fortran_order = match[1] == "True";
  if (!std::regex_search(header, match, shape_re)) throw fail("header has no shape");
  const std::string dims = match[1];
  static const std::regex int_re(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), int_re);
       it != std::sregex_iterator(); ++it) {
    h.shape.push_back(std::stoll(it->str()));
  }
  return h;
}

inline std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace detail

/// Raw matrix from an .npy file, without the ActivationMatrix invariants.
inline Matrix read_npy_matrix(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_bytes(path);
  const std::string name = path.string();
  const detail::NpyHeader h = detail::parse_npy_header(bytes, name);
  if (h.shape.size() != 2) {
    throw Error(ErrorCode::FormatError,
                name + ": expected a 2-D array, got " + std::to_string(h.shape.size()) + " dims");
  }
  std::size_t width = 0;
  if (h.descr == "<f8") {
    width = 8;
  } else if (h.descr == "<f4") {
    width = 4;
  } else {
    throw Error(ErrorCode::FormatError, name + ": unsupported dtype '" + h.descr + "'");
  }
  const auto rows = static_cast<Eigen::Index>(h.shape[0]);
  const auto cols = static_cast<Eigen::Index>(h.shape[1]);
  const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (bytes.size() - h.payload_offset != count * width) {
    throw Error(ErrorCode::FormatError,
                name + ": payload holds " + std::to_string(bytes.size() - h.payload_offset) +
                    " bytes, shape requires " + std::to_string(count * width));
  }
  const char* payload = bytes.data() + h.payload_offset;
  std::vector<double> values(count);
  for (std::size_t k = 0; k < count; ++k) {
    if (width == 8) {
      std::memcpy(&values[k], payload + 8 * k, 8);
    } else {
      float f;
      std::memcpy(&f, payload + 4 * k, 4);
      values[k] = static_cast<double>(f);
    }
  }
  if (h.fortran_order) {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>>(
        values.data(), rows, cols);
  }
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
}

inline ActivationMatrix read_activation_dump(const std::filesystem::path& path) {
  try {
    return ActivationMatrix(read_npy_matrix(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidData) {
      throw Error(ErrorCode::InvalidData, path.string() + ": " + e.what());
    }
    throw;
  }
}

inline std::string npy_header(Eigen::Index rows, Eigen::Index cols) {
  std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                     std::to_string(rows) + ", " + std::to_string(cols) + "), }";
  // magic(6) + version(2) + length(2) + dict + padding + '\n' is a multiple of 64.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');
  std::string out(detail::kNpyMagic.begin(), detail::kNpyMagic.end());
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(dict.size() & 0xFF));
  out.push_back(static_cast<char>((dict.size() >> 8) & 0xFF));
  return out + dict;
}

inline std::string encode_npy(const Matrix& a) {
  std::string out = npy_header(a.rows(), a.cols());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = a;
  const auto* raw = reinterpret_cast<const char*>(row_major.data());
  out.append(raw, static_cast<std::size_t>(row_major.size()) * sizeof(double));
  return out;
}

inline void write_npy(const std::filesystem::path& path, const Matrix& a) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const std::string bytes = encode_npy(a);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline void write_activation_dump(const std::filesystem::path& path, const ActivationMatrix& a) {
  write_npy(path, a.data());
}

}  // namespace xsim::io
