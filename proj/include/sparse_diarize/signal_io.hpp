#pragma once

// EMBSIG01 binary layout (all little-endian):
//
//   offset  size  field
//   0       8     magic "EMBSIG01"
//   8       4     uint32 M (embedding dimension)
//   12      4     uint32 T (number of steps)
//   16      8     float64 step_seconds
//   24      8     float64 window_seconds
//   32      4*M*T float32 payload, column-major (one embedding after another)
//
// The CSV variant is a header row "M,T,step,window", one row with those
// values, then T rows of M comma-separated values (one embedding per row).

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sparse_diarize/atomic_file.hpp"
#include "sparse_diarize/errors.hpp"
#include "sparse_diarize/signal.hpp"
#include "sparse_diarize/text.hpp"

namespace sparse_diarize {

enum class SignalFormat { kBinary, kCsv };

inline constexpr std::string_view kSignalMagic = "EMBSIG01";
inline constexpr std::size_t kSignalHeaderBytes = 32;
inline constexpr std::string_view kCsvHeader = "M,T,step,window";

namespace detail {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(const char* p) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return value;
}

}  // namespace detail

namespace detail {

// A file whose contents violate the signal invariants is a format problem,
// not a caller mistake.
inline EmbeddingSignal checked_signal(SignalMatrix data, double step, double window) {
  try {
    return EmbeddingSignal(std::move(data), step, window);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid signal file: ") + e.what());
  }
}

}  // namespace detail

inline std::string encode_signal_binary(const EmbeddingSignal& signal) {
  const auto& data = signal.data();
  std::string out;
  out.reserve(kSignalHeaderBytes + 4 * static_cast<std::size_t>(data.size()));
  out.append(kSignalMagic);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.rows()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.cols()));
  detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(signal.step_seconds()));
  detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(signal.window_seconds()));
  // Eigen's default storage is column-major, matching the payload order.
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(data.data()[i]));
  }
  return out;
}

inline EmbeddingSignal decode_signal_binary(std::string_view bytes) {
  if (bytes.size() < kSignalMagic.size() || bytes.substr(0, kSignalMagic.size()) != kSignalMagic) {
    throw BadMagicError("not an EMBSIG01 file (bad magic)");
  }
  if (bytes.size() < kSignalHeaderBytes) {
    throw TruncatedFileError("EMBSIG01 header truncated");
  }
  const char* p = bytes.data();
  const auto rows = detail::get_le<std::uint32_t>(p + 8);
  const auto cols = detail::get_le<std::uint32_t>(p + 12);
  const double step = std::bit_cast<double>(detail::get_le<std::uint64_t>(p + 16));
  const double window = std::bit_cast<double>(detail::get_le<std::uint64_t>(p + 24));
  const std::uint64_t expected = 4ull * rows * cols;
  const std::uint64_t payload = bytes.size() - kSignalHeaderBytes;
  if (payload < expected) {
    throw TruncatedFileError("EMBSIG01 payload truncated: header announces " +
                             std::to_string(rows) + "x" + std::to_string(cols) + " values (" +
                             std::to_string(expected) + " bytes), found " +
                             std::to_string(payload) + " bytes");
  }
  if (payload > expected) {
    throw DimensionMismatchError("EMBSIG01 payload has " + std::to_string(payload - expected) +
                                 " bytes beyond the announced " + std::to_string(rows) + "x" +
                                 std::to_string(cols) + " matrix");
  }
  SignalMatrix data(rows, cols);
  const char* q = p + kSignalHeaderBytes;
  for (Eigen::Index i = 0; i < data.size(); ++i, q += 4) {
    data.data()[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(q));
  }
  return detail::checked_signal(std::move(data), step, window);
}

inline std::string encode_signal_csv(const EmbeddingSignal& signal) {
  const auto& data = signal.data();
  std::ostringstream out;
  out << kCsvHeader << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", signal.step_seconds());
  const std::string step = buf;
  std::snprintf(buf, sizeof buf, "%.17g", signal.window_seconds());
  out << data.rows() << ',' << data.cols() << ',' << step << ',' << buf << '\n';
  for (Eigen::Index t = 0; t < data.cols(); ++t) {
    for (Eigen::Index m = 0; m < data.rows(); ++m) {
      if (m) out << ',';
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(data(m, t)));
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

inline EmbeddingSignal decode_signal_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto& line : detail::split(text, '\n')) {
    lines.push_back(detail::trim(line));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines[0] != kCsvHeader) {
    throw BadMagicError("not an embedding CSV file (expected header '" + std::string(kCsvHeader) + "')");
  }
  if (lines.size() < 2) throw TruncatedFileError("embedding CSV missing dimension row");
  const auto dims = detail::split(lines[1], ',');
  if (dims.size() != 4) throw ParseError(2, "expected 4 fields M,T,step,window");
  const auto rows = detail::parse_number<std::uint32_t>(dims[0], 2);
  const auto cols = detail::parse_number<std::uint32_t>(dims[1], 2);
  const auto step = detail::parse_number<double>(dims[2], 2);
  const auto window = detail::parse_number<double>(dims[3], 2);
  const std::size_t body = lines.size() - 2;
  if (body < cols) {
    throw TruncatedFileError("embedding CSV has " + std::to_string(body) + " rows, header announces " +
                             std::to_string(cols));
  }
  if (body > cols) {
    throw DimensionMismatchError("embedding CSV has " + std::to_string(body) +
                                 " rows, header announces " + std::to_string(cols));
  }
  SignalMatrix data(rows, cols);
  for (std::uint32_t t = 0; t < cols; ++t) {
    const std::size_t line_no = t + 3;
    const auto fields = detail::split(lines[t + 2], ',');
    if (fields.size() != rows) {
      throw DimensionMismatchError("line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(rows) + " values, found " +
                                   std::to_string(fields.size()));
    }
    for (std::uint32_t m = 0; m < rows; ++m) {
      data(m, t) = detail::parse_number<float>(fields[m], line_no);
    }
  }
  return detail::checked_signal(std::move(data), step, window);
}

// Chooses the decoder from the leading bytes.
inline EmbeddingSignal decode_signal(std::string_view bytes) {
  if (bytes.substr(0, kCsvHeader.size()) == kCsvHeader) return decode_signal_csv(bytes);
  return decode_signal_binary(bytes);
}

inline void save_signal(const EmbeddingSignal& signal, const std::filesystem::path& path,
                        SignalFormat format = SignalFormat::kBinary) {
  write_file_atomically(path, format == SignalFormat::kBinary ? encode_signal_binary(signal)
                                                              : encode_signal_csv(signal));
}

inline EmbeddingSignal load_signal(const std::filesystem::path& path) {
  return decode_signal(read_file(path));
}

inline EmbeddingSignal load_signal(const std::filesystem::path& path, SignalFormat format) {
  const std::string bytes = read_file(path);
  return format == SignalFormat::kBinary ? decode_signal_binary(bytes) : decode_signal_csv(bytes);
}

}  // namespace sparse_diarize
