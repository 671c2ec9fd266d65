#pragma once

// Grayscale PGM (P2 ASCII / P5 binary, maxval <= 255) and headerless CSV
// matrix files.

#include <grmf/core.hpp>
#include <grmf/error.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <system_error>
#include <vector>

namespace grmf::harness {

enum class PgmEncoding { Ascii, Binary };

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Header tokens are whitespace separated; '#' starts a comment to end of line.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& data) : data_(data) {}

  bool next_token(std::string& token) {
    token.clear();
    while (pos_ < data_.size()) {
      const char c = data_[pos_];
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_])) && data_[pos_] != '#')
      token.push_back(data_[pos_++]);
    return !token.empty();
  }

  std::size_t position() const { return pos_; }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

inline long parse_header_int(HeaderReader& reader, const char* field) {
  std::string token;
  if (!reader.next_token(token)) throw ParseError(ParseErrorKind::MalformedHeader, std::string("missing ") + field);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value <= 0)
    throw ParseError(ParseErrorKind::MalformedHeader, std::string("bad ") + field + " '" + token + "'");
  return value;
}

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace detail

inline Matrix load_pgm(const std::string& path) {
  const std::string data = detail::read_file(path);
  detail::HeaderReader reader(data);
  std::string magic;
  if (!reader.next_token(magic) || (magic != "P2" && magic != "P5"))
    throw ParseError(ParseErrorKind::MalformedHeader, "expected P2 or P5 magic in " + path);
  const long width = detail::parse_header_int(reader, "width");
  const long height = detail::parse_header_int(reader, "height");
  const long maxval = detail::parse_header_int(reader, "maxval");
  if (maxval > 255) throw ParseError(ParseErrorKind::UnsupportedMaxval, std::to_string(maxval) + " > 255");

  Matrix M(height, width);
  if (magic == "P5") {
    // Exactly one whitespace byte separates maxval from the raster.
    const std::size_t start = reader.position() + 1;
    const std::size_t need = static_cast<std::size_t>(width) * height;
    if (start > data.size() || data.size() - start < need)
      throw ParseError(ParseErrorKind::TruncatedPayload, "expected " + std::to_string(need) + " bytes in " + path);
    for (long i = 0; i < height; ++i)
      for (long j = 0; j < width; ++j) {
        const auto v = static_cast<unsigned char>(data[start + static_cast<std::size_t>(i * width + j)]);
        if (v > maxval) throw ParseError(ParseErrorKind::InvalidSample, "sample exceeds maxval");
        M(i, j) = v;
      }
    return M;
  }
  std::string token;
  for (long i = 0; i < height; ++i)
    for (long j = 0; j < width; ++j) {
      if (!reader.next_token(token))
        throw ParseError(ParseErrorKind::TruncatedPayload, "ran out of samples in " + path);
      long v = 0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size() || v < 0 || v > maxval)
        throw ParseError(ParseErrorKind::InvalidSample, "bad sample '" + token + "'");
      M(i, j) = static_cast<double>(v);
    }
  return M;
}

/// Writes values clipped to [0, 255] and rounded to the nearest integer.
inline void save_pgm(const std::string& path, const Matrix& M, PgmEncoding encoding = PgmEncoding::Binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(ParseErrorKind::Io, "cannot write " + path);
  auto pixel = [](double v) {
    if (!std::isfinite(v)) v = 0.0;
    return static_cast<int>(std::lround(std::clamp(v, 0.0, 255.0)));
  };
  out << (encoding == PgmEncoding::Binary ? "P5" : "P2") << '\n' << M.cols() << ' ' << M.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (encoding == PgmEncoding::Binary) {
        out.put(static_cast<char>(pixel(M(i, j))));
      } else {
        out << pixel(M(i, j)) << (j + 1 == M.cols() ? '\n' : ' ');
      }
    }
  }
  if (!out) throw ParseError(ParseErrorKind::Io, "write failed for " + path);
}

inline Matrix load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::Io, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t begin = 0;
    for (;;) {
      const std::size_t end = std::min(line.find(',', begin), line.size());
      std::size_t a = begin, b = end;
      while (a < b && std::isspace(static_cast<unsigned char>(line[a]))) ++a;
      while (b > a && std::isspace(static_cast<unsigned char>(line[b - 1]))) --b;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(line.data() + a, line.data() + b, v);
      if (a == b || ec != std::errc() || ptr != line.data() + b || !std::isfinite(v))
        throw ParseError(ParseErrorKind::NonNumeric,
                         path + ":" + std::to_string(line_no) + ": '" + line.substr(a, b - a) + "'");
      row.push_back(v);
      if (end == line.size()) break;
      begin = end + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(ParseErrorKind::RaggedRows, path + ":" + std::to_string(line_no) + " has " +
                                                       std::to_string(row.size()) + " cells, expected " +
                                                       std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(ParseErrorKind::NonNumeric, path + " contains no data");
  Matrix M(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
  return M;
}

/// Shortest round-trip decimal representation of every value.
inline void save_csv_matrix(const std::string& path, const Matrix& M) {
  std::ofstream out(path);
  if (!out) throw ParseError(ParseErrorKind::Io, "cannot write " + path);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) out << ',';
      out << detail::format_double(M(i, j));
    }
    out << '\n';
  }
  if (!out) throw ParseError(ParseErrorKind::Io, "write failed for " + path);
}

/// Dispatches on the file extension: .pgm is an image, anything else CSV.
inline Matrix load_matrix(const std::string& path) {
  const auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == "pgm" ? load_pgm(path) : load_csv_matrix(path);
}

}  // namespace grmf::harness
