#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "nodal/grid.hpp"

namespace nodal {

// .nfield layout: five ASCII header lines
//   NFIELD 1
//   <dim>
//   <count per axis...>
//   <origin per axis...>
//   <spacing>
// then prod(counts) little-endian IEEE-754 doubles, row-major (x slowest).

namespace detail {

inline std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

}  // namespace detail

inline void write_nfield(std::ostream& os, const ScalarField& f) {
  const GridSpec& g = f.grid();
  os << "NFIELD 1\n" << g.dim << "\n";
  for (int d = 0; d < g.dim; ++d) os << (d ? " " : "") << g.counts[d];
  os << "\n";
  for (int d = 0; d < g.dim; ++d) os << (d ? " " : "") << detail::exact(g.origin[d]);
  os << "\n" << detail::exact(g.spacing) << "\n";
  for (double v : f.values()) {
    const std::uint64_t bits = detail::to_le(std::bit_cast<std::uint64_t>(v));
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    os.write(bytes, 8);
  }
  if (!os) throw Error(ErrorKind::Io, "failed writing field");
}

inline void write_nfield(const std::string& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path);
  write_nfield(os, f);
}

inline ScalarField read_nfield(std::istream& is, std::string label = {}) {
  auto line = [&]() {
    std::string s;
    if (!std::getline(is, s)) throw Error(ErrorKind::Io, "truncated nfield header");
    return s;
  };
  if (line() != "NFIELD 1") throw Error(ErrorKind::Io, "bad nfield magic");
  GridSpec g;
  {
    std::istringstream ss(line());
    if (!(ss >> g.dim) || (g.dim != 2 && g.dim != 3)) throw Error(ErrorKind::Io, "bad nfield dimension");
  }
  {
    std::istringstream ss(line());
    for (int d = 0; d < g.dim; ++d)
      if (!(ss >> g.counts[d])) throw Error(ErrorKind::Io, "bad nfield counts");
    for (int d = g.dim; d < 3; ++d) g.counts[d] = 1;
  }
  {
    std::istringstream ss(line());
    for (int d = 0; d < g.dim; ++d)
      if (!(ss >> g.origin[d])) throw Error(ErrorKind::Io, "bad nfield origin");
  }
  {
    std::istringstream ss(line());
    if (!(ss >> g.spacing)) throw Error(ErrorKind::Io, "bad nfield spacing");
  }
  g.validate();
  std::vector<double> vals(g.size());
  for (double& v : vals) {
    char bytes[8];
    if (!is.read(bytes, 8)) throw Error(ErrorKind::Io, "truncated nfield payload");
    std::uint64_t bits;
    std::memcpy(&bits, bytes, 8);
    v = std::bit_cast<double>(detail::to_le(bits));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::Io, "trailing bytes after nfield payload");
  return ScalarField(g, std::move(vals), std::move(label));
}

inline ScalarField read_nfield(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_nfield(is, path);
}

}  // namespace nodal
