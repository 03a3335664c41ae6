#include "pintoc/snapshot.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace pintoc {

namespace {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("field snapshot: truncated record");
  return v;
}

}  // namespace

void write_field_snapshot(std::ostream& os, const SpatialField& f) {
  const GridSpec& g = f.grid();
  write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(g.dims));
  for (int d = 0; d < g.dims; ++d) write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(g.points[d]));
  write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(g.basis));
  for (int d = 0; d < g.dims; ++d) write_raw<double>(os, g.extents[d]);
  os.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
  if (!os) throw std::runtime_error("field snapshot: write failed");
}

SpatialField read_field_snapshot(std::istream& is) {
  GridSpec g;
  g.dims = static_cast<int>(read_raw<std::uint32_t>(is));
  if (g.dims != 1 && g.dims != 3) throw std::runtime_error("field snapshot: bad dims");
  g.points = {1, 1, 1};
  g.extents = {1.0, 1.0, 1.0};
  for (int d = 0; d < g.dims; ++d) g.points[d] = static_cast<int>(read_raw<std::uint32_t>(is));
  g.basis = static_cast<Basis>(read_raw<std::uint32_t>(is));
  for (int d = 0; d < g.dims; ++d) g.extents[d] = read_raw<double>(is);
  validate_grid(g);
  std::vector<double> values(static_cast<size_t>(g.total_points()));
  is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("field snapshot: truncated values");
  return SpatialField(g, std::move(values));
}

void write_field_sequence(const std::string& path, const std::vector<SpatialField>& fields) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("field snapshot: cannot open " + path);
  for (const auto& f : fields) write_field_snapshot(os, f);
}

std::vector<SpatialField> read_field_sequence(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("field snapshot: cannot open " + path);
  std::vector<SpatialField> out;
  while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_field_snapshot(is));
  return out;
}

}  // namespace pintoc
