#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pintoc/field.hpp"

namespace pintoc {

/// Field snapshot record, little-endian binary:
///   u32 dims, u32 points[dims], u32 basis (0 periodic / 1 cosine),
///   f64 extents[dims], f64 values[prod(points)].
/// Trajectory files are plain concatenations of records; record times are
/// implied by the owning configuration (steps x nodes in time order).
void write_field_snapshot(std::ostream& os, const SpatialField& f);
SpatialField read_field_snapshot(std::istream& is);

void write_field_sequence(const std::string& path, const std::vector<SpatialField>& fields);
std::vector<SpatialField> read_field_sequence(const std::string& path);

}  // namespace pintoc
