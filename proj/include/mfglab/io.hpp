#pragma once
// Artifact serialization: CSV (coordinates + re/im), binary row-major dumps
// with a JSON sidecar, deterministic formatting (LF, '.' decimal).
#include <string>

#include "mfglab/grid.hpp"

namespace mfglab {

void write_field_csv(const std::string& path, const Field& f);
void write_field_csv(const std::string& path, const SpaceTimeField& f);
// writes <base>.bin and <base>.json
void write_field_binary(const std::string& base, const Field& f);
void write_field_binary(const std::string& base, const SpaceTimeField& f);

Field read_field_binary(const std::string& base);

// SHA-256-free deterministic content hash (FNV-1a 64) used by run manifests.
std::string content_hash(const std::string& path);

std::string format_double(double x);  // shortest round-trip representation

}  // namespace mfglab
