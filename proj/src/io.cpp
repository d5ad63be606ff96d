#include "mfglab/io.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mfglab {

namespace {

using nlohmann::json;

json grid_meta(const SpatialGrid& g) {
  json j;
  j["kind"] = g.kind == GridKind::PeriodicTorus ? "periodic-torus" : "neumann-box";
  j["dimension"] = g.dim;
  j["nodes"] = {g.n[0], g.n[1], g.n[2]};
  j["side"] = {g.side[0], g.side[1], g.side[2]};
  return j;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << body;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_field_csv(const std::string& path, const Field& f) {
  std::ostringstream out;
  const SpatialGrid& g = f.grid;
  out << "x";
  if (g.dim > 1) out << ",y";
  if (g.dim > 2) out << ",z";
  out << ",re,im\n";
  for (long idx = 0; idx < g.size(); ++idx) {
    int i, j, k;
    g.unindex(idx, i, j, k);
    out << format_double(g.coord(0, i));
    if (g.dim > 1) out << "," << format_double(g.coord(1, j));
    if (g.dim > 2) out << "," << format_double(g.coord(2, k));
    out << "," << format_double(f[idx].real()) << ","
        << format_double(f[idx].imag()) << "\n";
  }
  write_text(path, out.str());
}

void write_field_csv(const std::string& path, const SpaceTimeField& f) {
  std::ostringstream out;
  const SpatialGrid& g = f.grid;
  out << "t,x";
  if (g.dim > 1) out << ",y";
  out << ",re,im\n";
  for (int n = 0; n <= f.time.steps; ++n) {
    for (long idx = 0; idx < g.size(); ++idx) {
      int i, j, k;
      g.unindex(idx, i, j, k);
      out << format_double(f.time.t(n)) << "," << format_double(g.coord(0, i));
      if (g.dim > 1) out << "," << format_double(g.coord(1, j));
      out << "," << format_double(f.at(n, idx).real()) << ","
          << format_double(f.at(n, idx).imag()) << "\n";
    }
  }
  write_text(path, out.str());
}

void write_field_binary(const std::string& base, const Field& f) {
  {
    std::ofstream out(base + ".bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(f.v.data()),
              static_cast<std::streamsize>(f.v.size() * sizeof(cplx)));
  }
  json j = grid_meta(f.grid);
  j["layout"] = "row-major complex128, x fastest";
  j["time_steps"] = nullptr;
  write_text(base + ".json", j.dump(2) + "\n");
}

void write_field_binary(const std::string& base, const SpaceTimeField& f) {
  {
    std::ofstream out(base + ".bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(f.v.data()),
              static_cast<std::streamsize>(f.v.size() * sizeof(cplx)));
  }
  json j = grid_meta(f.grid);
  j["layout"] = "time-major complex128, x fastest";
  j["time_steps"] = f.time.steps;
  j["horizon"] = f.time.T;
  write_text(base + ".json", j.dump(2) + "\n");
}

Field read_field_binary(const std::string& base) {
  std::ifstream meta(base + ".json");
  if (!meta) throw std::runtime_error("missing sidecar: " + base + ".json");
  json j = json::parse(meta);
  SpatialGrid g;
  g.kind = j["kind"] == "periodic-torus" ? GridKind::PeriodicTorus
                                         : GridKind::NeumannBox;
  g.dim = j["dimension"];
  for (int a = 0; a < 3; ++a) {
    g.n[a] = j["nodes"][a];
    g.side[a] = j["side"][a];
  }
  Field f(g);
  std::ifstream in(base + ".bin", std::ios::binary);
  if (!in) throw std::runtime_error("missing binary: " + base + ".bin");
  in.read(reinterpret_cast<char*>(f.v.data()),
          static_cast<std::streamsize>(f.v.size() * sizeof(cplx)));
  return f;
}

std::string content_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace mfglab
