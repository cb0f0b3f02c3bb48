// SPDX-License-Identifier: Apache-2.0
#include "paramflow/serialize.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace pf::io {

using nlohmann::json;

namespace {

static_assert(sizeof(double) == 8);

std::string bin_name(const std::string& base) {
  return std::filesystem::path(base).filename().string() + ".bin";
}

void byteswap_if_needed(std::vector<double>& v) {
  if constexpr (std::endian::native == std::endian::little) {
    (void)v;
  } else {
    for (double& d : v) {
      std::uint64_t u;
      std::memcpy(&u, &d, 8);
      u = __builtin_bswap64(u);
      std::memcpy(&d, &u, 8);
    }
  }
}

void write_manifest(const std::string& base, const json& j) {
  std::ofstream f(base + ".json");
  if (!f) throw std::runtime_error("io: cannot write " + base + ".json");
  f << j.dump(2) << "\n";
}

json read_manifest(const std::string& base, const std::string& expect_format) {
  std::ifstream f(base + ".json");
  if (!f) throw std::runtime_error("io: cannot read " + base + ".json");
  json j = json::parse(f);
  if (j.value("format", "") != expect_format)
    throw std::runtime_error("io: " + base + ".json is not a " + expect_format + " file");
  return j;
}

std::string sibling(const std::string& base, const std::string& name) {
  return (std::filesystem::path(base).parent_path() / name).string();
}

}  // namespace

void write_doubles_le(const std::string& path, std::span<const double> data) {
  std::vector<double> buf(data.begin(), data.end());
  byteswap_if_needed(buf);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("io: cannot write " + path);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * 8));
}

std::vector<double> read_doubles_le(const std::string& path, std::size_t expect) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("io: cannot read " + path);
  auto bytes = static_cast<std::size_t>(f.tellg());
  if (bytes != expect * 8)
    throw std::runtime_error("io: " + path + " holds " + std::to_string(bytes / 8) +
                             " values, expected " + std::to_string(expect));
  std::vector<double> buf(expect);
  f.seekg(0);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  byteswap_if_needed(buf);
  return buf;
}

void save_params(const std::string& base, const rom::ParamVector& pv, const Provenance& prov) {
  pv.check();
  json j;
  j["format"] = "paramflow.params.v1";
  j["version"] = kVersion;
  j["family"] = rom::family_name(pv.spec.family);
  j["d"] = pv.spec.d;
  j["n"] = pv.spec.n;
  if (pv.spec.family == rom::Family::SineModes) j["modes"] = pv.spec.modes;
  j["layout_version"] = pv.spec.layout_version;
  j["count"] = pv.values.size();
  j["data"] = bin_name(base);
  j["seed"] = prov.seed;
  j["config_hash"] = prov.config_hash;
  write_manifest(base, j);
  write_doubles_le(base + ".bin", pv.values);
}

rom::ParamVector load_params(const std::string& base) {
  json j = read_manifest(base, "paramflow.params.v1");
  rom::ModelSpec ms;
  ms.family = rom::family_from_name(j.at("family"));
  ms.d = j.at("d");
  ms.n = j.at("n");
  if (ms.family == rom::Family::SineModes) ms.modes = j.at("modes").get<std::vector<int>>();
  ms.layout_version = j.value("layout_version", 1);
  auto values =
      read_doubles_le(sibling(base, j.at("data")), j.at("count").get<std::size_t>());
  return rom::ParamVector(ms, std::move(values));
}

void save_checkpoint(const std::string& base, const ctrl::ControlParams& params,
                     const CheckpointMeta& meta) {
  json j;
  j["format"] = "paramflow.checkpoint.v1";
  j["version"] = kVersion;
  j["control"] = {{"m", params.spec.m}, {"width", params.spec.width},
                  {"depth", params.spec.depth}};
  j["arrays"] = {
      {"xi_s", {{"offset", 0}, {"count", params.spec.gate_count()}}},
      {"xi_r", {{"offset", params.spec.gate_count()}, {"count", params.spec.res_count()}}},
      {"xi_e",
       {{"offset", params.spec.gate_count() + params.spec.res_count()},
        {"count", params.spec.mlp_count()}}},
  };
  j["data"] = bin_name(base);
  j["seed"] = meta.prov.seed;
  j["config_hash"] = meta.prov.config_hash;
  j["training"] = {{"iterations", meta.iterations},
                   {"final_loss", meta.final_loss},
                   {"stop_reason", meta.stop_reason}};
  write_manifest(base, j);
  write_doubles_le(base + ".bin", params.values);
}

Checkpoint load_checkpoint(const std::string& base) {
  json j = read_manifest(base, "paramflow.checkpoint.v1");
  Checkpoint ck;
  ck.params.spec.m = j.at("control").at("m");
  ck.params.spec.width = j.at("control").at("width");
  ck.params.spec.depth = j.at("control").at("depth");
  ck.params.values = read_doubles_le(
      sibling(base, j.at("data")), static_cast<std::size_t>(ck.params.spec.param_count()));
  ck.meta.prov.seed = j.value("seed", 0ull);
  ck.meta.prov.config_hash = j.value("config_hash", "");
  ck.meta.iterations = j.at("training").value("iterations", 0);
  ck.meta.final_loss = j.at("training").value("final_loss", 0.0);
  ck.meta.stop_reason = j.at("training").value("stop_reason", "");
  return ck;
}

void save_trajectory(const std::string& base, const ode::Trajectory& tr, const Provenance& prov,
                     bool with_csv) {
  json j;
  j["format"] = "paramflow.trajectory.v1";
  j["version"] = kVersion;
  j["dim"] = tr.dim;
  j["points"] = tr.t.size();
  j["has_derivs"] = !tr.f.empty();
  j["data"] = bin_name(base);
  j["seed"] = prov.seed;
  j["config_hash"] = prov.config_hash;
  write_manifest(base, j);

  // rows of (t, y...) followed by optional rows of f
  std::vector<double> blob;
  blob.reserve(tr.t.size() * (1 + tr.dim) + tr.f.size());
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    blob.push_back(tr.t[i]);
    auto s = tr.state(i);
    blob.insert(blob.end(), s.begin(), s.end());
  }
  blob.insert(blob.end(), tr.f.begin(), tr.f.end());
  write_doubles_le(base + ".bin", blob);

  if (with_csv) {
    std::ofstream c(base + ".csv");
    c << "# paramflow " << kVersion << " seed=" << prov.seed
      << " config=" << prov.config_hash << "\n";
    c << "t";
    for (int k = 0; k < tr.dim; ++k) c << ",y" << k;
    c << "\n";
    char buf[32];
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", tr.t[i]);
      c << buf;
      for (double v : tr.state(i)) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        c << "," << buf;
      }
      c << "\n";
    }
  }
}

ode::Trajectory load_trajectory(const std::string& base) {
  json j = read_manifest(base, "paramflow.trajectory.v1");
  ode::Trajectory tr;
  tr.dim = j.at("dim");
  std::size_t pts = j.at("points");
  bool has_f = j.value("has_derivs", false);
  std::size_t expect = pts * (1 + tr.dim) + (has_f ? pts * tr.dim : 0);
  auto blob = read_doubles_le(sibling(base, j.at("data")), expect);
  tr.t.resize(pts);
  tr.y.resize(pts * tr.dim);
  for (std::size_t i = 0; i < pts; ++i) {
    tr.t[i] = blob[i * (1 + tr.dim)];
    for (int k = 0; k < tr.dim; ++k) tr.y[i * tr.dim + k] = blob[i * (1 + tr.dim) + 1 + k];
  }
  if (has_f) tr.f.assign(blob.begin() + pts * (1 + tr.dim), blob.end());
  return tr;
}

}  // namespace pf::io
