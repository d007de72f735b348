#pragma once

// JSON run configuration. Unknown keys are rejected so that a typo never
// silently falls back to a default.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "mcpar/bar.hpp"
#include "mcpar/cost.hpp"
#include "mcpar/engine.hpp"
#include "mcpar/errors.hpp"
#include "mcpar/io.hpp"
#include "mcpar/stats.hpp"

namespace mcpar {

/// Everything a config file describes: the engine's RunConfig plus
/// reporting options.
struct CampaignConfig {
  RunConfig run;
  PriceSheet prices;
  SamplesFormat samples_format = SamplesFormat::bin;
  double tolerance = 0.05;
};

namespace config_detail {

using nlohmann::json;

inline void reject_unknown(const json& j, std::string_view section, std::initializer_list<std::string_view> known) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + std::string(section));
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void read_positive_count(const json& j, const char* key, std::uint64_t& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_unsigned()) {
    throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
  }
  out = v.get<std::uint64_t>();
}

inline NodalProfile read_profile(const json& j, const char* section) {
  NodalProfile p;
  if (j.is_string()) {
    if (j.get<std::string>() != "zero") throw ConfigError(std::string(section) + ": only \"zero\" may be a bare string");
    return p;
  }
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object or \"zero\"");
  reject_unknown(j, section, {"profile", "amplitude", "values"});
  if (j.contains("values")) {
    p.kind = NodalProfile::Kind::nodal;
    read(j, "values", p.values);
    return p;
  }
  std::string kind = "zero";
  read(j, "profile", kind);
  read(j, "amplitude", p.amplitude);
  if (kind == "zero") {
    p.kind = NodalProfile::Kind::zero;
  } else if (kind == "linear") {
    p.kind = NodalProfile::Kind::linear;
  } else if (kind == "sine") {
    p.kind = NodalProfile::Kind::sine;
  } else {
    throw ConfigError(std::string(section) + ": unknown profile '" + kind + "'");
  }
  return p;
}

inline ForceProfile read_force_profile(const json& j) {
  ForceProfile p;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "tip") {
      p.kind = ForceProfile::Kind::tip;
    } else if (s == "uniform") {
      p.kind = ForceProfile::Kind::uniform;
    } else {
      throw ConfigError("force_profile: unknown profile '" + s + "'");
    }
    return p;
  }
  if (!j.is_object()) throw ConfigError("force_profile must be \"tip\", \"uniform\" or {\"weights\": [...]}");
  reject_unknown(j, "force_profile", {"weights"});
  p.kind = ForceProfile::Kind::nodal;
  read(j, "weights", p.weights);
  return p;
}

inline BarConfig read_bar(const json& j) {
  reject_unknown(j, "problem (bar)",
                 {"type", "rho", "area", "damping_c", "e_mean", "e_delta", "k_lin", "k_nl", "mass_tip", "length",
                  "n_elements", "t_final", "dt", "n_steps", "newmark_beta", "newmark_gamma", "u0", "v0",
                  "force_profile", "force_amplitude"});
  BarConfig b;
  read(j, "rho", b.rho);
  read(j, "area", b.area);
  read(j, "damping_c", b.damping_c);
  read(j, "e_mean", b.e_mean);
  read(j, "e_delta", b.e_delta);
  read(j, "k_lin", b.k_lin);
  read(j, "k_nl", b.k_nl);
  read(j, "mass_tip", b.mass_tip);
  read(j, "length", b.length);
  read(j, "n_elements", b.n_elements);
  read(j, "t_final", b.t_final);
  if (j.contains("dt") && j.contains("n_steps")) throw ConfigError("give either dt or n_steps, not both");
  b.dt = b.t_final / 1024.0;
  read(j, "dt", b.dt);
  if (j.contains("n_steps")) {
    std::uint64_t n = 0;
    read_positive_count(j, "n_steps", n);
    if (n == 0) throw ConfigError("n_steps must be positive");
    b.dt = b.t_final / static_cast<double>(n);
  }
  read(j, "newmark_beta", b.newmark_beta);
  read(j, "newmark_gamma", b.newmark_gamma);
  read(j, "force_amplitude", b.force_amplitude);
  if (j.contains("u0")) b.u0 = read_profile(j.at("u0"), "u0");
  if (j.contains("v0")) b.v0 = read_profile(j.at("v0"), "v0");
  if (j.contains("force_profile")) b.force_profile = read_force_profile(j.at("force_profile"));
  b.validate();
  return b;
}

}  // namespace config_detail

inline CampaignConfig parse_config(const nlohmann::json& j) {
  using namespace config_detail;
  if (!j.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(j, "config", {"n_mc", "n_serial", "n_workers", "base_seed", "lease_duration_ms", "output_dir",
                               "histogram", "tolerance", "samples_format", "prices", "problem"});
  CampaignConfig c;
  RunConfig& r = c.run;
  read_positive_count(j, "n_mc", r.n_mc);
  read_positive_count(j, "n_serial", r.n_serial);
  std::uint64_t workers = r.n_workers;
  read_positive_count(j, "n_workers", workers);
  r.n_workers = static_cast<std::size_t>(workers);
  if (j.contains("base_seed") && j.at("base_seed").is_string()) {
    try {
      r.base_seed = std::stoull(j.at("base_seed").get<std::string>(), nullptr, 0);
    } catch (const std::exception&) {
      throw ConfigError("base_seed string is not an unsigned integer");
    }
  } else {
    read_positive_count(j, "base_seed", r.base_seed);
  }
  std::int64_t lease_ms = r.lease_duration.count();
  read(j, "lease_duration_ms", lease_ms);
  r.lease_duration = std::chrono::milliseconds(lease_ms);
  std::string out_dir = r.output_dir.string();
  read(j, "output_dir", out_dir);
  r.output_dir = out_dir;

  if (j.contains("histogram")) {
    const json& h = j.at("histogram");
    reject_unknown(h, "histogram", {"lower_edge", "upper_edge", "n_bins"});
    read(h, "lower_edge", r.histogram_spec.lower_edge);
    read(h, "upper_edge", r.histogram_spec.upper_edge);
    read(h, "n_bins", r.histogram_spec.n_bins);
  }
  read(j, "tolerance", c.tolerance);
  if (!(c.tolerance > 0.0)) throw ConfigError("tolerance must be positive");

  std::string fmt = "bin";
  read(j, "samples_format", fmt);
  if (fmt == "bin") {
    c.samples_format = SamplesFormat::bin;
  } else if (fmt == "csv") {
    c.samples_format = SamplesFormat::csv;
  } else {
    throw ConfigError("samples_format must be \"bin\" or \"csv\"");
  }

  if (j.contains("prices")) {
    const json& p = j.at("prices");
    reject_unknown(p, "prices", {"vm_hour_price", "storage_price", "egress_price", "billing"});
    read(p, "vm_hour_price", c.prices.vm_hour_price);
    read(p, "storage_price", c.prices.storage_price);
    read(p, "egress_price", c.prices.egress_price);
    std::string billing = "hourly";
    read(p, "billing", billing);
    if (billing == "hourly") {
      c.prices.billing = Billing::hourly;
    } else if (billing == "fractional") {
      c.prices.billing = Billing::fractional;
    } else {
      throw ConfigError("prices.billing must be \"hourly\" or \"fractional\"");
    }
    c.prices.validate();
  }

  if (j.contains("problem")) {
    const json& p = j.at("problem");
    std::string type;
    read(p, "type", type);
    if (type == "toy") {
      reject_unknown(p, "problem (toy)", {"type", "busy_work"});
      ToyConfig toy;
      read(p, "busy_work", toy.busy_work);
      r.problem = toy;
    } else if (type == "bar") {
      r.problem = read_bar(p);
    } else {
      throw ConfigError("problem.type must be \"toy\" or \"bar\"");
    }
  }
  r.validate();
  return c;
}

inline CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace mcpar
