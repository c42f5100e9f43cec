#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace efpqubo {

struct Particle {
  double pt;
  double y;
  double phi;
  bool operator==(const Particle&) const = default;
};

struct JetEvent {
  std::vector<Particle> particles;
  std::size_t size() const { return particles.size(); }
  double total_pt() const {
    double s = 0;
    for (const auto& p : particles) s += p.pt;
    return s;
  }
  bool operator==(const JetEvent&) const = default;
};

struct GeneratorConfig {
  std::size_t n_events = 100;
  std::size_t m_min = 2;
  std::size_t m_max = 12;
  double pt_total = 500.0;
  double angular_scale = 0.3;  // keeps summed y^2 inside the default lambda grid
  std::uint64_t seed = 7;
};

// Jets sit at (y, phi) = (0, pi).  Azimuthal offsets are redrawn until they
// fall inside (-pi/2, pi/2), which keeps phi in [0, 2pi) and every raw
// pairwise |dphi| below pi.
inline std::vector<JetEvent> generate_events(std::size_t n_events, std::size_t m_min, std::size_t m_max,
                                             double pt_total, double angular_scale, std::uint64_t seed) {
  require(n_events >= 1, "generate_events: n_events must be >= 1");
  require(m_min >= 1 && m_min <= m_max, "generate_events: invalid particle-count range");
  require(pt_total > 0 && std::isfinite(pt_total), "generate_events: pt_total must be positive");
  require(angular_scale > 0 && std::isfinite(angular_scale), "generate_events: angular_scale must be positive");

  constexpr double half_pi = std::numbers::pi / 2;
  std::vector<JetEvent> out(n_events);
  for (std::size_t e = 0; e < n_events; ++e) {
    Stream rng = Stream::make(seed, 0x6576656e74ULL, e);
    const std::size_t m = m_min + rng.below(m_max - m_min + 1);
    std::vector<double> frac(m);
    double sum = 0;
    for (auto& f : frac) sum += (f = rng.exponential());
    auto& parts = out[e].particles;
    parts.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      parts[i].pt = pt_total * frac[i] / sum;
      parts[i].y = angular_scale * rng.normal();
      double dphi;
      do {
        dphi = angular_scale * rng.normal();
      } while (std::abs(dphi) >= half_pi);
      parts[i].phi = std::numbers::pi + dphi;
    }
  }
  return out;
}

inline std::vector<JetEvent> generate_events(const GeneratorConfig& c) {
  return generate_events(c.n_events, c.m_min, c.m_max, c.pt_total, c.angular_scale, c.seed);
}

inline JetEvent planarize(JetEvent event) {
  for (auto& p : event.particles) p.phi = 0.0;
  return event;
}

inline bool is_planar(const JetEvent& event) {
  for (const auto& p : event.particles)
    if (p.phi != 0.0) return false;
  return true;
}

inline JetEvent truncate_to_m(JetEvent event, std::size_t target_m, std::uint64_t seed) {
  require(target_m >= 1, "truncate_to_m: target_m must be >= 1");
  auto& parts = event.particles;
  if (parts.size() <= target_m) return event;
  const double before = event.total_pt();
  Stream rng = Stream::make(seed, 0x7472756e63ULL);
  while (parts.size() > target_m) parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(rng.below(parts.size())));
  const double scale = before / event.total_pt();
  for (auto& p : parts) p.pt *= scale;
  return event;
}

inline void validate_particle(const Particle& p, const std::string& where) {
  if (!(p.pt > 0) || !std::isfinite(p.pt)) throw ParseError(where + ": pt must be finite and > 0");
  if (!std::isfinite(p.y)) throw ParseError(where + ": y must be finite");
  if (!(p.phi >= 0 && p.phi < 2 * std::numbers::pi)) throw ParseError(where + ": phi must lie in [0, 2pi)");
}

inline std::string format_event(const JetEvent& ev) {
  std::string s = "{\"particles\": [";
  char buf[96];
  for (std::size_t i = 0; i < ev.particles.size(); ++i) {
    const auto& p = ev.particles[i];
    std::snprintf(buf, sizeof buf, "%s[%.17g, %.17g, %.17g]", i ? ", " : "", p.pt, p.y, p.phi);
    s += buf;
  }
  s += "]}";
  return s;
}

inline JetEvent parse_event(const std::string& line, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("particles") || !j["particles"].is_array())
    throw ParseError(where + ": expected {\"particles\": [...]}");
  JetEvent ev;
  for (const auto& row : j["particles"]) {
    if (!row.is_array() || row.size() != 3 || !row[0].is_number() || !row[1].is_number() || !row[2].is_number())
      throw ParseError(where + ": each particle must be [pt, y, phi]");
    Particle p{row[0].get<double>(), row[1].get<double>(), row[2].get<double>()};
    validate_particle(p, where);
    ev.particles.push_back(p);
  }
  if (ev.particles.empty()) throw ParseError(where + ": event has no particles");
  return ev;
}

inline void write_events(const std::string& path, const std::vector<JetEvent>& events) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& ev : events) out << format_event(ev) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<JetEvent> read_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<JetEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    events.push_back(parse_event(line, line_no));
  }
  return events;
}

}  // namespace efpqubo
