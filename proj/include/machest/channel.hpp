#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "machest/rng.hpp"

namespace machest {

using Complex = std::complex<double>;

/// 2-D antenna location inside a square region, in wavelength units.
/// All lengths in this library are expressed in units of lambda, so the
/// wavelength never appears in phase arithmetic.
struct Position {
  double x = 0.0;
  double y = 0.0;
};

/// Virtual angle pair: phi = cos(theta)*sin(phi_phys), theta = sin(theta_phys).
/// Both components lie in [-1, 1].
struct VirtualAngles {
  double phi = 0.0;
  double theta = 0.0;
};

/// One multipath component: virtual AoD pair, virtual AoA pair, complex gain.
struct PathComponent {
  VirtualAngles aod;
  VirtualAngles aoa;
  Complex coeff{0.0, 0.0};
};

/// Set of true path components defining the channel everywhere in the
/// Tx/Rx regions. The geometry generator produces a diagonal path-response
/// matrix: each transmit path has exactly one receive path.
struct ChannelRealization {
  std::vector<PathComponent> paths;
  std::uint64_t rng_seed = 0;
};

struct NoiseModel {
  double transmit_power = 1.0;  // p_t > 0
  double noise_power = 0.0;     // delta^2 >= 0
};

/// Unit-modulus phase factor exp(j*2*pi*(x*phi + y*theta)).
inline Complex field_response_phase(Position pos, VirtualAngles a) {
  const double phase = kTwoPi * (pos.x * a.phi + pos.y * a.theta);
  return {std::cos(phase), std::sin(phase)};
}

/// Channel response sum_l conj(f_l(r)) * sigma_l * g_l(t) over the given
/// path components.
inline Complex channel_response(std::span<const PathComponent> paths,
                                Position t, Position r) {
  Complex h{0.0, 0.0};
  for (const PathComponent& p : paths) {
    h += std::conj(field_response_phase(r, p.aoa)) * p.coeff *
         field_response_phase(t, p.aod);
  }
  return h;
}

inline Complex channel_response(const ChannelRealization& ch, Position t,
                                Position r) {
  return channel_response(std::span<const PathComponent>(ch.paths), t, r);
}

/// Noisy channel measurement sqrt(p_t)*h(t,r) + z with pilot s = 1 and
/// z ~ CN(0, noise_power) drawn from the supplied stream.
inline Complex measure(const ChannelRealization& ch, Position t, Position r,
                       const NoiseModel& noise, Rng& rng) {
  if (noise.noise_power < 0.0)
    throw std::invalid_argument("measure: noise_power must be >= 0");
  if (!(noise.transmit_power > 0.0))
    throw std::invalid_argument("measure: transmit_power must be > 0");
  Complex v = std::sqrt(noise.transmit_power) * channel_response(ch, t, r);
  if (noise.noise_power > 0.0) v += rng.complex_normal(noise.noise_power);
  return v;
}

/// Draws one virtual angle pair from the half-space density
/// f(theta, phi) = cos(theta)/(2*pi) over theta, phi in [-pi/2, pi/2].
/// theta is sampled by inverse CDF, theta = arcsin(2u - 1), phi uniformly.
inline VirtualAngles random_virtual_angles(Rng& rng) {
  const double theta = std::asin(2.0 * rng.uniform() - 1.0);
  const double phi = rng.uniform(-kTwoPi / 4.0, kTwoPi / 4.0);
  return {std::cos(theta) * std::sin(phi), std::sin(theta)};
}

/// Geometry channel: L paths, independent AoD/AoA draws per path,
/// coefficients i.i.d. CN(0, 1/L).
inline ChannelRealization random_channel(int num_paths, Rng& rng,
                                         std::uint64_t provenance_seed = 0) {
  if (num_paths < 1)
    throw std::invalid_argument("random_channel: L must be >= 1");
  ChannelRealization ch;
  ch.rng_seed = provenance_seed;
  ch.paths.reserve(num_paths);
  for (int l = 0; l < num_paths; ++l) {
    PathComponent p;
    p.aod = random_virtual_angles(rng);
    p.aoa = random_virtual_angles(rng);
    p.coeff = rng.complex_normal(1.0 / num_paths);
    ch.paths.push_back(p);
  }
  return ch;
}

inline void to_json(nlohmann::json& j, const ChannelRealization& ch) {
  j = nlohmann::json{{"seed", ch.rng_seed},
                     {"paths", nlohmann::json::array()}};
  for (const PathComponent& p : ch.paths) {
    j["paths"].push_back({{"aod", {p.aod.phi, p.aod.theta}},
                          {"aoa", {p.aoa.phi, p.aoa.theta}},
                          {"coeff", {p.coeff.real(), p.coeff.imag()}}});
  }
}

inline void from_json(const nlohmann::json& j, ChannelRealization& ch) {
  ch.rng_seed = j.at("seed").get<std::uint64_t>();
  ch.paths.clear();
  for (const auto& jp : j.at("paths")) {
    PathComponent p;
    p.aod = {jp.at("aod")[0].get<double>(), jp.at("aod")[1].get<double>()};
    p.aoa = {jp.at("aoa")[0].get<double>(), jp.at("aoa")[1].get<double>()};
    p.coeff = {jp.at("coeff")[0].get<double>(), jp.at("coeff")[1].get<double>()};
    ch.paths.push_back(p);
  }
}

}  // namespace machest
