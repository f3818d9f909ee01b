#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "machest/channel.hpp"

using namespace machest;

namespace {
double rel_err(Complex a, Complex b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}
}  // namespace

TEST_CASE("field response phase examples") {
  CHECK(std::abs(field_response_phase({0, 0}, {0.37, -0.9}) -
                 Complex{1, 0}) < 1e-15);
  CHECK(std::abs(field_response_phase({0.5, 0}, {1, 0}) - Complex{-1, 0}) <
        1e-12);
  // phase 2*pi*(0.25 + 0.25) = pi
  CHECK(std::abs(field_response_phase({0.25, 0.25}, {1, 1}) -
                 Complex{-1, 0}) < 1e-12);
}

TEST_CASE("field response phase has unit modulus") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    Position p{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    VirtualAngles a{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    CHECK(std::abs(std::abs(field_response_phase(p, a)) - 1.0) < 1e-12);
  }
}

TEST_CASE("channel response basics") {
  PathComponent p{{0.3, -0.2}, {0.1, 0.7}, {1.5, -0.5}};
  ChannelRealization ch{{p}, 0};

  // single path at the reference points reduces to the coefficient
  CHECK(std::abs(channel_response(ch, {0, 0}, {0, 0}) - p.coeff) < 1e-15);

  // single-path magnitude is position invariant
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    Position t{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Position r{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    CHECK(std::abs(std::abs(channel_response(ch, t, r)) -
                   std::abs(p.coeff)) < 1e-12);
  }

  // exact cancellation of two identical paths with opposite coefficients
  PathComponent q = p;
  q.coeff = -p.coeff;
  ChannelRealization cancel{{p, q}, 0};
  CHECK(std::abs(channel_response(cancel, {0.3, -0.4}, {0.6, 0.1})) < 1e-12);
}

TEST_CASE("channel response is linear in the coefficients") {
  Rng rng(9);
  ChannelRealization ch = random_channel(4, rng);
  ChannelRealization scaled = ch;
  const Complex alpha{2.5, -1.25};
  for (auto& p : scaled.paths) p.coeff *= alpha;
  for (int i = 0; i < 50; ++i) {
    Position t{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Position r{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    CHECK(rel_err(channel_response(scaled, t, r),
                  alpha * channel_response(ch, t, r)) < 1e-12);
  }
}

TEST_CASE("global coefficient phase shift rotates the response") {
  Rng rng(13);
  ChannelRealization ch = random_channel(3, rng);
  const double psi = 1.234;
  const Complex rot{std::cos(psi), std::sin(psi)};
  ChannelRealization shifted = ch;
  for (auto& p : shifted.paths) p.coeff *= rot;
  for (int i = 0; i < 50; ++i) {
    Position t{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Position r{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    CHECK(std::abs(channel_response(shifted, t, r) -
                   rot * channel_response(ch, t, r)) < 1e-12);
  }
}

TEST_CASE("measure") {
  Rng chan_rng(21);
  ChannelRealization ch = random_channel(3, chan_rng);
  Position t{0.3, -0.1}, r{-0.7, 0.4};

  SUBCASE("noiseless identity and sqrt(p_t) scaling") {
    Rng rng(1);
    CHECK(measure(ch, t, r, {1.0, 0.0}, rng) == channel_response(ch, t, r));
    CHECK(measure(ch, t, r, {4.0, 0.0}, rng) ==
          2.0 * channel_response(ch, t, r));
  }

  SUBCASE("deterministic under fixed seed") {
    Rng a(42), b(42);
    for (int i = 0; i < 20; ++i) {
      CHECK(measure(ch, t, r, {1.0, 0.01}, a) ==
            measure(ch, t, r, {1.0, 0.01}, b));
    }
  }

  SUBCASE("invalid noise parameters") {
    Rng rng(1);
    CHECK_THROWS_AS(measure(ch, t, r, {0.0, 0.1}, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(measure(ch, t, r, {1.0, -0.1}, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("random channel basics") {
  Rng rng(31);
  ChannelRealization ch = random_channel(3, rng);
  CHECK(ch.paths.size() == 3);
  for (const auto& p : ch.paths) {
    CHECK(std::abs(p.aod.phi) <= 1.0);
    CHECK(std::abs(p.aod.theta) <= 1.0);
    CHECK(std::abs(p.aoa.phi) <= 1.0);
    CHECK(std::abs(p.aoa.theta) <= 1.0);
  }
  CHECK_THROWS_AS(random_channel(0, rng), std::invalid_argument);
}

TEST_CASE("random channel coefficient energy is normalized") {
  Rng rng(37);
  double total = 0.0;
  const int trials = 3000;
  for (int i = 0; i < trials; ++i) {
    ChannelRealization ch = random_channel(3, rng);
    for (const auto& p : ch.paths) total += std::norm(p.coeff);
  }
  CHECK(total / trials == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("elevation sampling statistics") {
  Rng rng(41);
  const int draws = 100000;
  double mean_sin = 0.0;
  const int bins = 20;
  std::vector<double> hist(bins, 0.0);
  for (int i = 0; i < draws; ++i) {
    const double theta = std::asin(2.0 * rng.uniform() - 1.0);
    mean_sin += std::sin(theta);
    const double pi = kTwoPi / 2;
    int b = static_cast<int>((theta + pi / 2) / (pi / bins));
    if (b == bins) b = bins - 1;
    hist[b] += 1.0;
  }
  mean_sin /= draws;
  CHECK(std::abs(mean_sin) < 0.01);

  // chi-squared against the cos(theta)/2 density; critical value for
  // 19 dof at p = 0.01 is 36.19
  const double pi = kTwoPi / 2;
  double chi2 = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = -pi / 2 + b * pi / bins;
    const double hi = lo + pi / bins;
    const double expected = draws * (std::sin(hi) - std::sin(lo)) / 2.0;
    chi2 += (hist[b] - expected) * (hist[b] - expected) / expected;
  }
  CHECK(chi2 < 36.19);
}

TEST_CASE("channel JSON round trip") {
  Rng rng(55);
  ChannelRealization ch = random_channel(2, rng, 55);
  nlohmann::json j = ch;
  auto back = j.get<ChannelRealization>();
  CHECK(back.rng_seed == ch.rng_seed);
  REQUIRE(back.paths.size() == ch.paths.size());
  for (std::size_t i = 0; i < ch.paths.size(); ++i) {
    CHECK(back.paths[i].aod.phi == ch.paths[i].aod.phi);
    CHECK(back.paths[i].aoa.theta == ch.paths[i].aoa.theta);
    CHECK(back.paths[i].coeff == ch.paths[i].coeff);
  }
}
