#include <doctest.h>

#include <set>

#include "ssw/rng.hpp"

using ssw::Philox;
using ssw::StreamRole;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using Block = std::array<std::uint32_t, 4>;
  CHECK(Philox::block({0, 0, 0, 0}, {0, 0}) == Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  Philox a(7, 3, StreamRole::Outcomes), b(7, 3, StreamRole::Outcomes);
  for (int k = 0; k < 100; ++k) CHECK(a() == b());
  std::set<std::uint64_t> firsts;
  for (std::uint64_t rep = 0; rep < 50; ++rep)
    for (auto role : {StreamRole::Design, StreamRole::Effects, StreamRole::Outcomes, StreamRole::Assignment,
                      StreamRole::Bootstrap})
      firsts.insert(Philox(7, rep, role)());
  CHECK(firsts.size() == 250);
}

TEST_CASE("draw helpers") {
  Philox g(1, 0, StreamRole::Design);
  double sum = 0.0, sq = 0.0;
  int ones = 0;
  std::array<int, 3> counts{};
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = g.uniform();
    CHECK_UNARY(u > 0.0 && u < 1.0);
    const double z = g.normal();
    sum += z;
    sq += z * z;
    ones += g.bernoulli(0.3);
    ++counts[static_cast<std::size_t>(g.uniform_int(2, 4) - 2)];
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.015);
  CHECK(std::abs(ones / double(n) - 0.3) < 0.005);
  for (int c : counts) CHECK(std::abs(c / double(n) - 1.0 / 3.0) < 0.005);
}
