#ifndef IMPULSE_RNG_HPP
#define IMPULSE_RNG_HPP

#include <array>
#include <cstdint>

namespace impulse {

// Philox4x32-10 counter-based generator. One stream per (seed, stream id);
// draws are a pure function of (seed, stream, draw index).
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  // Uniform on the open interval (0,1) with 53-bit resolution.
  double uniform() {
    const std::uint64_t a = next_u32() >> 5, b = next_u32() >> 6;
    return (static_cast<double>(a * 67108864ull + b) + 0.5) * (1.0 / 9007199254740992.0);
  }

 private:
  static std::array<std::uint32_t, 4> round(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    const std::uint64_t p0 = 0xD2511F53ull * c[0], p1 = 0xCD9E8D57ull * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }

  void refill() {
    auto c = ctr_;
    auto k = key_;
    for (int r = 0; r < 10; ++r) {
      c = round(c, k);
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    buf_ = c;
    pos_ = 0;
    if (++ctr_[0] == 0) ++ctr_[1];
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
};

} // namespace impulse

#endif
