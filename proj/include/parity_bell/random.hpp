#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace parity_bell
{

//---------------------------------------------------------------------------//
/*!
 * Philox4x32-10 block function (Salmon et al., SC'11).
 *
 * Maps a 128-bit counter and a 64-bit key to 128 random bits.
 */
class Philox4x32
{
  public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter counter, Key key)
    {
        for (int round = 0; round < 10; ++round)
        {
            if (round > 0)
            {
                key[0] += weyl0;
                key[1] += weyl1;
            }
            counter = single_round(counter, key);
        }
        return counter;
    }

  private:
    static constexpr std::uint32_t mult0 = 0xD2511F53;
    static constexpr std::uint32_t mult1 = 0xCD9E8D57;
    static constexpr std::uint32_t weyl0 = 0x9E3779B9;
    static constexpr std::uint32_t weyl1 = 0xBB67AE85;

    static Counter single_round(const Counter& c, const Key& k)
    {
        const std::uint64_t p0 = static_cast<std::uint64_t>(mult0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(mult1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

//---------------------------------------------------------------------------//
/*!
 * Uniform random bit generator over one (seed, stream) pair.
 *
 * The counter is (draw index, stream id), so any two streams are
 * independent and a stream's output does not depend on what other streams
 * have consumed. Satisfies std::uniform_random_bit_generator.
 */
class CounterStream
{
  public:
    using result_type = std::uint64_t;

    CounterStream(std::uint64_t seed, std::uint64_t stream) : stream_(stream)
    {
        key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        if (lane_ == 2)
        {
            refill();
        }
        return buffer_[lane_++];
    }

    std::uint64_t blocks_used() const { return block_; }

  private:
    Philox4x32::Key key_{};
    std::uint64_t stream_ = 0;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int lane_ = 2;

    void refill()
    {
        const Philox4x32::Counter counter{
            static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        const auto out = Philox4x32::generate(counter, key_);
        buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        ++block_;
        lane_ = 0;
    }
};

// Stream ids are (purpose, index) packed into 64 bits
enum class StreamPurpose : std::uint64_t
{
    experiment = 1,
    slice = 2
};

inline std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index)
{
    return (static_cast<std::uint64_t>(purpose) << 48) | (index & 0xFFFFFFFFFFFFull);
}

}  // namespace parity_bell
