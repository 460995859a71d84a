#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qkdsim {

enum class SequenceKind { word8, prbs15, custom };

// 15-stage Fibonacci LFSR with feedback x^15 + x^14 + 1, the maximal-length
// PRBS15 used by telecom pattern generators. Output is the top register bit.
class Prbs15 {
 public:
  static constexpr std::size_t period = 32767;  // 2^15 - 1
  static constexpr std::uint16_t default_seed = 0x7FFF;

  explicit Prbs15(std::uint16_t seed = default_seed) : reg_(seed & 0x7FFFu) {
    if (reg_ == 0) throw std::invalid_argument("prbs15: register seed must be nonzero");
  }

  std::uint8_t next() {
    const std::uint8_t out = static_cast<std::uint8_t>((reg_ >> 14) & 1u);
    const std::uint16_t fb = static_cast<std::uint16_t>(((reg_ >> 14) ^ (reg_ >> 13)) & 1u);
    reg_ = static_cast<std::uint16_t>(((reg_ << 1) | fb) & 0x7FFFu);
    return out;
  }

  std::uint16_t state() const { return reg_; }

 private:
  std::uint16_t reg_;
};

// A bit pattern together with the period of the infinite stream it is a
// prefix of. Modular access assumes at least one full period is stored.
struct BitSequence {
  SequenceKind kind = SequenceKind::custom;
  std::size_t period = 0;
  std::vector<std::uint8_t> bits;

  bool has_full_period() const { return period > 0 && bits.size() >= period; }

  std::uint8_t bit(std::size_t i) const { return bits[i % period]; }
};

inline std::size_t canonical_period(SequenceKind kind) {
  switch (kind) {
    case SequenceKind::word8:
      return 8;
    case SequenceKind::prbs15:
      return Prbs15::period;
    default:
      throw std::invalid_argument("canonical_period: custom sequences have no fixed period");
  }
}

// First n bits of the infinite stream for the given kind. The 8-bit word is
// the fixed 10101010 pattern; PRBS15 starts from the given register seed.
inline BitSequence generate_sequence(SequenceKind kind, std::size_t n,
                                     std::uint16_t prbs_seed = Prbs15::default_seed) {
  if (n < 1) throw std::invalid_argument("generate_sequence: need at least one bit");
  BitSequence seq;
  seq.kind = kind;
  seq.period = canonical_period(kind);
  seq.bits.reserve(n);
  if (kind == SequenceKind::word8) {
    for (std::size_t i = 0; i < n; ++i) seq.bits.push_back((i % 2 == 0) ? 1 : 0);
  } else {
    Prbs15 gen(prbs_seed);
    for (std::size_t i = 0; i < n; ++i) seq.bits.push_back(gen.next());
  }
  return seq;
}

// len consecutive bits starting at `start`, wrapping at the period boundary.
inline BitSequence slice_window(const BitSequence& seq, std::size_t start, std::size_t len) {
  if (len < 1) throw std::invalid_argument("slice_window: need at least one bit");
  if (!seq.has_full_period())
    throw std::invalid_argument("slice_window: sequence is shorter than one period");
  BitSequence out;
  out.kind = SequenceKind::custom;
  out.period = len;
  out.bits.reserve(len);
  for (std::size_t j = 0; j < len; ++j) out.bits.push_back(seq.bit(start + j));
  return out;
}

inline std::string to_text(const BitSequence& seq) {
  std::string s;
  s.reserve(seq.bits.size());
  for (std::uint8_t b : seq.bits) s.push_back(b ? '1' : '0');
  return s;
}

inline BitSequence from_text(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("from_text: empty bit string");
  BitSequence seq;
  seq.kind = SequenceKind::custom;
  seq.period = text.size();
  seq.bits.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1')
      throw std::invalid_argument("from_text: bit strings may contain only '0' and '1'");
    seq.bits.push_back(c == '1' ? 1 : 0);
  }
  return seq;
}

}  // namespace qkdsim
