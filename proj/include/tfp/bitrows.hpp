#ifndef TFP_BITROWS_HPP
#define TFP_BITROWS_HPP

#include <bit>
#include <cstdint>
#include <vector>

namespace tfp {

/**
 * Dense rows of bits, one row per vertex.  Row r occupies the word range
 * [r*words, (r+1)*words); bit b of a row is word b/64, position b%64.
 */
class BitRows {
public:
    BitRows() = default;
    BitRows(int rows, int bits)
        : rows_(rows), bits_(bits), words_((bits + 63) / 64),
          data_(static_cast<std::size_t>(rows) * words_, 0) {}

    int words() const { return words_; }
    int bits() const { return bits_; }

    const std::uint64_t* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * words_; }
    std::uint64_t* row(int r) { return data_.data() + static_cast<std::size_t>(r) * words_; }

    bool test(int r, int b) const { return (row(r)[b >> 6] >> (b & 63)) & 1; }
    void set(int r, int b) { row(r)[b >> 6] |= std::uint64_t{1} << (b & 63); }
    void clear(int r, int b) { row(r)[b >> 6] &= ~(std::uint64_t{1} << (b & 63)); }

    long long popcount_row(int r) const {
        long long c = 0;
        const std::uint64_t* p = row(r);
        for (int i = 0; i < words_; ++i) c += std::popcount(p[i]);
        return c;
    }

    bool operator==(const BitRows&) const = default;

private:
    int rows_ = 0;
    int bits_ = 0;
    int words_ = 0;
    std::vector<std::uint64_t> data_;
};

inline long long and_popcount(const std::uint64_t* a, const std::uint64_t* b, int words) {
    long long c = 0;
    for (int i = 0; i < words; ++i) c += std::popcount(a[i] & b[i]);
    return c;
}

/** Visit the set bits of a[i] & b[i], ascending. */
template <typename Fn>
inline void for_each_and_bit(const std::uint64_t* a, const std::uint64_t* b, int words, Fn&& fn) {
    for (int i = 0; i < words; ++i) {
        std::uint64_t word = a[i] & b[i];
        while (word) {
            fn(i * 64 + std::countr_zero(word));
            word &= word - 1;
        }
    }
}

/** Visit the set bits of a row, ascending. */
template <typename Fn>
inline void for_each_bit(const std::uint64_t* a, int words, Fn&& fn) {
    for (int i = 0; i < words; ++i) {
        std::uint64_t word = a[i];
        while (word) {
            fn(i * 64 + std::countr_zero(word));
            word &= word - 1;
        }
    }
}

} // namespace tfp

#endif
