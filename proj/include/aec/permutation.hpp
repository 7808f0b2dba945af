#pragma once

// Bijection between indices 1..n! and permutations of 1..n in lexicographic
// order. Decoding walks the positions and divides the working value by p!
// (p = elements still to place after this one): the quotient picks the
// element among those remaining, the remainder carries on. An exact division
// selects the quotient-th element and carries p! instead of 0.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "aec/error.hpp"

namespace aec::perm {

using BigIndex = boost::multiprecision::cpp_int;

/// Largest n whose n! fits in 64 bits.
inline constexpr std::size_t kMaxU64N = 20;

template <class Index>
inline constexpr bool is_u64 = std::is_same_v<Index, std::uint64_t>;

template <class Index>
Index factorial(std::size_t n) {
    if constexpr (is_u64<Index>) {
        if (n > kMaxU64N) throw ValidationError("n", std::to_string(n) + "! overflows 64 bits");
    }
    Index f = 1;
    for (std::size_t i = 2; i <= n; ++i) f *= static_cast<unsigned>(i);
    return f;
}

/// Table of 0!..n!.
template <class Index>
std::vector<Index> factorials(std::size_t n) {
    std::vector<Index> f(n + 1);
    f[0] = 1;
    for (std::size_t i = 1; i <= n; ++i) f[i] = f[i - 1] * static_cast<unsigned>(i);
    return f;
}

template <class Index>
std::string to_string(const Index& i) {
    if constexpr (is_u64<Index>) {
        return std::to_string(i);
    } else {
        return i.str();
    }
}

/// Decoder with a precomputed factorial table for repeated use at fixed n.
template <class Index>
class Mapper {
public:
    explicit Mapper(std::size_t n) : n_(n) {
        if (n_ < 1) throw ValidationError("n", "permutation length must be >= 1");
        if constexpr (is_u64<Index>) {
            if (n_ > kMaxU64N) {
                throw ValidationError("n", "n=" + std::to_string(n_) +
                                               " needs a big-integer index (64-bit limit is 20)");
            }
        }
        fact_ = factorials<Index>(n_);
    }

    std::size_t size() const noexcept { return n_; }
    const Index& count() const noexcept { return fact_[n_]; }

    std::vector<std::size_t> decode(const Index& index) const {
        std::vector<std::size_t> out(n_);
        decode_into(index, out);
        return out;
    }

    /// Writes the permutation for `index` (1-based values) into `out`.
    void decode_into(const Index& index, std::vector<std::size_t>& out) const {
        check_index(index);
        out.resize(n_);
        remaining_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) remaining_[i] = i + 1;
        Index working = index;
        for (std::size_t e = 1; e <= n_; ++e) {
            const std::size_t p = n_ - e;
            const Index& batch = fact_[p];
            Index quotient;
            Index remainder;
            if constexpr (is_u64<Index>) {
                quotient = working / batch;
                remainder = working % batch;
            } else {
                boost::multiprecision::divide_qr(working, batch, quotient, remainder);
            }
            std::size_t pick;  // 1-based rank among the remaining elements
            if (remainder == 0) {
                pick = static_cast<std::size_t>(quotient);
                working = batch;
            } else {
                pick = static_cast<std::size_t>(quotient) + 1;
                working = remainder;
            }
            out[e - 1] = remaining_[pick - 1];
            remaining_.erase(remaining_.begin() + static_cast<std::ptrdiff_t>(pick - 1));
        }
    }

    /// Inverse of decode via the Lehmer code.
    Index encode(const std::vector<std::size_t>& seq) const {
        if (seq.size() != n_) {
            throw ValidationError("seq", "sequence length " + std::to_string(seq.size()) +
                                             " does not match n=" + std::to_string(n_));
        }
        std::vector<bool> seen(n_ + 1, false);
        for (auto v : seq) {
            if (v < 1 || v > n_ || seen[v]) {
                throw ValidationError("seq", "sequence is not a permutation of 1.." + std::to_string(n_));
            }
            seen[v] = true;
        }
        Index index = 1;
        for (std::size_t e = 0; e < n_; ++e) {
            std::size_t smaller_after = 0;
            for (std::size_t k = e + 1; k < n_; ++k) smaller_after += seq[k] < seq[e] ? 1 : 0;
            index += fact_[n_ - 1 - e] * static_cast<unsigned>(smaller_after);
        }
        return index;
    }

    void check_index(const Index& index) const {
        if (index < 1 || index > fact_[n_]) {
            throw ValidationError("index", "index " + to_string(index) + " outside valid range [1, " +
                                               to_string(fact_[n_]) + "] for n=" + std::to_string(n_));
        }
    }

private:
    std::size_t n_;
    std::vector<Index> fact_;
    mutable std::vector<std::size_t> remaining_;
};

template <class Index>
std::vector<std::size_t> index_to_permutation(const Index& index, std::size_t n) {
    return Mapper<Index>(n).decode(index);
}

template <class Index = BigIndex>
Index permutation_to_index(const std::vector<std::size_t>& seq) {
    return Mapper<Index>(seq.size()).encode(seq);
}

}  // namespace aec::perm
