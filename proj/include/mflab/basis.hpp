#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mflab/errors.hpp"

namespace mflab {

// Symmetric occupation-number basis of N bosons in M modes, enumerated in
// lexicographically descending order: (N,0,...,0) first, (0,...,0,N) last.
// Ranking and unranking go through the composition-count table
// D(n, m) = C(n+m-1, n), so index maps are bijective without hashing.
class BosonBasis {
  public:
    BosonBasis() = default;
    BosonBasis(int modes, int particles, std::int64_t dimension_cap = kDefaultCap);

    int modes() const { return modes_; }
    int particles() const { return particles_; }
    std::int64_t dimension() const { return dim_; }

    std::span<const int> occupation(std::int64_t index) const {
        return {occ_.data() + static_cast<std::size_t>(index) * modes_,
                static_cast<std::size_t>(modes_)};
    }

    std::int64_t index_of(std::span<const int> occ) const;

    // Number of compositions of n particles into m modes.
    static std::int64_t composition_count(int n, int m);

    static constexpr std::int64_t kDefaultCap = 200000;

  private:
    int modes_ = 0;
    int particles_ = 0;
    std::int64_t dim_ = 0;
    std::vector<int> occ_;                      // dim * modes, row-major
    std::vector<std::int64_t> count_table_;     // (particles+1) x (modes+1)

    std::int64_t counts(int n, int m) const { return count_table_[n * (modes_ + 1) + m]; }
};

}  // namespace mflab
