#include "mflab/basis.hpp"

#include <string>

namespace mflab {

std::int64_t BosonBasis::composition_count(int n, int m) {
    // C(n+m-1, n) by the stable multiplicative form; intermediate after step
    // i equals C(n+i, i), an integer. Saturates instead of overflowing so the
    // cap comparison stays meaningful for absurd inputs.
    if (m <= 0) return n == 0 ? 1 : 0;
    constexpr std::int64_t kSaturate = std::int64_t(1) << 60;
    std::int64_t result = 1;
    for (int i = 1; i < m; ++i) {
        if (result > kSaturate / (n + i)) return kSaturate;
        result = result * (n + i) / i;
    }
    return result;
}

BosonBasis::BosonBasis(int modes, int particles, std::int64_t dimension_cap)
    : modes_(modes), particles_(particles) {
    if (modes < 1) throw dimension_error("BosonBasis: need at least one mode");
    if (particles < 0) throw dimension_error("BosonBasis: negative particle number");

    dim_ = composition_count(particles, modes);
    if (dim_ > dimension_cap)
        throw size_error("BosonBasis: dimension " + std::to_string(dim_) +
                         " exceeds cap " + std::to_string(dimension_cap));

    count_table_.assign(static_cast<std::size_t>(particles + 1) * (modes + 1), 0);
    for (int n = 0; n <= particles; ++n)
        for (int m = 0; m <= modes; ++m)
            count_table_[n * (modes_ + 1) + m] = composition_count(n, m);

    occ_.resize(static_cast<std::size_t>(dim_) * modes_);
    std::vector<int> current(modes_, 0);
    std::int64_t row = 0;
    // descending lexicographic enumeration
    auto emit = [&]() {
        for (int p = 0; p < modes_; ++p) occ_[row * modes_ + p] = current[p];
        ++row;
    };
    auto recurse = [&](auto&& self, int mode, int remaining) -> void {
        if (mode == modes_ - 1) {
            current[mode] = remaining;
            emit();
            return;
        }
        for (int n = remaining; n >= 0; --n) {
            current[mode] = n;
            self(self, mode + 1, remaining - n);
        }
    };
    recurse(recurse, 0, particles_);
}

std::int64_t BosonBasis::index_of(std::span<const int> occ) const {
    if (static_cast<int>(occ.size()) != modes_)
        throw dimension_error("BosonBasis::index_of: wrong occupation length");
    std::int64_t rank = 0;
    int remaining = particles_;
    for (int mode = 0; mode < modes_ - 1; ++mode) {
        const int n = occ[mode];
        if (n < 0 || n > remaining)
            throw dimension_error("BosonBasis::index_of: occupation out of range");
        // states whose entry at this mode is larger come first
        for (int w = remaining; w > n; --w) rank += counts(remaining - w, modes_ - 1 - mode);
        remaining -= n;
    }
    if (occ[modes_ - 1] != remaining)
        throw dimension_error("BosonBasis::index_of: occupations do not sum to N");
    return rank;
}

}  // namespace mflab
