#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "canet/rng.hpp"

namespace canet {

struct fold_split {
    int fold = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
};

/// Deterministic shuffled k-fold partition. Every case validates exactly
/// once; validation blocks differ in size by at most one.
inline std::vector<fold_split> make_folds(std::vector<std::string> case_ids, int k,
                                          std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("make_folds: k must be >= 2");
    if (std::size_t(k) > case_ids.size())
        throw std::invalid_argument("make_folds: more folds than cases");
    rng r(seed);
    shuffle(r, case_ids);
    const std::size_t n = case_ids.size();
    std::vector<fold_split> folds(std::size_t(k), fold_split{});
    for (int f = 0; f < k; ++f) {
        const std::size_t lo = n * std::size_t(f) / std::size_t(k);
        const std::size_t hi = n * std::size_t(f + 1) / std::size_t(k);
        folds[std::size_t(f)].fold = f;
        for (std::size_t i = 0; i < n; ++i)
            (i >= lo && i < hi ? folds[std::size_t(f)].val_ids : folds[std::size_t(f)].train_ids)
                .push_back(case_ids[i]);
    }
    return folds;
}

}  // namespace canet
