#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "blockrand/errors.hpp"
#include "blockrand/fields.hpp"
#include "blockrand/rng.hpp"

namespace blockrand {

/// Default resource guard for exhaustive enumeration. Larger supports must
/// go through Monte Carlo instead.
inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// A blocked experimental design: r treatments, b blocks of sizes n_c.
/// Treatment ids are 1..r throughout the public API; block indexes are
/// 0-based. Immutable after construction.
class BlockDesign {
 public:
  BlockDesign(int num_treatments, std::vector<int> block_sizes)
      : r_(num_treatments), sizes_(std::move(block_sizes)) {
    if (r_ < 2) throw DesignError("design: number of treatments r must be >= 2");
    if (sizes_.empty()) throw DesignError("design: at least one block required");
    for (std::size_t c = 0; c < sizes_.size(); ++c) {
      if (sizes_[c] < r_) {
        throw DesignError("design: block_sizes[" + std::to_string(c) +
                          "] = " + std::to_string(sizes_[c]) +
                          " is smaller than r = " + std::to_string(r_));
      }
    }
    offsets_.resize(sizes_.size() + 1, 0);
    for (std::size_t c = 0; c < sizes_.size(); ++c) {
      offsets_[c + 1] = offsets_[c] + sizes_[c];
    }
  }

  /// Single-stratum design of n units (complete randomization view).
  static BlockDesign single(int n, int r) { return BlockDesign(r, {n}); }

  int num_treatments() const { return r_; }
  int num_blocks() const { return static_cast<int>(sizes_.size()); }
  int block_size(int c) const { return sizes_[c]; }
  const std::vector<int>& block_sizes() const { return sizes_; }
  int total_units() const { return offsets_.back(); }
  int min_block_size() const { return *std::min_element(sizes_.begin(), sizes_.end()); }

  /// z = n mod r for the whole domain.
  int remainder() const { return total_units() % r_; }
  /// z_c = n_c mod r.
  int block_remainder(int c) const { return sizes_[c] % r_; }

  /// Index of the first unit of block c in the flattened unit order.
  int unit_offset(int c) const { return offsets_[c]; }

  /// True when r divides every block size (diff and HT estimators coincide).
  bool divides_all_blocks() const {
    return std::all_of(sizes_.begin(), sizes_.end(), [this](int n) { return n % r_ == 0; });
  }

  bool operator==(const BlockDesign& other) const = default;

 private:
  int r_;
  std::vector<int> sizes_;
  std::vector<int> offsets_;
};

/// One treatment label in 1..r per unit, flattened block by block.
struct Assignment {
  std::vector<int> labels;

  bool operator==(const Assignment& other) const = default;
};

/// Tallies #T_{cs} per block and #T_s totals. Index [c][s-1] / [s-1].
struct AssignmentCounts {
  std::vector<std::vector<int>> per_block;
  std::vector<int> totals;
};

/// Exact tallies of an assignment against a design.
inline AssignmentCounts counts_of(const Assignment& assignment, const BlockDesign& design) {
  if (static_cast<int>(assignment.labels.size()) != design.total_units()) {
    throw ShapeError("assignment has " + std::to_string(assignment.labels.size()) +
                     " labels, design has " + std::to_string(design.total_units()) + " units");
  }
  const int r = design.num_treatments();
  AssignmentCounts counts;
  counts.per_block.assign(design.num_blocks(), std::vector<int>(r, 0));
  counts.totals.assign(r, 0);
  for (int c = 0; c < design.num_blocks(); ++c) {
    const int offset = design.unit_offset(c);
    for (int k = 0; k < design.block_size(c); ++k) {
      const int label = assignment.labels[offset + k];
      if (label < 1 || label > r) {
        throw ShapeError("treatment label " + std::to_string(label) + " outside 1.." +
                         std::to_string(r));
      }
      ++counts.per_block[c][label - 1];
      ++counts.totals[label - 1];
    }
  }
  return counts;
}

namespace detail {

// Balance over a stratum of m units: z = m mod r treatments occur
// floor(m/r)+1 times, the rest floor(m/r) times.
inline bool counts_balanced(const std::vector<int>& counts, int m, int r) {
  const int q = m / r;
  const int z = m % r;
  int extras = 0;
  for (int s = 0; s < r; ++s) {
    if (counts[s] == q + 1) {
      ++extras;
    } else if (counts[s] != q) {
      return false;
    }
  }
  return extras == z;
}

}  // namespace detail

enum class RandomizationMode { Block, Complete };

/// Balance invariant of an assignment under the given randomization scope.
inline bool is_balanced(const Assignment& assignment, const BlockDesign& design,
                        RandomizationMode mode = RandomizationMode::Block) {
  const AssignmentCounts counts = counts_of(assignment, design);
  if (mode == RandomizationMode::Complete) {
    return detail::counts_balanced(counts.totals, design.total_units(),
                                   design.num_treatments());
  }
  for (int c = 0; c < design.num_blocks(); ++c) {
    if (!detail::counts_balanced(counts.per_block[c], design.block_size(c),
                                 design.num_treatments())) {
      return false;
    }
  }
  return true;
}

inline BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt result = 1;
  for (int i = 0; i < k; ++i) {
    result *= n - i;
    result /= i + 1;  // exact: product of j consecutive integers divides j!
  }
  return result;
}

/// Number of balanced completely randomized assignments of n units to r
/// treatments: binom(r,z) * prod binom(remaining, floor(n/r)+1 or floor(n/r)).
inline BigInt count_balanced_assignments(int n, int r) {
  if (r < 1) throw DesignError("count_balanced_assignments: r must be >= 1");
  if (n < r) {
    throw DesignError("count_balanced_assignments: n = " + std::to_string(n) +
                      " < r = " + std::to_string(r) + " (design invalid)");
  }
  const int q = n / r;
  const int z = n % r;
  BigInt total = binomial(r, z);
  int remaining = n;
  for (int i = 0; i < z; ++i) {
    total *= binomial(remaining, q + 1);
    remaining -= q + 1;
  }
  for (int i = 0; i < r - z; ++i) {
    total *= binomial(remaining, q);
    remaining -= q;
  }
  return total;
}

/// Support size of balanced block randomization: product over blocks.
inline BigInt count_block_assignments(const BlockDesign& design) {
  BigInt total = 1;
  for (int c = 0; c < design.num_blocks(); ++c) {
    total *= count_balanced_assignments(design.block_size(c), design.num_treatments());
  }
  return total;
}

/// Re-entrant enumerator of all balanced assignments of a single stratum,
/// in lexicographic (treatment subset, label permutation) order. Each
/// balanced labeling is produced exactly once.
class CompleteEnumerator {
 public:
  CompleteEnumerator(int n, int r) : n_(n), r_(r), q_(n / r), z_(n % r) {
    if (r < 1) throw DesignError("enumerate: r must be >= 1");
    if (n < r) {
      throw DesignError("enumerate: n = " + std::to_string(n) + " < r = " + std::to_string(r));
    }
    subset_.resize(z_);
    std::iota(subset_.begin(), subset_.end(), 1);  // first z treatment ids
    rebuild_labels();
  }

  /// Writes the next assignment's labels; false when exhausted.
  bool next(std::vector<int>& labels) {
    if (done_) return false;
    if (fresh_subset_) {
      fresh_subset_ = false;
      labels = labels_;
      return true;
    }
    if (std::next_permutation(labels_.begin(), labels_.end())) {
      labels = labels_;
      return true;
    }
    if (!advance_subset()) {
      done_ = true;
      return false;
    }
    rebuild_labels();
    fresh_subset_ = false;
    labels = labels_;
    return true;
  }

  int stratum_size() const { return n_; }

 private:
  // Lexicographically next z-subset of {1..r}; false when exhausted.
  bool advance_subset() {
    if (z_ == 0) return false;
    int i = z_ - 1;
    while (i >= 0 && subset_[i] == r_ - z_ + 1 + i) --i;
    if (i < 0) return false;
    ++subset_[i];
    for (int j = i + 1; j < z_; ++j) subset_[j] = subset_[j - 1] + 1;
    return true;
  }

  // Lexicographically smallest label vector for the current subset:
  // treatments in the subset occur q+1 times, the others q times.
  void rebuild_labels() {
    labels_.clear();
    labels_.reserve(n_);
    std::size_t next_extra = 0;
    for (int s = 1; s <= r_; ++s) {
      int copies = q_;
      if (next_extra < subset_.size() && subset_[next_extra] == s) {
        ++copies;
        ++next_extra;
      }
      labels_.insert(labels_.end(), copies, s);
    }
    fresh_subset_ = true;
  }

  int n_, r_, q_, z_;
  std::vector<int> subset_;
  std::vector<int> labels_;
  bool fresh_subset_ = true;
  bool done_ = false;
};

/// Cartesian product of per-block balanced enumerations (independent
/// randomization across blocks); rightmost block varies fastest.
class BlockEnumerator {
 public:
  explicit BlockEnumerator(const BlockDesign& design) : design_(design) {
    const int b = design.num_blocks();
    enumerators_.reserve(b);
    block_labels_.resize(b);
    for (int c = 0; c < b; ++c) {
      enumerators_.emplace_back(design.block_size(c), design.num_treatments());
      enumerators_[c].next(block_labels_[c]);
    }
    first_ = true;
  }

  bool next(std::vector<int>& labels) {
    if (done_) return false;
    if (!first_) {
      int c = design_.num_blocks() - 1;
      for (; c >= 0; --c) {
        if (enumerators_[c].next(block_labels_[c])) break;
        enumerators_[c] = CompleteEnumerator(design_.block_size(c), design_.num_treatments());
        enumerators_[c].next(block_labels_[c]);
      }
      if (c < 0) {
        done_ = true;
        return false;
      }
    }
    first_ = false;
    labels.clear();
    labels.reserve(design_.total_units());
    for (const auto& part : block_labels_) {
      labels.insert(labels.end(), part.begin(), part.end());
    }
    return true;
  }

 private:
  BlockDesign design_;
  std::vector<CompleteEnumerator> enumerators_;
  std::vector<std::vector<int>> block_labels_;
  bool first_ = true;
  bool done_ = false;
};

namespace detail {

inline void check_cap(const BigInt& support, std::uint64_t cap) {
  if (support > BigInt(cap)) {
    throw EnumerationCapError("support size " + support.str() + " exceeds enumeration cap " +
                              std::to_string(cap) + "; use Monte Carlo instead");
  }
}

}  // namespace detail

/// Visits every balanced completely randomized assignment of n units.
template <class Visitor>
void enumerate_complete(int n, int r, Visitor&& visit,
                        std::uint64_t cap = kDefaultEnumerationCap) {
  detail::check_cap(count_balanced_assignments(n, r), cap);
  CompleteEnumerator enumerator(n, r);
  Assignment assignment;
  while (enumerator.next(assignment.labels)) visit(assignment);
}

/// Visits every balanced block randomized assignment of the design.
template <class Visitor>
void enumerate_block(const BlockDesign& design, Visitor&& visit,
                     std::uint64_t cap = kDefaultEnumerationCap) {
  detail::check_cap(count_block_assignments(design), cap);
  BlockEnumerator enumerator(design);
  Assignment assignment;
  while (enumerator.next(assignment.labels)) visit(assignment);
}

namespace detail {

// Fills labels[offset .. offset+m) with one uniform balanced draw:
// the z treatments receiving the extra replicate are a uniform z-subset,
// and the label multiset is then uniformly permuted over the units.
inline void sample_stratum(std::vector<int>& labels, int offset, int m, int r, SplitRng& rng) {
  const int q = m / r;
  const int z = m % r;
  std::vector<int> treatments(r);
  std::iota(treatments.begin(), treatments.end(), 1);
  for (int i = 0; i < z; ++i) {  // partial Fisher-Yates: first z ids = uniform subset
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint32_t>(r - i)));
    std::swap(treatments[i], treatments[j]);
  }
  int pos = offset;
  for (int i = 0; i < r; ++i) {
    const int copies = q + (i < z ? 1 : 0);
    for (int k = 0; k < copies; ++k) labels[pos++] = treatments[i];
  }
  for (int i = m - 1; i > 0; --i) {  // uniform shuffle of the label multiset
    const int j = static_cast<int>(rng.below(static_cast<std::uint32_t>(i + 1)));
    std::swap(labels[offset + i], labels[offset + j]);
  }
}

}  // namespace detail

/// One balanced completely randomized draw over a single stratum.
inline Assignment sample_complete(int n, int r, SplitRng& rng) {
  if (r < 1 || n < r) {
    throw DesignError("sample_complete: need n >= r >= 1, got n = " + std::to_string(n) +
                      ", r = " + std::to_string(r));
  }
  SplitRng draw(rng.next());
  Assignment assignment;
  assignment.labels.resize(n);
  detail::sample_stratum(assignment.labels, 0, n, r, draw);
  return assignment;
}

/// One balanced block randomized draw; blocks use independent substreams
/// keyed by block index, so per-block streams do not interact.
inline Assignment sample_block(const BlockDesign& design, SplitRng& rng) {
  SplitRng draw(rng.next());
  Assignment assignment;
  assignment.labels.resize(design.total_units());
  for (int c = 0; c < design.num_blocks(); ++c) {
    SplitRng block_rng = draw.split(static_cast<std::uint64_t>(c));
    detail::sample_stratum(assignment.labels, design.unit_offset(c), design.block_size(c),
                           design.num_treatments(), block_rng);
  }
  return assignment;
}

}  // namespace blockrand
