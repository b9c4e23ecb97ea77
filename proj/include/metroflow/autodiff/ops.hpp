#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "metroflow/autodiff/tape.hpp"

namespace metroflow::ad {

// Dense ops. All inputs must live on the same tape.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// x[m×n] + bias[1×n], bias broadcast over rows.
Var add_bias(Var x, Var bias);
Var relu(Var x);
Var sigmoid(Var x);
Var abs(Var x);
Var concat_cols(Var a, Var b);
Var concat_rows(Var a, Var b);
/// Per-column maximum over all rows → 1×d. Ties route gradient to the first row.
Var max_over_rows(Var rows);
Var sum(Var x);
Var mean(Var x);
Var gather_rows(Var x, std::span<const std::uint32_t> indices);
/// Rows [begin, end).
Var slice_rows(Var x, std::size_t begin, std::size_t end);

/// Grouping of source rows by target vertex (CSR). Entry e of target v lives in
/// [offsets[v], offsets[v+1]) and names source row sources[e].
struct SegmentIndex {
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> sources;

  std::size_t num_targets() const noexcept { return offsets.size() - 1; }
  std::size_t num_entries() const noexcept { return sources.size(); }
  std::size_t degree(std::size_t v) const noexcept { return offsets[v + 1] - offsets[v]; }
};

// Neighborhood ops over stacked graph signals: x holds B blocks of n rows (one
// block per sample), the index describes one n-vertex graph shared by all
// blocks, and per-entry coefficients are shared across blocks as well. The
// index is referenced by the backward rule and must outlive the tape.

/// out[v] = Σ_e const_coef[e]·coef[e]·x[src_e]. Either coefficient may be absent
/// (treated as 1). coef is an E×1 var; const_coef has E entries.
Var neighbor_sum(Var x, const SegmentIndex& index, std::optional<Var> coef,
                 std::span<const double> const_coef = {});

/// out[v,c] = relu(max_e (coef[e]·x[src_e,c] + bias[c])); rows of isolated
/// vertices are zero. Gradient goes to the first maximizing entry per column.
Var neighbor_max_pool(Var x, const SegmentIndex& index, std::optional<Var> coef, Var bias);

}  // namespace metroflow::ad
