#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace scpseg {

/// The selected pixel subset P_u = P_s ∪ P_c with local <-> global index maps.
struct SelectionIndex {
  static constexpr std::int32_t kAbsent = -1;

  std::size_t n = 0;                  // total pixel count
  std::vector<std::uint32_t> p_c;     // constrained pixels, sorted
  std::vector<std::uint32_t> p_s;     // random sample, sorted
  std::vector<std::uint32_t> p_u;     // sorted union; p_u[i] is P_u(i)
  std::vector<std::int32_t> fwd;      // pixel -> local index, kAbsent if unselected

  std::size_t n_c() const noexcept { return p_c.size(); }
  std::size_t n_s() const noexcept { return p_s.size(); }
  std::size_t n_u() const noexcept { return p_u.size(); }

  std::uint32_t inv(std::size_t local) const { return p_u[local]; }

  bool contains(std::uint32_t pixel) const {
    return pixel < fwd.size() && fwd[pixel] != kAbsent;
  }

  std::optional<std::uint32_t> local(std::uint32_t pixel) const {
    if (!contains(pixel)) return std::nullopt;
    return static_cast<std::uint32_t>(fwd[pixel]);
  }

  /// Builds the union and maps. Inputs need not be sorted or unique;
  /// throws index_out_of_range for pixels >= n.
  static SelectionIndex from_sets(std::size_t n, std::vector<std::uint32_t> p_c,
                                  std::vector<std::uint32_t> p_s);

  /// Selection of exactly the given pixels (used as p_s, no constrained set).
  static SelectionIndex of(std::size_t n, std::vector<std::uint32_t> pixels) {
    return from_sets(n, {}, std::move(pixels));
  }
};

}  // namespace scpseg
