#include "scpseg/selection.hpp"

#include <algorithm>
#include <string>

#include "scpseg/error.hpp"

namespace scpseg {

namespace {

void sort_unique(std::vector<std::uint32_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

SelectionIndex SelectionIndex::from_sets(std::size_t n, std::vector<std::uint32_t> p_c,
                                         std::vector<std::uint32_t> p_s) {
  sort_unique(p_c);
  sort_unique(p_s);
  for (const auto* set : {&p_c, &p_s}) {
    if (!set->empty() && set->back() >= n) {
      throw Error(Errc::index_out_of_range,
                  "selected pixel " + std::to_string(set->back()) + " outside image of " +
                      std::to_string(n) + " pixels");
    }
  }
  SelectionIndex sel;
  sel.n = n;
  sel.p_u.reserve(p_c.size() + p_s.size());
  std::set_union(p_c.begin(), p_c.end(), p_s.begin(), p_s.end(), std::back_inserter(sel.p_u));
  sel.fwd.assign(n, kAbsent);
  for (std::size_t i = 0; i < sel.p_u.size(); ++i) {
    sel.fwd[sel.p_u[i]] = static_cast<std::int32_t>(i);
  }
  sel.p_c = std::move(p_c);
  sel.p_s = std::move(p_s);
  return sel;
}

}  // namespace scpseg
