#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "molpla/chem.hpp"
#include "molpla/leadopt.hpp"

namespace testsupport {

// Reattaches R-groups (from `rgroups`, one per cut) into the template stub by
// stub, highest stub index first so the remaining stub indices stay valid.
// Returns the canonical keys of every fully reattached molecule.
inline std::set<std::string> reattach_all(const molpla::MolGraph& query, const std::vector<molpla::MolGraph>& rgroups,
                                          std::vector<std::pair<int, int>> stub_and_rgroup) {
  using namespace molpla;
  std::sort(stub_and_rgroup.begin(), stub_and_rgroup.end(), [](auto a, auto b) { return a.first > b.first; });
  std::vector<MolGraph> frontier{query};
  for (const auto& [stub, rg] : stub_and_rgroup) {
    std::vector<MolGraph> next;
    std::set<std::string> seen;
    for (const MolGraph& g : frontier) {
      for (auto& c : reattach(g, stub, rgroups.at(rg))) {
        if (seen.insert(c.key).second) next.push_back(std::move(c.molecule));
      }
    }
    frontier = std::move(next);
  }
  std::set<std::string> keys;
  for (const MolGraph& g : frontier) keys.insert(canonical_key(g));
  return keys;
}

inline std::set<std::string> reattach_all(const molpla::DecompositionInstance& inst) {
  std::vector<std::pair<int, int>> cuts;
  for (const auto& c : inst.cuts) cuts.emplace_back(c.stub_q, c.rgroup);
  return reattach_all(inst.query, inst.rgroups, cuts);
}

}  // namespace testsupport
