#pragma once

#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "molpla/io.hpp"
#include "molpla/molgraph.hpp"
#include "molpla/rng.hpp"
#include "molpla/smiles.hpp"

namespace testsupport {

inline std::filesystem::path source_dir() { return MOLPLA_SOURCE_DIR; }

inline std::vector<std::string> corpus() { return molpla::read_lines(source_dir() / "data" / "corpus.smi"); }

inline std::vector<int> random_perm(int n, molpla::Rng& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p);
  return p;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("molpla_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Molecules exercising charges, stereo markers, stubs, masked bonds,
// bracket atoms, %nn closures and multiple components.
inline const std::vector<std::string>& extra_smiles() {
  static const std::vector<std::string> v = {
      "C", "CC", "C=C", "C#N", "CC(=O)O", "OCC", "[NH4+]", "[O-]C(=O)C", "C[N+](=O)[O-]",
      "F/C=C/F", "F/C=C\\F", "N[C@@H](C)C(=O)O", "N[C@H](C)C(=O)O", "*~O", "*~c1ccccc1",
      "*~C(=O)c1ccccc1", "c1ccc2ccccc2c1", "C%10CCCCC%10", "CC.O", "[Na+].[Cl-]",
      "O=S(=O)(N)c1ccccc1", "c1ccc2[nH]ccc2c1", "c1ccoc1", "c1ccsc1", "Cn1ccnc1", "O=c1cccc[nH]1",
      "C1CC2CCC1CC2", "[13CH4]", "B(O)(O)c1ccccc1", "P(=O)(O)(O)O", "[Si](C)(C)(C)C",
      "ClC(Cl)(Cl)Cl", "BrC=CBr", "IC#CI", "C[S+](C)C", "*~C.*~N",
  };
  return v;
}

}  // namespace testsupport
