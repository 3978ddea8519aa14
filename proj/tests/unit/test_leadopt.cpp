#include <cmath>

#include "doctest.h"
#include "molpla/chem.hpp"
#include "molpla/leadopt.hpp"
#include "molpla/smiles.hpp"
#include "roundtrip.hpp"
#include "support.hpp"

#ifdef MOLPLA_HAVE_EIGEN
#include <Eigen/Dense>
#endif

using namespace molpla;

namespace {

bool has_key(const std::vector<ReattachmentCandidate>& v, const std::string& smiles) {
  const std::string k = canonical_key(parse_smiles(smiles));
  for (const auto& c : v) {
    if (c.key == k) return true;
  }
  return false;
}

Model tiny_model(int d = 8) {
  EncoderConfig c;
  c.d = d;
  c.layers = 2;
  c.seed = 21;
  return Model(c);
}

}  // namespace

TEST_CASE("reattach: phenyl plus hydroxyl gives phenol") {
  int attempted = 0;
  const auto c = reattach(parse_smiles("*~c1ccccc1"), 0, parse_smiles("*~O"), {}, &attempted);
  CHECK(has_key(c, "Oc1ccccc1"));
  CHECK(attempted >= static_cast<int>(c.size()));
  for (const auto& x : c) {
    CHECK(x.valid);
    CHECK(valence_check(x.molecule).empty());
    CHECK(x.molecule.num_components() == 1);
    CHECK(x.filled_bond.type == BondType::Single);
  }
}

TEST_CASE("reattach: valence limits exclude triple bonds to a saturated carbon") {
  const auto c = reattach(parse_smiles("*~C(C)(C)C"), 0, parse_smiles("*~C"));
  REQUIRE(c.size() == 1);
  CHECK(c[0].filled_bond.type == BondType::Single);
  CHECK(c[0].key == canonical_key(parse_smiles("CC(C)(C)C")));
  const auto methyl = reattach(parse_smiles("*~C"), 0, parse_smiles("*~C"));
  CHECK(has_key(methyl, "CC"));
  CHECK(has_key(methyl, "C=C"));
  CHECK(has_key(methyl, "C#C"));
  CHECK(methyl.size() == 3);
}

TEST_CASE("reattach: aromatic joint only between aromatic ring atoms; errors") {
  const auto c = reattach(parse_smiles("*~c1ccccc1"), 0, parse_smiles("*~c1ccccc1"));
  CHECK(has_key(c, "c1ccc(cc1)-c1ccccc1"));
  bool any_aromatic = false;
  for (const auto& x : c) any_aromatic |= x.filled_bond.type == BondType::Aromatic;
  const auto chain = reattach(parse_smiles("*~CC"), 0, parse_smiles("*~c1ccccc1"));
  for (const auto& x : chain) CHECK(x.filled_bond.type != BondType::Aromatic);
  CHECK_THROWS_AS(reattach(parse_smiles("*~CC~*"), 0, parse_smiles("*~C~*")), NoStubError);
  CHECK_THROWS(reattach(parse_smiles("CC"), 0, parse_smiles("*~C")));
  (void)any_aromatic;
}

TEST_CASE("reattach: bridging-atom enumeration") {
  ReattachOptions opts;
  opts.enumerate_linker_element = true;
  const auto c = reattach(parse_smiles("*~c1ccccc1"), 0, parse_smiles("*~C"), opts);
  CHECK(has_key(c, "Cc1ccccc1"));
  CHECK(has_key(c, "COc1ccccc1"));
  CHECK(has_key(c, "CNc1ccccc1"));
  CHECK(has_key(c, "CSc1ccccc1"));
  CHECK(has_key(c, "CCc1ccccc1"));
}

TEST_CASE("reattach: decomposition round trip over the corpus") {
  const auto corpus = testsupport::corpus();
  long instances = 0, recovered = 0;
  for (size_t i = 0; i < corpus.size(); i += 5) {
    const MolGraph g = parse_smiles(corpus[i]);
    const std::string key = canonical_key(g);
    int core_id = 0;
    for (const auto& core : enumerate_putative_cores(g, RuleSet{})) {
      for (const auto& inst : enumerate_decompositions(g, core.atoms, core_id)) {
        ++instances;
        const auto keys = testsupport::reattach_all(inst);
        if (keys.count(key)) {
          ++recovered;
        } else {
          FAIL_CHECK("not recovered: " << corpus[i] << " via " << write_smiles(inst.query));
        }
      }
      ++core_id;
    }
  }
  CHECK(instances > 1000);
  CHECK(recovered == instances);
}

TEST_CASE("descriptors") {
  const Descriptors b = descriptor_report(parse_smiles("c1ccccc1"));
  CHECK(b.heavy_atoms == 6);
  CHECK(b.rings == 1);
  CHECK(b.rotatable_bonds == 0);
  CHECK(b.hbd == 0);
  CHECK(b.hba == 0);
  CHECK(b.mol_weight == doctest::Approx(6 * 12.011 + 6 * 1.008).epsilon(1e-9));
  CHECK(b.mol_weight == doctest::Approx(78.11).epsilon(1e-3));
  const Descriptors c = descriptor_report(parse_smiles("C"));
  CHECK(c.heavy_atoms == 1);
  CHECK(c.rings == 0);
  CHECK(c.rotatable_bonds == 0);
  CHECK(c.hbd == 0);
  CHECK(c.hba == 0);
  const Descriptors e = descriptor_report(parse_smiles("CCO"));
  CHECK(e.hbd == 1);
  CHECK(e.hba == 1);
  CHECK(e.rotatable_bonds == 0);
  CHECK(e.mol_weight == doctest::Approx(2 * 12.011 + 15.999 + 6 * 1.008).epsilon(1e-9));
  const Descriptors p = descriptor_report(parse_smiles("CCCC"));
  CHECK(p.rotatable_bonds == 1);
  const Descriptors am = descriptor_report(parse_smiles("CC(=O)Nc1ccccc1"));
  CHECK(am.hbd == 1);
  CHECK(am.hba == 2);
  CHECK(am.rotatable_bonds == 2);
  CHECK(descriptor_report(parse_smiles("C1CC2CCC1CC2")).rings == 2);
  CHECK(am.to_json().contains("mol_weight"));
}

TEST_CASE("PCA: two rows are symmetric; degenerate input gives zeros") {
  Matrix h(2, 3);
  h(0, 0) = 1;
  h(0, 1) = 2;
  h(1, 2) = -1;
  const NodeColoring c = pca_first_component(h);
  CHECK(c.scores[0] == doctest::Approx(-c.scores[1]));
  CHECK(std::abs(c.scores[0]) > 0.1);
  Matrix same(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) same(i, j) = j * 0.5;
  const NodeColoring z = pca_first_component(same);
  CHECK(z.degenerate);
  for (double s : z.scores) CHECK(s == 0.0);
  CHECK_THROWS_AS(pca_first_component(Matrix(1, 3)), DegenerateError);
  Model m = tiny_model();
  CHECK(node_pca_coloring(m, parse_smiles("*~*")).degenerate);
}

#ifdef MOLPLA_HAVE_EIGEN
TEST_CASE("PCA: eigenvalue and loading agree with a full eigendecomposition") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(30));
    const int d = 2 + static_cast<int>(rng.index(15));
    Matrix h(n, d);
    for (auto& v : h.data) v = rng.normal();
    // Stretch one direction so the leading eigenvalue is well separated.
    for (int i = 0; i < n; ++i) h(i, 0) *= 4;
    const NodeColoring c = pca_first_component(h);
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) x(i, j) = h(i, j);
    x.rowwise() -= x.colwise().mean();
    const Eigen::MatrixXd cov = x.transpose() * x / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const double top = es.eigenvalues()(d - 1);
    CHECK(c.eigenvalue == doctest::Approx(top).epsilon(1e-6));
    double var = 0, mean = 0;
    for (double s : c.scores) {
      var += s * s;
      mean += s;
    }
    CHECK(std::abs(mean / n) < 1e-9);
    CHECK(var / n == doctest::Approx(top).epsilon(1e-6));
    Eigen::VectorXd v = es.eigenvectors().col(d - 1);
    Eigen::Index big;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0) v = -v;
    for (int j = 0; j < d; ++j) CHECK(c.loading[j] == doctest::Approx(v(j)).scale(1).epsilon(1e-5));
  }
}
#endif

TEST_CASE("PCA coloring is invariant under atom relabeling") {
  Model m = tiny_model(16);
  Rng rng(2);
  for (const std::string s : {"CC(=O)Nc1ccc(O)cc1", "*~C(=O)N1CCOCC1"}) {
    const MolGraph g = parse_smiles(s);
    const NodeColoring base = node_pca_coloring(m, g);
    for (int t = 0; t < 20; ++t) {
      const auto perm = testsupport::random_perm(g.num_atoms(), rng);
      const NodeColoring p = node_pca_coloring(m, g.permuted(perm));
      for (int i = 0; i < g.num_atoms(); ++i) CHECK(std::abs(p.scores[perm[i]] - base.scores[i]) < 1e-6);
    }
  }
}

TEST_CASE("split_at_bond and optimize_lead") {
  const MolGraph tol = parse_smiles("Cc1ccccc1");
  const DecompositionInstance inst = split_at_bond(tol, 0, 1);
  CHECK(canonical_key(inst.query) == canonical_key(parse_smiles("*~c1ccccc1")));
  CHECK(canonical_key(inst.rgroups.at(0)) == canonical_key(parse_smiles("*~C")));
  CHECK_THROWS_AS(split_at_bond(tol, 1, 1), GraphError);
  CHECK_THROWS_AS(split_at_bond(tol, 0, 3), GraphError);

  DatasetConfig dc;
  dc.common_threshold = 1e9;
  const PretrainDataset ds = build_pretrain_dataset({"Cc1ccccc1", "Oc1ccccc1C", "CCc1ccncc1", "NC(=O)C1CCCC1"}, dc);
  Model m = tiny_model();
  const RGroupLibrary lib = build_library(m, ds.rgroups, "ds", "ck");
  const ConditionVector none(m.config.condition_bits, 0);
  const LeadReport empty = optimize_lead(m, tol, 0, 1, none, lib, 0);
  CHECK(empty.candidates.empty());
  CHECK(empty.attempted == 0);
  CHECK(empty.valid_fraction() == 0.0);
  const LeadReport rep = optimize_lead(m, tol, 0, 1, none, lib, lib.size());
  bool own = false;
  for (const auto& c : rep.candidates) {
    own |= c.candidate.key == canonical_key(tol);
    CHECK(valence_check(c.candidate.molecule).empty());
  }
  CHECK(own);
  CHECK(rep.valid == static_cast<int>(rep.candidates.size()));
  CHECK(rep.valid_fraction() > 0);
  CHECK(rep.valid_fraction() <= 1);
  for (size_t i = 0; i + 1 < rep.candidates.size(); ++i) {
    CHECK(rep.candidates[i].candidate.score >= rep.candidates[i + 1].candidate.score);
  }
  const auto j = rep.to_json();
  CHECK(j["candidates"].size() == rep.candidates.size());
  CHECK(j["cut"]["bond"] == 0);
  const LeadReport again = optimize_lead(m, tol, 0, 1, none, lib, lib.size());
  CHECK(again.to_json() == j);
}
