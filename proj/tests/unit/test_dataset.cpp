#include <map>
#include <set>

#include "doctest.h"
#include "molpla/chem.hpp"
#include "molpla/dataset.hpp"
#include "molpla/io.hpp"
#include "molpla/registry.hpp"
#include "support.hpp"

using namespace molpla;

namespace {

std::set<std::string> bits_of(const std::string& smiles) {
  const auto& reg = PatternRegistry::builtin();
  const auto names = reg.names_of(condition_vector(parse_smiles(smiles)));
  return {names.begin(), names.end()};
}

InstanceRecord record_with(const std::vector<std::string>& rgroups) {
  InstanceRecord r;
  for (const auto& s : rgroups) {
    const MolGraph g = parse_smiles(s);
    r.rgroups.push_back(s);
    r.rgroup_keys.push_back(canonical_key(g));
    r.conditions.push_back(condition_vector(g));
  }
  return r;
}

const PretrainDataset& corpus_dataset() {
  static const PretrainDataset ds = build_pretrain_dataset(testsupport::corpus(), DatasetConfig{});
  return ds;
}

}  // namespace

TEST_CASE("registry: 64 slots, names resolve") {
  const auto& reg = PatternRegistry::builtin();
  CHECK(reg.size() == 64);
  CHECK(reg.index_of("hydroxyl").has_value());
  CHECK_FALSE(reg.index_of("no_such_group").has_value());
  CHECK_THROWS_AS(reg.from_names({"no_such_group"}), MolError);
  const ConditionVector c = reg.from_names({"hydroxyl", "amide"});
  CHECK(reg.names_of(c) == std::vector<std::string>{"hydroxyl", "amide"});
  CHECK(PatternRegistry::from_json(reg.to_json()).to_json() == reg.to_json());
}

TEST_CASE("condition vectors") {
  CHECK(bits_of("*~O") == std::set<std::string>{"hydroxyl"});
  const auto ketone = bits_of("*~C(=O)c1ccccc1");
  CHECK(ketone.count("carbonyl"));
  CHECK(ketone.count("ketone"));
  CHECK(ketone.count("aromatic_carbocycle"));
  const auto methyl = bits_of("*~C");
  CHECK(methyl.count("alkyl"));
  CHECK_FALSE(methyl.empty());
  CHECK(condition_vector(parse_smiles("*~C")).size() == 64);
  CHECK(bits_of("*~C(F)(F)F").count("trifluoromethyl"));
  CHECK(bits_of("*~c1ccncc1").count("aromatic_n_heterocycle"));
  CHECK_FALSE(bits_of("*~c1ccncc1").count("aromatic_carbocycle"));
}

TEST_CASE("percentile: linear interpolation") {
  CHECK(percentile({1, 2, 3, 4}, 50) == doctest::Approx(2.5));
  CHECK(percentile({1, 2, 3, 4}, 100) == doctest::Approx(4));
  CHECK(percentile({1, 2, 3, 4}, 0) == doctest::Approx(1));
  CHECK(percentile({10}, 99.99) == doctest::Approx(10));
  CHECK(percentile({0, 10}, 25) == doctest::Approx(2.5));
}

TEST_CASE("dedup_rgroups: atom order does not matter") {
  const auto recs = dedup_rgroups({record_with({"*~O"}), record_with({"O~*"})}, 99.99, std::nullopt);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].count == 2);
  CHECK_FALSE(recs[0].is_common);
}

TEST_CASE("dedup_rgroups: all-equal counts mark nothing common") {
  const auto recs =
      dedup_rgroups({record_with({"*~O", "*~N"}), record_with({"*~C", "*~F"}), record_with({"*~Cl", "*~Br"})},
                    99.99, std::nullopt);
  CHECK(recs.size() == 6);
  for (const auto& r : recs) CHECK_FALSE(r.is_common);
}

TEST_CASE("build: acyclic molecule is skipped") {
  const PretrainDataset ds = build_pretrain_dataset({"CCCC"}, DatasetConfig{});
  CHECK(ds.instances.empty());
  CHECK(ds.skipped.size() == 1);
  CHECK(ds.skipped[0].line == 0);
}

TEST_CASE("build: bad SMILES are logged, not fatal") {
  const PretrainDataset ds = build_pretrain_dataset({"C(", "Cc1ccccc1", "C(C)(C)(C)(C)C"}, DatasetConfig{});
  CHECK(ds.skipped.size() == 2);
  CHECK_FALSE(ds.instances.empty());
}

TEST_CASE("build: common filter drops instances whose R-groups are all common") {
  const std::vector<std::string> toy = {"Oc1ccccc1", "Oc1ccncc1", "OC1CCCCC1"};
  DatasetConfig cfg;
  cfg.common_threshold = 0.0;
  const PretrainDataset zero = build_pretrain_dataset(toy, cfg);
  CHECK(zero.instances.empty());
  CHECK(zero.raw_instances > 0);
  cfg.common_threshold = 1e9;
  const PretrainDataset none = build_pretrain_dataset(toy, cfg);
  CHECK(static_cast<long>(none.instances.size()) == none.raw_instances);
  // Hydroxyl occurs 3 times; everything else fewer.
  cfg.common_threshold = 2.5;
  const PretrainDataset some = build_pretrain_dataset(toy, cfg);
  for (const auto& inst : some.instances) {
    CHECK(inst.rgroup_keys != std::vector<std::string>{canonical_key(parse_smiles("*~O"))});
  }
}

TEST_CASE("build: corpus invariants") {
  const PretrainDataset& ds = corpus_dataset();
  REQUIRE(ds.molecules.size() == 500);
  std::map<int, Split> mol_split;
  int test = 0;
  for (const auto& m : ds.molecules) {
    mol_split[m.mol_id] = m.split;
    test += m.split == Split::Test;
  }
  const double frac = static_cast<double>(test) / ds.molecules.size();
  CHECK(frac >= 0.08);
  CHECK(frac <= 0.12);
  std::map<std::string, const RGroupRecord*> table;
  long total = 0;
  for (const auto& r : ds.rgroups) {
    CHECK(table.emplace(r.key, &r).second);
    CHECK(r.count >= 1);
    total += r.count;
  }
  for (const auto& inst : ds.instances) {
    CHECK(inst.split == mol_split.at(inst.mol_id));
    int common = 0;
    for (const auto& k : inst.rgroup_keys) common += table.at(k)->is_common;
    CHECK(2 * common <= static_cast<int>(inst.rgroup_keys.size()));
    CHECK(inst.rgroups.size() == inst.cuts.size());
  }
  CHECK(ds.stats["rgroup_occurrences"].get<long>() == total);
}

TEST_CASE("build: stored records reparse to consistent graphs") {
  const PretrainDataset& ds = corpus_dataset();
  const auto& reg = PatternRegistry::builtin();
  for (size_t i = 0; i < ds.instances.size(); i += 7) {
    const InstanceRecord& r = ds.instances[i];
    const MolGraph mol = parse_smiles(r.mol);
    const MolGraph q = parse_smiles(r.query);
    for (size_t c = 0; c < r.cuts.size(); ++c) {
      const InstanceCut& cut = r.cuts[c];
      CHECK(q.atom(cut.q_stub).is_stub);
      const MolGraph rg = parse_smiles(r.rgroups[cut.rgroup]);
      CHECK(rg.atom(cut.r_stub).is_stub);
      CHECK(canonical_key(rg) == r.rgroup_keys[cut.rgroup]);
      CHECK(reg.evaluate(rg) == r.conditions[cut.rgroup]);
      CHECK(cut.m_index >= 0);
      CHECK(cut.m_index < mol.num_atoms());
      // The linker node has the same element as the query stub's neighbour.
      const int qn = q.neighbors(cut.q_stub)[0].atom;
      CHECK(q.atom(qn).atomic_number == mol.atom(cut.m_index).atomic_number);
    }
  }
}

TEST_CASE("build is deterministic and persists byte-identically") {
  const auto corpus = testsupport::corpus();
  const std::vector<std::string> head(corpus.begin(), corpus.begin() + 120);
  const PretrainDataset a = build_pretrain_dataset(head, DatasetConfig{});
  const PretrainDataset b = build_pretrain_dataset(head, DatasetConfig{});
  const auto da = testsupport::temp_dir("ds_a");
  const auto db = testsupport::temp_dir("ds_b");
  save_dataset(a, da);
  save_dataset(b, db);
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(da)) {
    ++files;
    CHECK_MESSAGE(hash_file(e.path()) == hash_file(db / e.path().filename()), e.path().filename().string());
  }
  CHECK(files >= 8);
  const LoadedDataset l = load_dataset(da);
  CHECK(l.train.size() + l.valid.size() + l.test.size() == a.instances.size());
  CHECK(l.rgroups.size() == a.rgroups.size());
  CHECK(l.manifest["config"]["core_mode"] == "putative");
  if (!l.test.empty()) {
    CHECK(l.test[0].to_json() == a.split(Split::Test)[0]->to_json());
  }
}

TEST_CASE("build: murcko mode uses one core per molecule") {
  const auto corpus = testsupport::corpus();
  const std::vector<std::string> head(corpus.begin(), corpus.begin() + 60);
  DatasetConfig cfg;
  cfg.core_mode = CoreMode::Murcko;
  const PretrainDataset ds = build_pretrain_dataset(head, cfg);
  for (const auto& inst : ds.instances) CHECK(inst.core_id == 0);
  for (const auto& m : ds.molecules) CHECK(m.n_cores <= 1);
}

TEST_CASE("scaffold_split examples") {
  std::vector<std::string> ten = {"c1ccccc1C", "C1CCCCC1C", "c1ccncc1C", "C1CCNCC1C", "c1ccoc1C",
                                  "c1ccsc1C",  "C1CCOC1C",  "C1CC1CC",   "C1CCC1C",   "c1ccc2ccccc2c1C"};
  const auto s = scaffold_split(ten);
  std::map<Split, int> n;
  for (auto x : s) ++n[x];
  CHECK(n[Split::Train] == 8);
  CHECK(n[Split::Valid] == 1);
  CHECK(n[Split::Test] == 1);
  CHECK(scaffold_split(ten) == s);

  std::vector<std::string> nine_one;
  const std::vector<std::string> subs = {"C", "O", "N", "F", "Cl", "Br", "CC", "CO", "CN"};
  for (const auto& x : subs) nine_one.push_back("c1ccccc1" + x);
  nine_one.push_back("C1CCCCC1C");
  const auto t = scaffold_split(nine_one);
  for (int i = 1; i < 9; ++i) CHECK(t[i] == t[0]);
  CHECK(t[9] != t[0]);
}

TEST_CASE("scaffold_split never splits a scaffold group") {
  const auto corpus = testsupport::corpus();
  const auto s = scaffold_split(corpus);
  std::map<std::string, Split> group;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const std::string key = scaffold_key(parse_smiles(corpus[i]));
    auto [it, fresh] = group.emplace(key, s[i]);
    CHECK(it->second == s[i]);
  }
}
