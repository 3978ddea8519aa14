#include "molpla/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>

#include "molpla/chem.hpp"

namespace molpla {

namespace {

constexpr int kHydrogenSlot = -2;

bool is_organic_symbol(int z) {
  switch (z) {
    case 5: case 6: case 7: case 8: case 9: case 15: case 16: case 17: case 35: case 53:
      return true;
    default:
      return false;
  }
}

bool is_aromatic_organic(int z) {
  return z == 5 || z == 6 || z == 7 || z == 8 || z == 15 || z == 16;
}

// Valence used when deriving implicit H counts; masked bonds count as single
// and aromatic bonds as one plus a single pi contribution for the atom.
int used_valence_for_implicit_h(const MolGraph& g, int atom) {
  int used = 0;
  int aromatic_bonds = 0;
  for (const Neighbor& nb : g.neighbors(atom)) {
    const BondType t = g.bond(nb.bond).attrs.type;
    if (t == BondType::Aromatic) {
      ++aromatic_bonds;
      ++used;
    } else {
      used += static_cast<int>(bond_order(t));
    }
  }
  if (g.atom(atom).is_aromatic() && aromatic_bonds > 0) ++used;
  return used;
}

// Implicit hydrogen count an unbracketed organic-subset atom would receive.
// Returns -1 when no allowed valence can accommodate the bonds.
int implicit_hydrogens(const MolGraph& g, int atom) {
  const AtomAttrs& a = g.atom(atom);
  const std::vector<int> allowed = allowed_valences(a.atomic_number, 0);
  if (allowed.empty()) return 0;
  const int used = used_valence_for_implicit_h(g, atom);
  if (a.is_aromatic()) return std::max(0, allowed.front() - used);
  for (int v : allowed) {
    if (v >= used) return v - used;
  }
  return -1;
}

int permutation_parity(const std::vector<int>& from, const std::vector<int>& to) {
  // parity of the permutation taking `from` to `to`; both hold the same ids
  std::vector<int> pos;
  pos.reserve(from.size());
  for (int id : from) {
    auto it = std::find(to.begin(), to.end(), id);
    if (it == to.end()) return -1;
    pos.push_back(static_cast<int>(it - to.begin()));
  }
  int inversions = 0;
  for (size_t i = 0; i < pos.size(); ++i) {
    for (size_t j = i + 1; j < pos.size(); ++j) {
      if (pos[i] > pos[j]) ++inversions;
    }
  }
  return inversions & 1;
}

Chirality flip(Chirality c) {
  if (c == Chirality::TetrahedralCW) return Chirality::TetrahedralCCW;
  if (c == Chirality::TetrahedralCCW) return Chirality::TetrahedralCW;
  return c;
}

// Reference neighbour order for stored chirality: adjacency order, then H.
std::vector<int> reference_order(const MolGraph& g, int atom) {
  std::vector<int> ref;
  for (const Neighbor& nb : g.neighbors(atom)) ref.push_back(nb.atom);
  if (g.atom(atom).num_hs == 1) ref.push_back(kHydrogenSlot);
  return ref;
}

BondDirection flip(BondDirection d) {
  if (d == BondDirection::EndUpRight) return BondDirection::EndDownRight;
  if (d == BondDirection::EndDownRight) return BondDirection::EndUpRight;
  return d;
}

class Parser {
 public:
  Parser(std::string_view text, bool check_valence) : text_(text), check_valence_(check_valence) {}

  MolGraph run() {
    if (text_.empty()) throw SyntaxError("empty SMILES");
    int prev = -1;
    std::vector<int> branch_stack;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(') {
        if (prev < 0) throw error("branch without preceding atom");
        if (pending_bond_) throw error("bond before branch");
        branch_stack.push_back(prev);
        ++pos_;
      } else if (c == ')') {
        if (branch_stack.empty()) throw error("unbalanced ')'");
        if (pending_bond_) throw error("dangling bond");
        prev = branch_stack.back();
        branch_stack.pop_back();
        ++pos_;
      } else if (c == '.') {
        if (pending_bond_) throw error("bond before '.'");
        if (!branch_stack.empty()) throw error("'.' inside branch");
        prev = -1;
        ++pos_;
      } else if (is_bond_char(c)) {
        if (pending_bond_) throw error("consecutive bond symbols");
        if (prev < 0) throw error("bond without preceding atom");
        pending_bond_ = c;
        ++pos_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        if (prev < 0) throw error("ring closure without atom");
        ring_closure(prev, read_ring_number());
      } else {
        const int atom = read_atom();
        if (prev >= 0) {
          connect(prev, atom, pending_bond_, false);
          smiles_order_[prev].push_back(atom);
          smiles_order_[atom].push_back(prev);
        } else if (pending_bond_) {
          throw error("bond without preceding atom");
        }
        if (bracket_h_.back() == 1) smiles_order_[atom].push_back(kHydrogenSlot);
        pending_bond_ = 0;
        prev = atom;
      }
    }
    if (!branch_stack.empty()) throw SyntaxError("unbalanced '(' in SMILES");
    if (pending_bond_) throw SyntaxError("SMILES ends with a bond symbol");
    if (!open_rings_.empty()) throw SyntaxError("unclosed ring-closure digit in SMILES");
    finish();
    return std::move(g_);
  }

 private:
  struct OpenRing {
    int atom;
    char bond;
    int slot;  // index into smiles_order_[atom]
  };

  SyntaxError error(const std::string& what) const {
    return SyntaxError(what + " at position " + std::to_string(pos_) + " in '" +
                       std::string(text_) + "'");
  }

  static bool is_bond_char(char c) {
    return c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\' || c == '~' ||
           c == '$';
  }

  int read_ring_number() {
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size()) throw error("truncated %nn ring closure");
      if (!std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
        throw error("malformed %nn ring closure");
      }
      const int n = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
      return n;
    }
    return text_[pos_++] - '0';
  }

  void ring_closure(int atom, int number) {
    auto it = open_rings_.find(number);
    if (it == open_rings_.end()) {
      smiles_order_[atom].push_back(-1);  // filled when the ring closes
      open_rings_[number] = {atom, pending_bond_, static_cast<int>(smiles_order_[atom].size()) - 1};
      pending_bond_ = 0;
      return;
    }
    const OpenRing open = it->second;
    open_rings_.erase(it);
    if (open.atom == atom) throw error("ring closure to the same atom");
    char bond = open.bond;
    bool from_closer = false;
    if (pending_bond_) {
      if (bond && bond != pending_bond_ && !is_direction(bond) && !is_direction(pending_bond_)) {
        throw error("conflicting ring-closure bond symbols");
      }
      if (!bond) {
        bond = pending_bond_;
        from_closer = true;
      }
    }
    pending_bond_ = 0;
    connect(open.atom, atom, bond, from_closer);
    smiles_order_[open.atom][open.slot] = atom;
    smiles_order_[atom].push_back(open.atom);
  }

  static bool is_direction(char c) { return c == '/' || c == '\\'; }

  void connect(int a, int b, char symbol, bool reversed_direction) {
    BondAttrs attrs;
    switch (symbol) {
      case 0:
        attrs = BondAttrs::of(g_.atom(a).is_aromatic() && g_.atom(b).is_aromatic()
                                  ? BondType::Aromatic
                                  : BondType::Single);
        break;
      case '-': attrs = BondAttrs::of(BondType::Single); break;
      case '=': attrs = BondAttrs::of(BondType::Double); break;
      case '#': attrs = BondAttrs::of(BondType::Triple); break;
      case ':': attrs = BondAttrs::of(BondType::Aromatic); break;
      case '~': attrs = BondAttrs::masked(); break;
      case '/':
      case '\\': {
        attrs = BondAttrs::of(BondType::Single);
        BondDirection d = symbol == '/' ? BondDirection::EndUpRight : BondDirection::EndDownRight;
        attrs.direction = reversed_direction ? flip(d) : d;
        break;
      }
      default:
        throw error(std::string("unsupported bond symbol '") + symbol + "'");
    }
    try {
      g_.add_bond(a, b, attrs);
    } catch (const GraphError& e) {
      throw error(e.what());
    }
  }

  int new_atom(const AtomAttrs& a, bool bracket, int hcount) {
    const int idx = g_.add_atom(a);
    bracket_.push_back(bracket);
    bracket_h_.push_back(hcount);
    smiles_order_.emplace_back();
    return idx;
  }

  int read_atom() {
    const char c = text_[pos_];
    if (c == '[') return read_bracket_atom();
    if (c == '*') {
      ++pos_;
      return new_atom(AtomAttrs::stub(), false, 0);
    }
    // two-letter organic symbols first
    if (c == 'C' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
      pos_ += 2;
      return new_atom(AtomAttrs::element(17), false, 0);
    }
    if (c == 'B' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
      pos_ += 2;
      return new_atom(AtomAttrs::element(35), false, 0);
    }
    int z = 0;
    bool aromatic = false;
    switch (c) {
      case 'B': z = 5; break;
      case 'C': z = 6; break;
      case 'N': z = 7; break;
      case 'O': z = 8; break;
      case 'P': z = 15; break;
      case 'S': z = 16; break;
      case 'F': z = 9; break;
      case 'I': z = 53; break;
      case 'b': z = 5; aromatic = true; break;
      case 'c': z = 6; aromatic = true; break;
      case 'n': z = 7; aromatic = true; break;
      case 'o': z = 8; aromatic = true; break;
      case 'p': z = 15; aromatic = true; break;
      case 's': z = 16; aromatic = true; break;
      default:
        throw error(std::string("unknown element token '") + c + "'");
    }
    ++pos_;
    return new_atom(AtomAttrs::element(z, aromatic), false, 0);
  }

  int read_bracket_atom() {
    ++pos_;  // '['
    auto peek = [&]() -> char { return pos_ < text_.size() ? text_[pos_] : '\0'; };
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;  // isotope ignored

    AtomAttrs a;
    const char c = peek();
    if (c == '*') {
      ++pos_;
      a = AtomAttrs::stub();
    } else if (std::islower(static_cast<unsigned char>(c))) {
      static const std::pair<const char*, int> kAromatic[] = {
          {"se", 34}, {"as", 33}, {"te", 52}, {"b", 5}, {"c", 6},
          {"n", 7},   {"o", 8},   {"p", 15},  {"s", 16}};
      int z = 0;
      for (const auto& [sym, num] : kAromatic) {
        const std::string_view s(sym);
        if (text_.substr(pos_, s.size()) == s) {
          z = num;
          pos_ += s.size();
          break;
        }
      }
      if (!z) throw error("unknown aromatic element");
      a = AtomAttrs::element(z, true);
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      int z = 0;
      if (pos_ + 1 < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_ + 1]))) {
        z = element_from_symbol(text_.substr(pos_, 2));
        if (z) pos_ += 2;
      }
      if (!z) {
        z = element_from_symbol(text_.substr(pos_, 1));
        if (!z) throw error("unknown element symbol");
        ++pos_;
      }
      a = AtomAttrs::element(z, false);
    } else {
      throw error("expected element symbol in bracket atom");
    }

    if (peek() == '@') {
      ++pos_;
      if (peek() == '@') {
        ++pos_;
        a.chirality = Chirality::TetrahedralCW;
      } else {
        a.chirality = Chirality::TetrahedralCCW;
      }
      if (std::isupper(static_cast<unsigned char>(peek())) && peek() != 'H') {
        throw error("extended chirality classes are not supported");
      }
    }
    int hcount = 0;
    if (peek() == 'H') {
      ++pos_;
      hcount = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) hcount = text_[pos_++] - '0';
    }
    int charge = 0;
    if (peek() == '+' || peek() == '-') {
      const char sign = text_[pos_++];
      int mag = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        mag = text_[pos_++] - '0';
      } else {
        while (peek() == sign) {
          ++mag;
          ++pos_;
        }
      }
      charge = sign == '+' ? mag : -mag;
    }
    if (peek() == ':') {
      ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    if (peek() != ']') throw error("unterminated bracket atom");
    ++pos_;
    if (!a.is_stub) {
      if (charge < -5 || charge > 5) throw error("formal charge out of range");
      if (hcount > 8) throw error("hydrogen count out of range");
      a.formal_charge = charge;
      a.num_hs = hcount;
    }
    return new_atom(a, true, a.is_stub ? 0 : hcount);
  }

  void finish() {
    for (int i = 0; i < g_.num_atoms(); ++i) {
      AtomAttrs& a = g_.atom(i);
      if (a.is_stub || bracket_[i]) continue;
      const int h = implicit_hydrogens(g_, i);
      if (h < 0) {
        throw ValenceError("atom " + std::to_string(i) + " (" + element_symbol(a.atomic_number) +
                           ") exceeds its allowed valence in '" + std::string(text_) + "'");
      }
      a.num_hs = std::min(h, 8);
    }
    for (int i = 0; i < g_.num_atoms(); ++i) {
      AtomAttrs& a = g_.atom(i);
      if (a.chirality != Chirality::TetrahedralCW && a.chirality != Chirality::TetrahedralCCW) {
        continue;
      }
      const int parity = permutation_parity(smiles_order_[i], reference_order(g_, i));
      if (parity == 1) a.chirality = flip(a.chirality);
    }
    perceive(g_);
    if (!check_valence_) return;
    const auto violations = valence_check(g_);
    if (!violations.empty()) {
      const auto& v = violations.front();
      const bool pi = v.valence != static_cast<int>(v.valence);
      throw ValenceError("atom " + std::to_string(v.atom) + " (" +
                         element_symbol(g_.atom(v.atom).atomic_number) +
                         (pi ? ") has no Kekule assignment in '" : ") exceeds its allowed valence in '") +
                         std::string(text_) + "'");
    }
  }

  std::string_view text_;
  bool check_valence_ = true;
  size_t pos_ = 0;
  char pending_bond_ = 0;
  MolGraph g_;
  std::vector<bool> bracket_;
  std::vector<int> bracket_h_;
  std::vector<std::vector<int>> smiles_order_;
  std::map<int, OpenRing> open_rings_;
};

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

class Writer {
 public:
  Writer(const MolGraph& g, const std::vector<int>& ranks, bool stereo)
      : g_(g), ranks_(ranks), stereo_(stereo) {}

  WrittenSmiles run() {
    const int n = g_.num_atoms();
    visited_.assign(n, false);
    bond_used_.assign(g_.num_bonds(), false);
    dfs_index_.assign(n, -1);
    children_.assign(n, {});
    ring_entries_.assign(n, {});
    parent_.assign(n, -1);

    std::vector<int> starts(n);
    for (int i = 0; i < n; ++i) starts[i] = i;
    std::sort(starts.begin(), starts.end(), [&](int a, int b) { return ranks_[a] < ranks_[b]; });

    std::vector<int> roots;
    for (int s : starts) {
      if (visited_[s]) continue;
      roots.push_back(s);
      visit(s, -1);
    }
    for (auto& entries : ring_entries_) {
      std::sort(entries.begin(), entries.end(), [&](const RingEntry& x, const RingEntry& y) {
        return dfs_index_[x.partner] < dfs_index_[y.partner];
      });
    }
    ring_digit_.assign(g_.num_bonds(), 0);
    for (size_t r = 0; r < roots.size(); ++r) {
      if (r) out_.smiles += '.';
      emit(roots[r]);
    }
    return std::move(out_);
  }

 private:
  struct RingEntry {
    int partner;
    int bond;
    bool opens;
  };

  void visit(int a, int parent_bond) {
    visited_[a] = true;
    dfs_index_[a] = counter_++;
    std::vector<Neighbor> nbs(g_.neighbors(a).begin(), g_.neighbors(a).end());
    std::sort(nbs.begin(), nbs.end(),
              [&](const Neighbor& x, const Neighbor& y) { return ranks_[x.atom] < ranks_[y.atom]; });
    for (const Neighbor& nb : nbs) {
      if (nb.bond == parent_bond || bond_used_[nb.bond]) continue;
      if (!visited_[nb.atom]) {
        bond_used_[nb.bond] = true;
        children_[a].push_back(nb);
        parent_[nb.atom] = a;
        visit(nb.atom, nb.bond);
      } else {
        bond_used_[nb.bond] = true;
        ring_entries_[a].push_back({nb.atom, nb.bond, false});
        ring_entries_[nb.atom].push_back({a, nb.bond, true});
      }
    }
  }

  std::string bond_symbol(int bond, int from) const {
    const Bond& b = g_.bond(bond);
    const int to = b.other(from);
    const bool both_aromatic = g_.atom(from).is_aromatic() && g_.atom(to).is_aromatic();
    switch (b.attrs.type) {
      case BondType::Mask: return "~";
      case BondType::Double: return "=";
      case BondType::Triple: return "#";
      case BondType::Aromatic: return both_aromatic ? "" : ":";
      case BondType::Single: {
        if (stereo_ && (b.attrs.direction == BondDirection::EndUpRight ||
                        b.attrs.direction == BondDirection::EndDownRight)) {
          const BondDirection d = b.begin == from ? b.attrs.direction : flip(b.attrs.direction);
          return d == BondDirection::EndUpRight ? "/" : "\\";
        }
        return both_aromatic ? "-" : "";
      }
      default: return "-";
    }
  }

  std::string atom_token(int a) const {
    const AtomAttrs& at = g_.atom(a);
    if (at.is_stub) return "*";
    const bool chiral = stereo_ && (at.chirality == Chirality::TetrahedralCW ||
                                    at.chirality == Chirality::TetrahedralCCW);
    std::string sym = element_symbol(at.atomic_number);
    if (at.is_aromatic()) {
      for (char& ch : sym) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    const bool organic = is_organic_symbol(at.atomic_number) &&
                         (!at.is_aromatic() || is_aromatic_organic(at.atomic_number));
    if (organic && !chiral && at.formal_charge == 0 && implicit_hydrogens(g_, a) == at.num_hs) {
      return sym;
    }
    std::string tok = "[" + sym;
    if (chiral) {
      // output order: parent, H, ring partners, children
      std::vector<int> order;
      if (parent_[a] >= 0) order.push_back(parent_[a]);
      if (at.num_hs == 1) order.push_back(kHydrogenSlot);
      for (const RingEntry& r : ring_entries_[a]) order.push_back(r.partner);
      for (const Neighbor& c : children_[a]) order.push_back(c.atom);
      Chirality c = at.chirality;
      if (permutation_parity(reference_order(g_, a), order) == 1) c = flip(c);
      tok += c == Chirality::TetrahedralCW ? "@@" : "@";
    }
    if (at.num_hs > 0) {
      tok += 'H';
      if (at.num_hs > 1) tok += std::to_string(at.num_hs);
    }
    if (at.formal_charge != 0) {
      tok += at.formal_charge > 0 ? '+' : '-';
      const int mag = std::abs(at.formal_charge);
      if (mag > 1) tok += std::to_string(mag);
    }
    tok += ']';
    return tok;
  }

  int allocate_digit() {
    for (int d = 1; d < 100; ++d) {
      if (!digits_in_use_.count(d)) {
        digits_in_use_.insert(d);
        return d;
      }
    }
    throw MolError("too many open rings to write SMILES");
  }

  static std::string digit_text(int d) {
    return d < 10 ? std::to_string(d) : "%" + std::to_string(d);
  }

  void emit(int a) {
    out_.order.push_back(a);
    out_.smiles += atom_token(a);
    std::vector<int> release;
    for (const RingEntry& r : ring_entries_[a]) {
      if (r.opens) {
        const int d = allocate_digit();
        ring_digit_[r.bond] = d;
        out_.smiles += bond_symbol(r.bond, a) + digit_text(d);
      } else {
        out_.smiles += digit_text(ring_digit_[r.bond]);
        release.push_back(ring_digit_[r.bond]);
      }
    }
    for (int d : release) digits_in_use_.erase(d);
    const auto& kids = children_[a];
    for (size_t i = 0; i < kids.size(); ++i) {
      const bool last = i + 1 == kids.size();
      if (!last) out_.smiles += '(';
      out_.smiles += bond_symbol(kids[i].bond, a);
      emit(kids[i].atom);
      if (!last) out_.smiles += ')';
    }
  }

  const MolGraph& g_;
  const std::vector<int>& ranks_;
  bool stereo_;
  std::vector<bool> visited_;
  std::vector<bool> bond_used_;
  std::vector<int> dfs_index_;
  std::vector<int> parent_;
  std::vector<std::vector<Neighbor>> children_;
  std::vector<std::vector<RingEntry>> ring_entries_;
  std::vector<int> ring_digit_;
  std::set<int> digits_in_use_;
  int counter_ = 0;
  WrittenSmiles out_;
};

}  // namespace

MolGraph parse_smiles(std::string_view text, bool check_valence) {
  return Parser(text, check_valence).run();
}

WrittenSmiles write_smiles_ranked(const MolGraph& g, const std::vector<int>& ranks,
                                  bool include_stereo) {
  return Writer(g, ranks, include_stereo).run();
}

WrittenSmiles write_smiles_ordered(const MolGraph& g, const SmilesWriteOptions& opts) {
  std::vector<int> ranks;
  if (opts.canonical) {
    ranks = canonical_ranks(g);
  } else {
    ranks.resize(g.num_atoms());
    for (int i = 0; i < g.num_atoms(); ++i) ranks[i] = i;
  }
  return write_smiles_ranked(g, ranks, opts.include_stereo);
}

std::string write_smiles(const MolGraph& g, const SmilesWriteOptions& opts) {
  return write_smiles_ordered(g, opts).smiles;
}

}  // namespace molpla
