#include "fvkit/folds.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "fvkit/error.hpp"
#include "fvkit/random.hpp"

namespace fvkit {

namespace {

// Cell key: the demographic when balancing, a single shared key otherwise.
using CellKey = int;

CellKey cell_of(const VerificationPair& p, bool balance) {
  return balance ? static_cast<int>(p.demographic) : -1;
}

std::string cell_name(CellKey key) {
  return key < 0 ? std::string("all") : std::string(to_string(static_cast<Demographic>(key)));
}

struct Counts {
  std::map<CellKey, std::size_t> genuine;
  std::map<CellKey, std::size_t> impostor;
};

Counts count_cells(const std::vector<VerificationPair>& pairs, bool balance) {
  Counts c;
  for (const auto& p : pairs) ++(p.genuine() ? c.genuine : c.impostor)[cell_of(p, balance)];
  return c;
}

void check_divisible(const std::vector<VerificationPair>& pairs, int n_folds, bool balance) {
  if (n_folds < 1) throw Error(ErrorCode::IndivisibleCounts, "n_folds must be >= 1");
  auto check = [&](const std::map<CellKey, std::size_t>& m, std::string_view label) {
    for (const auto& [key, n] : m) {
      if (n % static_cast<std::size_t>(n_folds) != 0) {
        throw Error(ErrorCode::IndivisibleCounts, std::to_string(n) + " " + std::string(label) + " pairs (" +
                                                      cell_name(key) + ") over " + std::to_string(n_folds) +
                                                      " folds");
      }
    }
  };
  const auto totals = count_cells(pairs, false);
  check(totals.genuine, "genuine");
  check(totals.impostor, "impostor");
  if (balance) {
    const auto cells = count_cells(pairs, true);
    check(cells.genuine, "genuine");
    check(cells.impostor, "impostor");
  }
}

// Round-robin of impostors by (cell, tag, difficulty).
void deal_impostors(const std::vector<VerificationPair>& pairs, int n_folds, bool balance, FoldAssignment& out) {
  std::map<CellKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].genuine()) groups[cell_of(pairs[i], balance)].push_back(i);
  }
  for (auto& [key, idx] : groups) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (pairs[a].tag != pairs[b].tag) return pairs[a].tag < pairs[b].tag;
      return harder(pairs[a], pairs[b]);
    });
    for (std::size_t pos = 0; pos < idx.size(); ++pos) out.fold[idx[pos]] = static_cast<int>(pos % n_folds);
  }
}

struct Atom {
  std::string first_identity;
  std::vector<std::size_t> pairs;
  std::map<CellKey, std::size_t> per_cell;
};

std::vector<Atom> genuine_atoms(const std::vector<VerificationPair>& pairs, bool balance) {
  // Union-find over identities touched by genuine pairs.
  std::map<std::string, std::string> parent;
  auto find = [&](std::string x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& p : pairs) {
    if (!p.genuine()) continue;
    for (const auto* id : {&p.identity_a, &p.identity_b}) {
      if (id->empty()) throw Error(ErrorCode::UnknownIdentity, "pair " + p.pair_id() + " has no identity attached");
      parent.try_emplace(*id, *id);
    }
    auto a = find(p.identity_a);
    auto b = find(p.identity_b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<std::string, Atom> by_root;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].genuine()) continue;
    const std::string root = find(pairs[i].identity_a);
    Atom& atom = by_root[root];
    atom.first_identity = root;
    atom.pairs.push_back(i);
    ++atom.per_cell[cell_of(pairs[i], balance)];
  }
  std::vector<Atom> atoms;
  for (auto& [root, atom] : by_root) atoms.push_back(std::move(atom));
  return atoms;
}


// Exact fallback when the greedy packing gets stuck. Each cell is solved on
// its own (atoms spanning cells are not supported here): folds are filled one
// at a time to exactly total/n_folds, each fold taking the largest atom still
// left, over counts of atom sizes with failed states memoized.
class CellPacker {
 public:
  CellPacker(std::vector<std::size_t> counts, std::size_t capacity) : counts_(std::move(counts)), capacity_(capacity) {}

  // Size multisets per fold, or empty when the cell cannot be packed.
  std::vector<std::vector<std::size_t>> solve(std::size_t folds) {
    plan_.clear();
    if (!fill(folds)) return {};
    return plan_;
  }

 private:
  bool fill(std::size_t folds_left) {
    if (folds_left == 0) return true;
    if (dead_.contains(counts_)) return false;
    std::size_t largest = counts_.size();
    while (largest > 0 && counts_[largest - 1] == 0) --largest;
    if (largest == 0 || largest > capacity_) return false;
    std::vector<std::size_t> bin{largest};
    --counts_[largest - 1];
    const bool ok = choose(capacity_ - largest, largest, bin, folds_left);
    ++counts_[largest - 1];
    if (!ok) dead_.insert(counts_);
    return ok;
  }

  // Completes the current fold with sizes <= max_size summing to left.
  bool choose(std::size_t left, std::size_t max_size, std::vector<std::size_t>& bin, std::size_t folds_left) {
    if (left == 0) {
      plan_.push_back(bin);
      if (fill(folds_left - 1)) return true;
      plan_.pop_back();
      return false;
    }
    for (std::size_t size = std::min(max_size, left); size > 0; --size) {
      if (counts_[size - 1] == 0) continue;
      --counts_[size - 1];
      bin.push_back(size);
      const bool ok = choose(left - size, size, bin, folds_left);
      bin.pop_back();
      ++counts_[size - 1];
      if (ok) return true;
    }
    return false;
  }

  std::vector<std::size_t> counts_;
  std::size_t capacity_;
  std::set<std::vector<std::size_t>> dead_;
  std::vector<std::vector<std::size_t>> plan_;
};

void exact_pack(const std::vector<Atom>& atoms, const std::map<CellKey, std::size_t>& totals, std::size_t folds,
                FoldAssignment& out) {
  // Atoms are already ordered largest first, so within one size they are
  // handed out in identity order.
  std::map<CellKey, std::map<std::size_t, std::vector<const Atom*>>> by_cell;
  for (const Atom& atom : atoms) {
    if (atom.per_cell.size() != 1) {
      throw Error(ErrorCode::InfeasiblePacking,
                  "greedy packing failed and identity '" + atom.first_identity + "' spans several demographics");
    }
    by_cell[atom.per_cell.begin()->first][atom.pairs.size()].push_back(&atom);
  }
  for (auto& [key, by_size] : by_cell) {
    const std::size_t capacity = totals.at(key) / folds;
    std::vector<std::size_t> counts(by_size.rbegin()->first, 0);
    for (const auto& [size, list] : by_size) counts[size - 1] = list.size();
    const auto plan = CellPacker(counts, capacity).solve(folds);
    if (plan.empty()) {
      const Atom* big = by_size.rbegin()->second.front();
      throw Error(ErrorCode::InfeasiblePacking, "no identity-disjoint packing of " + cell_name(key) +
                                                    " genuine pairs into " + std::to_string(folds) + " folds of " +
                                                    std::to_string(capacity) + " (largest identity '" +
                                                    big->first_identity + "' has " +
                                                    std::to_string(big->pairs.size()) + ")");
    }
    std::map<std::size_t, std::size_t> next;
    for (std::size_t f = 0; f < folds; ++f) {
      for (std::size_t size : plan[f]) {
        const Atom* atom = by_size[size][next[size]++];
        for (std::size_t i : atom->pairs) out.fold[i] = static_cast<int>(f);
      }
    }
  }
}
}  // namespace

FoldAssignment build_folds(const std::vector<VerificationPair>& pairs, int n_folds, bool balance) {
  check_divisible(pairs, n_folds, balance);
  FoldAssignment out;
  out.n_folds = n_folds;
  out.fold.assign(pairs.size(), -1);

  std::map<CellKey, std::vector<std::size_t>> remaining;
  for (const auto& [key, n] : count_cells(pairs, balance).genuine) {
    remaining[key].assign(static_cast<std::size_t>(n_folds), n / static_cast<std::size_t>(n_folds));
  }

  auto atoms = genuine_atoms(pairs, balance);
  std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) {
    if (a.pairs.size() != b.pairs.size()) return a.pairs.size() > b.pairs.size();
    return a.first_identity < b.first_identity;
  });
  const auto folds = static_cast<std::size_t>(n_folds);
  bool greedy_ok = true;
  for (const Atom& atom : atoms) {
    int best_fold = -1;
    std::size_t best_room = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      bool fits = true;
      std::size_t room = 0;
      for (const auto& [key, need] : atom.per_cell) {
        const std::size_t have = remaining[key][f];
        if (have < need) {
          fits = false;
          break;
        }
        room += have;
      }
      if (fits && (best_fold < 0 || room > best_room)) {
        best_fold = static_cast<int>(f);
        best_room = room;
      }
    }
    if (best_fold < 0) {
      greedy_ok = false;
      break;
    }
    for (const auto& [key, need] : atom.per_cell) remaining[key][static_cast<std::size_t>(best_fold)] -= need;
    for (std::size_t i : atom.pairs) out.fold[i] = best_fold;
  }
  if (!greedy_ok) {
    std::fill(out.fold.begin(), out.fold.end(), -1);
    exact_pack(atoms, count_cells(pairs, balance).genuine, folds, out);
  }
  deal_impostors(pairs, n_folds, balance, out);
  return out;
}

FoldAssignment overlapped_folds(const std::vector<VerificationPair>& pairs, int n_folds, std::uint64_t seed,
                                bool balance) {
  check_divisible(pairs, n_folds, balance);
  FoldAssignment out;
  out.n_folds = n_folds;
  out.fold.assign(pairs.size(), -1);

  std::map<CellKey, std::map<std::string, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].genuine()) groups[cell_of(pairs[i], balance)][pairs[i].identity_a].push_back(i);
  }
  Rng rng(seed);
  for (auto& [key, by_identity] : groups) {
    std::vector<const std::vector<std::size_t>*> order;
    for (auto& [identity, idx] : by_identity) {
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return pairs[a].pair_id() < pairs[b].pair_id();
      });
      order.push_back(&idx);
    }
    rng.shuffle(order);
    std::size_t pos = 0;
    for (const auto* idx : order) {
      for (std::size_t i : *idx) out.fold[i] = static_cast<int>(pos++ % static_cast<std::size_t>(n_folds));
    }
  }
  deal_impostors(pairs, n_folds, balance, out);
  return out;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Unassigned: return "unassigned";
    case ViolationKind::FoldSize: return "fold_size";
    case ViolationKind::IdentityOverlap: return "identity_overlap";
    case ViolationKind::DemographicBalance: return "demographic_balance";
  }
  return "unknown";
}

bool FoldReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(), [&](const auto& v) { return v.kind == kind; });
}

FoldReport verify_folds(const std::vector<VerificationPair>& pairs, const FoldAssignment& a, const FoldChecks& checks) {
  FoldReport report;
  const auto n = static_cast<std::size_t>(std::max(a.n_folds, 1));
  if (a.fold.size() != pairs.size()) {
    report.violations.push_back({ViolationKind::Unassigned, "assignment covers " + std::to_string(a.fold.size()) +
                                                                " of " + std::to_string(pairs.size()) + " pairs"});
    return report;
  }
  bool all_assigned = true;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (a.fold[i] < 0 || static_cast<std::size_t>(a.fold[i]) >= n) {
      report.violations.push_back({ViolationKind::Unassigned, pairs[i].pair_id()});
      all_assigned = false;
    }
  }
  if (!all_assigned) return report;

  // [label][demographic][fold] tallies.
  std::map<Demographic, std::vector<std::size_t>> genuine_cells;
  std::map<Demographic, std::vector<std::size_t>> impostor_cells;
  std::vector<std::size_t> genuine_per_fold(n, 0);
  std::vector<std::size_t> impostor_per_fold(n, 0);
  std::map<std::string, std::set<int>> identity_folds;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const auto f = static_cast<std::size_t>(a.fold[i]);
    auto& cells = p.genuine() ? genuine_cells : impostor_cells;
    auto& row = cells[p.demographic];
    row.resize(n, 0);
    ++row[f];
    ++(p.genuine() ? genuine_per_fold : impostor_per_fold)[f];
    if (p.genuine()) {
      identity_folds[p.identity_a].insert(a.fold[i]);
      identity_folds[p.identity_b].insert(a.fold[i]);
    }
  }

  auto check_even = [&](const std::vector<std::size_t>& per_fold, ViolationKind kind, const std::string& what) {
    std::size_t total = 0;
    for (auto c : per_fold) total += c;
    if (total % n != 0) {
      report.violations.push_back({kind, what + ": " + std::to_string(total) + " pairs not divisible by folds"});
      return;
    }
    for (std::size_t f = 0; f < n; ++f) {
      if (per_fold[f] != total / n) {
        report.violations.push_back({kind, what + " fold " + std::to_string(f) + " has " +
                                               std::to_string(per_fold[f]) + ", expected " +
                                               std::to_string(total / n)});
      }
    }
  };
  if (checks.sizes) {
    check_even(genuine_per_fold, ViolationKind::FoldSize, "genuine");
    check_even(impostor_per_fold, ViolationKind::FoldSize, "impostor");
  }
  if (checks.identity_disjoint) {
    for (const auto& [identity, folds] : identity_folds) {
      if (identity.empty()) {
        report.violations.push_back({ViolationKind::IdentityOverlap, "genuine pair without identity"});
      } else if (folds.size() > 1) {
        report.violations.push_back({ViolationKind::IdentityOverlap,
                                     "identity '" + identity + "' in " + std::to_string(folds.size()) + " folds"});
      }
    }
  }
  if (checks.demographic_balance) {
    for (const auto& [d, row] : genuine_cells) {
      check_even(row, ViolationKind::DemographicBalance, "genuine " + std::string(to_string(d)));
    }
    for (const auto& [d, row] : impostor_cells) {
      check_even(row, ViolationKind::DemographicBalance, "impostor " + std::string(to_string(d)));
    }
  }
  return report;
}

void apply_assignment(std::vector<VerificationPair>& pairs, const FoldAssignment& assignment) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int f = assignment.fold.at(i);
    if (f >= 0) {
      pairs[i].fold = f;
    } else {
      pairs[i].fold.reset();
    }
  }
}

FoldAssignment assignment_from_pairs(const std::vector<VerificationPair>& pairs, int n_folds) {
  FoldAssignment a;
  a.n_folds = n_folds;
  for (const auto& p : pairs) {
    if (!p.fold || *p.fold >= n_folds) throw Error(ErrorCode::MissingFold, "pair " + p.pair_id());
    a.fold.push_back(*p.fold);
  }
  return a;
}

std::string format_fold_report(const std::vector<VerificationPair>& pairs, const FoldAssignment& a,
                               const FoldReport& report) {
  std::set<Demographic> demographics;
  for (const auto& p : pairs) demographics.insert(p.demographic);
  std::string out = "fold\tgenuine\timpostor";
  for (Demographic d : demographics) {
    out += "\tgen_" + std::string(to_string(d)) + "\timp_" + std::string(to_string(d));
  }
  out += '\n';
  for (int f = 0; f < a.n_folds; ++f) {
    std::size_t g = 0;
    std::size_t im = 0;
    std::map<Demographic, std::pair<std::size_t, std::size_t>> per;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (a.fold[i] != f) continue;
      if (pairs[i].genuine()) {
        ++g;
        ++per[pairs[i].demographic].first;
      } else {
        ++im;
        ++per[pairs[i].demographic].second;
      }
    }
    out += std::to_string(f) + '\t' + std::to_string(g) + '\t' + std::to_string(im);
    for (Demographic d : demographics) {
      out += '\t' + std::to_string(per[d].first) + '\t' + std::to_string(per[d].second);
    }
    out += '\n';
  }
  // Tag spread per fold, for tagged impostor sets.
  std::map<std::string, std::vector<std::size_t>> tags;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].genuine()) continue;
    auto& row = tags[std::string(to_string(pairs[i].demographic)) + "/" + pairs[i].tag];
    row.resize(static_cast<std::size_t>(a.n_folds), 0);
    if (a.fold[i] >= 0) ++row[static_cast<std::size_t>(a.fold[i])];
  }
  if (tags.size() > 1) {
    out += "\nimpostor_tag\tper_fold\tbalanced\n";
    for (const auto& [tag, row] : tags) {
      std::string counts;
      for (std::size_t f = 0; f < row.size(); ++f) counts += (f ? "," : "") + std::to_string(row[f]);
      const bool balanced = std::adjacent_find(row.begin(), row.end(), std::not_equal_to<>()) == row.end();
      out += tag + '\t' + counts + '\t' + (balanced ? "yes" : "no") + '\n';
    }
  }
  out += "\nstatus\t" + std::string(report.pass() ? "pass" : "fail") + '\n';
  for (const auto& v : report.violations) out += std::string(to_string(v.kind)) + '\t' + v.detail + '\n';
  return out;
}

}  // namespace fvkit
