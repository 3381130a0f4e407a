// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace octoconv {

/// The five supported point groups. kTrivial is the plain translational CNN
/// (only the identity acts on filters).
enum class GroupName { kTrivial, kD4, kD4h, kO, kOh };

std::string_view to_string(GroupName name);

/// Accepts "Z3", "trivial", "D4", "D4h", "O", "Oh" (case-insensitive).
/// Throws std::invalid_argument on anything else.
GroupName parse_group_name(std::string_view text);

std::size_t expected_order(GroupName name);

/// A signed 3x3 permutation matrix acting on (x, y, z) column vectors.
struct GroupElement {
  using Vec3 = std::array<int, 3>;
  std::array<Vec3, 3> m{};

  static GroupElement identity();
  static GroupElement from_rows(Vec3 r0, Vec3 r1, Vec3 r2);

  GroupElement operator*(const GroupElement& rhs) const;
  Vec3 apply(const Vec3& v) const;
  // Orthogonal, so the inverse is the transpose.
  GroupElement inverse() const;
  int determinant() const;
  bool is_signed_permutation() const;

  friend bool operator==(const GroupElement&, const GroupElement&) = default;
  friend auto operator<=>(const GroupElement&, const GroupElement&) = default;
};

std::string format_matrix(const GroupElement& g);

/// Gather-index permutation: applying p to a sequence v yields w[i] = v[p[i]].
using Permutation = std::vector<std::size_t>;

Permutation identity_permutation(std::size_t n);
bool is_bijection(const Permutation& p);
Permutation invert(const Permutation& p);

/// Index array of the operator product "apply b, then a" when both are
/// used as gathers: result[i] = b[a[i]]. With this reading compose is
/// associative and the regular representation is a homomorphism under it.
Permutation compose(const Permutation& a, const Permutation& b);

class SymmetryGroup {
 public:
  GroupName name() const { return name_; }
  std::size_t order() const { return elements_.size(); }
  const std::vector<GroupElement>& elements() const { return elements_; }
  const GroupElement& element(std::size_t i) const { return elements_.at(i); }

  /// Index of elements[i] * elements[j].
  std::size_t cayley(std::size_t i, std::size_t j) const {
    return cayley_[i * elements_.size() + j];
  }
  std::size_t inverse(std::size_t i) const { return inverse_.at(i); }
  std::optional<std::size_t> index_of(const GroupElement& g) const;

 private:
  friend SymmetryGroup build_group(GroupName name);

  GroupName name_ = GroupName::kTrivial;
  std::vector<GroupElement> elements_;
  std::vector<std::size_t> cayley_;
  std::vector<std::size_t> inverse_;
};

/// Regular-representation channel permutations, one per group element.
struct PermutationRep {
  GroupName group_name = GroupName::kTrivial;
  std::vector<Permutation> perms;
};

/// Fixed generator constants:
///   D4  = {Rz90, Ry180}        D4h = D4 + {Mz}
///   O   = {Rz90, Rdiag120}     Oh  = O + {-I}
/// Rz90 maps (x,y,z) -> (-y,x,z); Rdiag120 maps (x,y,z) -> (y,z,x).
std::vector<GroupElement> generators(GroupName name);

/// Elements are enumerated breadth-first from the identity, visiting
/// generators in the order returned by generators(); element 0 is always
/// the identity and the ordering is stable across runs.
SymmetryGroup build_group(GroupName name);

/// perms[h][idx(g)] = idx(h^-1 g): a filter with orientation channels
/// transforms as [h.psi](g) = psi(h^-1 g).
PermutationRep derive_rho(const SymmetryGroup& group);

}  // namespace octoconv
