// SPDX-License-Identifier: Apache-2.0
#include "octoconv/group.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace octoconv {

std::string_view to_string(GroupName name) {
  switch (name) {
    case GroupName::kTrivial: return "Z3";
    case GroupName::kD4: return "D4";
    case GroupName::kD4h: return "D4h";
    case GroupName::kO: return "O";
    case GroupName::kOh: return "Oh";
  }
  throw std::invalid_argument("unknown group name");
}

GroupName parse_group_name(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "z3" || lower == "trivial" || lower == "z3_trivial") return GroupName::kTrivial;
  if (lower == "d4") return GroupName::kD4;
  if (lower == "d4h") return GroupName::kD4h;
  if (lower == "o") return GroupName::kO;
  if (lower == "oh") return GroupName::kOh;
  throw std::invalid_argument("unknown group name '" + std::string(text) + "'");
}

std::size_t expected_order(GroupName name) {
  switch (name) {
    case GroupName::kTrivial: return 1;
    case GroupName::kD4: return 8;
    case GroupName::kD4h: return 16;
    case GroupName::kO: return 24;
    case GroupName::kOh: return 48;
  }
  throw std::invalid_argument("unknown group name");
}

GroupElement GroupElement::identity() {
  return from_rows({1, 0, 0}, {0, 1, 0}, {0, 0, 1});
}

GroupElement GroupElement::from_rows(Vec3 r0, Vec3 r1, Vec3 r2) {
  GroupElement g;
  g.m = {r0, r1, r2};
  return g;
}

GroupElement GroupElement::operator*(const GroupElement& rhs) const {
  GroupElement out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      int s = 0;
      for (int k = 0; k < 3; ++k) s += m[i][k] * rhs.m[k][j];
      out.m[i][j] = s;
    }
  return out;
}

GroupElement::Vec3 GroupElement::apply(const Vec3& v) const {
  Vec3 out{};
  for (int i = 0; i < 3; ++i) out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  return out;
}

GroupElement GroupElement::inverse() const {
  GroupElement t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t.m[i][j] = m[j][i];
  return t;
}

int GroupElement::determinant() const {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

bool GroupElement::is_signed_permutation() const {
  for (int i = 0; i < 3; ++i) {
    int row_nz = 0, col_nz = 0;
    for (int j = 0; j < 3; ++j) {
      if (m[i][j] < -1 || m[i][j] > 1) return false;
      row_nz += m[i][j] != 0;
      col_nz += m[j][i] != 0;
    }
    if (row_nz != 1 || col_nz != 1) return false;
  }
  return true;
}

std::string format_matrix(const GroupElement& g) {
  std::ostringstream os;
  for (int i = 0; i < 3; ++i) {
    os << '[';
    for (int j = 0; j < 3; ++j) {
      if (j) os << ' ';
      if (g.m[i][j] >= 0) os << ' ';
      os << g.m[i][j];
    }
    os << ']';
  }
  return os.str();
}

Permutation identity_permutation(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

bool is_bijection(const Permutation& p) {
  std::vector<bool> seen(p.size(), false);
  for (std::size_t v : p) {
    if (v >= p.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Permutation invert(const Permutation& p) {
  Permutation inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv.at(p[i]) = i;
  return inv;
}

Permutation compose(const Permutation& a, const Permutation& b) {
  if (a.size() != b.size()) throw std::invalid_argument("compose: permutation size mismatch");
  Permutation out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = b.at(a[i]);
  return out;
}

std::optional<std::size_t> SymmetryGroup::index_of(const GroupElement& g) const {
  for (std::size_t i = 0; i < elements_.size(); ++i)
    if (elements_[i] == g) return i;
  return std::nullopt;
}

std::vector<GroupElement> generators(GroupName name) {
  const auto rz90 = GroupElement::from_rows({0, -1, 0}, {1, 0, 0}, {0, 0, 1});
  const auto ry180 = GroupElement::from_rows({-1, 0, 0}, {0, 1, 0}, {0, 0, -1});
  const auto mirror_z = GroupElement::from_rows({1, 0, 0}, {0, 1, 0}, {0, 0, -1});
  const auto diag120 = GroupElement::from_rows({0, 1, 0}, {0, 0, 1}, {1, 0, 0});
  const auto central = GroupElement::from_rows({-1, 0, 0}, {0, -1, 0}, {0, 0, -1});

  switch (name) {
    case GroupName::kTrivial: return {};
    case GroupName::kD4: return {rz90, ry180};
    case GroupName::kD4h: return {rz90, ry180, mirror_z};
    case GroupName::kO: return {rz90, diag120};
    case GroupName::kOh: return {rz90, diag120, central};
  }
  throw std::invalid_argument("unknown group name");
}

SymmetryGroup build_group(GroupName name) {
  constexpr std::size_t kMaxOrder = 48;
  const auto gens = generators(name);

  SymmetryGroup group;
  group.name_ = name;
  std::map<GroupElement, std::size_t> index;
  std::deque<std::size_t> queue;

  group.elements_.push_back(GroupElement::identity());
  index.emplace(group.elements_.back(), 0);
  queue.push_back(0);
  while (!queue.empty()) {
    const GroupElement current = group.elements_[queue.front()];
    queue.pop_front();
    for (const auto& g : gens) {
      GroupElement next = current * g;
      if (index.contains(next)) continue;
      if (group.elements_.size() == kMaxOrder)
        throw std::logic_error("group closure exceeds 48 elements; bad generator constant");
      index.emplace(next, group.elements_.size());
      queue.push_back(group.elements_.size());
      group.elements_.push_back(next);
    }
  }

  const std::size_t n = group.elements_.size();
  group.cayley_.resize(n * n);
  group.inverse_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      auto it = index.find(group.elements_[i] * group.elements_[j]);
      if (it == index.end()) throw std::logic_error("group is not closed under multiplication");
      group.cayley_[i * n + j] = it->second;
    }
    group.inverse_[i] = index.at(group.elements_[i].inverse());
  }
  return group;
}

PermutationRep derive_rho(const SymmetryGroup& group) {
  PermutationRep rep;
  rep.group_name = group.name();
  const std::size_t n = group.order();
  rep.perms.resize(n, Permutation(n));
  for (std::size_t h = 0; h < n; ++h) {
    const std::size_t h_inv = group.inverse(h);
    for (std::size_t g = 0; g < n; ++g) rep.perms[h][g] = group.cayley(h_inv, g);
  }
  return rep;
}

}  // namespace octoconv
