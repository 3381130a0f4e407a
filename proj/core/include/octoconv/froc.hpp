// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace octoconv {

/// False-positive rates (per scan) at which sensitivity is averaged.
inline constexpr std::array<double, 7> kReferenceFpRates{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};

struct CandidateRecord {
  std::string scan_id;
  std::array<double, 3> position_mm{};  // (x, y, z)
  double probability = 0.0;
};

enum class Relevance { kRelevant, kIrrelevant };

struct ReferenceNodule {
  std::string scan_id;
  std::array<double, 3> center_mm{};  // (x, y, z)
  double diameter_mm = 0.0;
  Relevance relevance = Relevance::kRelevant;
  bool malignant = false;
};

/// Every scan listed in the reference file (including scans without
/// findings) plus the findings themselves, in file order.
struct ReferenceSet {
  std::vector<std::string> scans;
  std::vector<ReferenceNodule> nodules;

  std::size_t relevant_count() const;
  /// Appends the scan to `scans` if it is not listed yet.
  void add_scan(const std::string& scan_id);
};

enum class MatchKind { kHit, kFalsePositive, kExcluded };

struct LabeledCandidate {
  CandidateRecord candidate;
  MatchKind kind = MatchKind::kFalsePositive;
  /// Index into ReferenceSet::nodules for hits.
  std::optional<std::size_t> nodule;
};

struct MatchResult {
  std::vector<LabeledCandidate> candidates;
  std::size_t n_relevant = 0;
  std::size_t n_scans = 0;
};

/// A candidate hits a finding when its distance to the center is strictly
/// below the finding's radius; the nearest finding wins, ties go to the
/// earlier one in file order. Hits on irrelevant findings are excluded.
/// Throws std::invalid_argument for a candidate on an unknown scan.
MatchResult match_candidates(std::span<const CandidateRecord> candidates, const ReferenceSet& references);

struct FrocPoint {
  double threshold = 0.0;
  double fp_per_scan = 0.0;
  double sensitivity = 0.0;
};

struct FrocResult {
  std::vector<FrocPoint> curve;  // thresholds descending
  std::array<double, 7> sensitivities{};
  double overall_score = 0.0;
  std::size_t n_scans = 0;
  std::size_t n_relevant = 0;
};

/// Drops excluded candidates, then sweeps every distinct remaining
/// probability as a threshold. The sensitivity at a reference rate r is that
/// of the last sweep point with fp_per_scan <= r (0 if there is none).
FrocResult froc_curve(const MatchResult& labeled);

/// Malignant findings among the n highest-probability true positives
/// (one entry per finding).
std::size_t malignancy_topn(const MatchResult& labeled, const ReferenceSet& references, std::size_t n);

// CSV contracts:
//   candidates: scan_id,x_mm,y_mm,z_mm,probability
//   reference:  scan_id,x_mm,y_mm,z_mm,diameter_mm,relevance,malignant
//               (a row with only scan_id filled lists a scan without findings)
//   curve:      threshold,fp_per_scan,sensitivity
std::vector<CandidateRecord> read_candidates_csv(const std::filesystem::path& path);
ReferenceSet read_reference_csv(const std::filesystem::path& path);
void write_candidates_csv(std::ostream& out, std::span<const CandidateRecord> candidates);
void write_reference_csv(std::ostream& out, const ReferenceSet& references);
void write_froc_curve_csv(std::ostream& out, const FrocResult& result);
void write_froc_summary(std::ostream& out, const FrocResult& result);

}  // namespace octoconv
