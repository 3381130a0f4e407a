// SPDX-License-Identifier: Apache-2.0
#include "octoconv/froc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "octoconv/error.hpp"

namespace octoconv {

std::size_t ReferenceSet::relevant_count() const {
  return static_cast<std::size_t>(std::count_if(nodules.begin(), nodules.end(), [](const ReferenceNodule& n) {
    return n.relevance == Relevance::kRelevant;
  }));
}

void ReferenceSet::add_scan(const std::string& scan_id) {
  if (std::find(scans.begin(), scans.end(), scan_id) == scans.end()) scans.push_back(scan_id);
}

MatchResult match_candidates(std::span<const CandidateRecord> candidates, const ReferenceSet& references) {
  std::map<std::string, std::vector<std::size_t>> by_scan;
  for (const auto& s : references.scans) by_scan[s];
  for (std::size_t i = 0; i < references.nodules.size(); ++i) by_scan[references.nodules[i].scan_id].push_back(i);

  MatchResult res;
  res.n_relevant = references.relevant_count();
  res.n_scans = by_scan.size();
  res.candidates.reserve(candidates.size());
  for (const auto& c : candidates) {
    auto it = by_scan.find(c.scan_id);
    if (it == by_scan.end()) throw std::invalid_argument("candidate references unknown scan_id '" + c.scan_id + "'");
    LabeledCandidate lc{c, MatchKind::kFalsePositive, std::nullopt};
    double best = 0.0;
    for (std::size_t idx : it->second) {
      const auto& n = references.nodules[idx];
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) d2 += (c.position_mm[a] - n.center_mm[a]) * (c.position_mm[a] - n.center_mm[a]);
      const double d = std::sqrt(d2);
      if (!(d < 0.5 * n.diameter_mm)) continue;
      if (!lc.nodule || d < best) {
        lc.nodule = idx;
        best = d;
      }
    }
    if (lc.nodule)
      lc.kind = references.nodules[*lc.nodule].relevance == Relevance::kRelevant ? MatchKind::kHit
                                                                                 : MatchKind::kExcluded;
    res.candidates.push_back(std::move(lc));
  }
  return res;
}

FrocResult froc_curve(const MatchResult& labeled) {
  if (labeled.n_relevant == 0) throw std::invalid_argument("FROC needs at least one relevant finding");
  if (labeled.n_scans == 0) throw std::invalid_argument("FROC needs at least one scan");

  std::vector<const LabeledCandidate*> order;
  for (const auto& c : labeled.candidates)
    if (c.kind != MatchKind::kExcluded) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](const LabeledCandidate* a, const LabeledCandidate* b) {
    return a->candidate.probability > b->candidate.probability;
  });

  FrocResult res;
  res.n_scans = labeled.n_scans;
  res.n_relevant = labeled.n_relevant;
  std::set<std::size_t> detected;
  std::size_t fps = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = order[i]->candidate.probability;
    for (; i < order.size() && order[i]->candidate.probability == t; ++i) {
      if (order[i]->kind == MatchKind::kHit)
        detected.insert(*order[i]->nodule);
      else
        ++fps;
    }
    res.curve.push_back({t, static_cast<double>(fps) / static_cast<double>(labeled.n_scans),
                         static_cast<double>(detected.size()) / static_cast<double>(labeled.n_relevant)});
  }

  double sum = 0.0;
  for (std::size_t r = 0; r < kReferenceFpRates.size(); ++r) {
    double sens = 0.0;
    for (const auto& p : res.curve)
      if (p.fp_per_scan <= kReferenceFpRates[r]) sens = p.sensitivity;
    res.sensitivities[r] = sens;
    sum += sens;
  }
  res.overall_score = sum / static_cast<double>(kReferenceFpRates.size());
  return res;
}

std::size_t malignancy_topn(const MatchResult& labeled, const ReferenceSet& references, std::size_t n) {
  if (n == 0) throw std::invalid_argument("malignancy_topn: n must be >= 1");
  std::vector<const LabeledCandidate*> hits;
  for (const auto& c : labeled.candidates)
    if (c.kind == MatchKind::kHit) hits.push_back(&c);
  std::sort(hits.begin(), hits.end(), [](const LabeledCandidate* a, const LabeledCandidate* b) {
    if (a->candidate.probability != b->candidate.probability)
      return a->candidate.probability > b->candidate.probability;
    if (a->candidate.scan_id != b->candidate.scan_id) return a->candidate.scan_id < b->candidate.scan_id;
    return a->candidate.position_mm < b->candidate.position_mm;
  });
  std::set<std::size_t> seen;
  std::size_t taken = 0, malignant = 0;
  for (const auto* h : hits) {
    if (taken == n) break;
    if (!seen.insert(*h->nodule).second) continue;
    ++taken;
    if (references.nodules.at(*h->nodule).malignant) ++malignant;
  }
  return malignant;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_number(const std::string& text, const std::string& file, std::size_t line, const char* column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v))
    throw ParseError(file, line, std::string("invalid ") + column + " '" + text + "'");
  return v;
}

std::ifstream open_with_header(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::string first;
  if (!std::getline(in, first) || strip_cr(first) != header)
    throw ParseError(path.string(), 1, "expected header '" + header + "'");
  return in;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

std::vector<CandidateRecord> read_candidates_csv(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream in = open_with_header(path, "scan_id,x_mm,y_mm,z_mm,probability");
  std::vector<CandidateRecord> out;
  std::string line;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw ParseError(file, line_no, "expected 5 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw ParseError(file, line_no, "empty scan_id");
    CandidateRecord c;
    c.scan_id = f[0];
    c.position_mm = {parse_number(f[1], file, line_no, "x_mm"), parse_number(f[2], file, line_no, "y_mm"),
                     parse_number(f[3], file, line_no, "z_mm")};
    c.probability = parse_number(f[4], file, line_no, "probability");
    if (c.probability < 0.0 || c.probability > 1.0) throw ParseError(file, line_no, "probability outside [0, 1]");
    out.push_back(std::move(c));
  }
  return out;
}

ReferenceSet read_reference_csv(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream in = open_with_header(path, "scan_id,x_mm,y_mm,z_mm,diameter_mm,relevance,malignant");
  ReferenceSet refs;
  std::string line;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw ParseError(file, line_no, "expected 7 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw ParseError(file, line_no, "empty scan_id");
    refs.add_scan(f[0]);
    if (std::all_of(f.begin() + 1, f.end(), [](const std::string& s) { return s.empty(); })) continue;

    ReferenceNodule n;
    n.scan_id = f[0];
    n.center_mm = {parse_number(f[1], file, line_no, "x_mm"), parse_number(f[2], file, line_no, "y_mm"),
                   parse_number(f[3], file, line_no, "z_mm")};
    n.diameter_mm = parse_number(f[4], file, line_no, "diameter_mm");
    if (!(n.diameter_mm > 0.0)) throw ParseError(file, line_no, "diameter_mm must be positive");
    if (f[5] == "relevant")
      n.relevance = Relevance::kRelevant;
    else if (f[5] == "irrelevant")
      n.relevance = Relevance::kIrrelevant;
    else
      throw ParseError(file, line_no, "relevance must be 'relevant' or 'irrelevant'");
    if (f[6] != "0" && f[6] != "1") throw ParseError(file, line_no, "malignant must be 0 or 1");
    n.malignant = f[6] == "1";
    refs.nodules.push_back(std::move(n));
  }
  return refs;
}

void write_candidates_csv(std::ostream& out, std::span<const CandidateRecord> candidates) {
  out << "scan_id,x_mm,y_mm,z_mm,probability\n";
  for (const auto& c : candidates)
    out << c.scan_id << ',' << fmt("%.6f", c.position_mm[0]) << ',' << fmt("%.6f", c.position_mm[1]) << ','
        << fmt("%.6f", c.position_mm[2]) << ',' << fmt("%.8f", c.probability) << '\n';
}

void write_reference_csv(std::ostream& out, const ReferenceSet& references) {
  out << "scan_id,x_mm,y_mm,z_mm,diameter_mm,relevance,malignant\n";
  std::set<std::string> with_findings;
  for (const auto& n : references.nodules) with_findings.insert(n.scan_id);
  for (const auto& s : references.scans)
    if (!with_findings.contains(s)) out << s << ",,,,,,\n";
  for (const auto& n : references.nodules)
    out << n.scan_id << ',' << fmt("%.6f", n.center_mm[0]) << ',' << fmt("%.6f", n.center_mm[1]) << ','
        << fmt("%.6f", n.center_mm[2]) << ',' << fmt("%.6f", n.diameter_mm) << ','
        << (n.relevance == Relevance::kRelevant ? "relevant" : "irrelevant") << ',' << (n.malignant ? 1 : 0)
        << '\n';
}

void write_froc_curve_csv(std::ostream& out, const FrocResult& result) {
  out << "threshold,fp_per_scan,sensitivity\n";
  for (const auto& p : result.curve)
    out << fmt("%.8f", p.threshold) << ',' << fmt("%.6f", p.fp_per_scan) << ',' << fmt("%.6f", p.sensitivity)
        << '\n';
}

void write_froc_summary(std::ostream& out, const FrocResult& result) {
  out << "n_scans: " << result.n_scans << '\n' << "n_relevant: " << result.n_relevant << '\n';
  for (std::size_t r = 0; r < kReferenceFpRates.size(); ++r)
    out << "sensitivity@" << fmt("%g", kReferenceFpRates[r]) << ": " << fmt("%.6f", result.sensitivities[r])
        << '\n';
  out << "overall_score: " << fmt("%.6f", result.overall_score) << '\n';
}

}  // namespace octoconv
