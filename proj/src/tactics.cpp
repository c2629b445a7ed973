// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/tactics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace bfmd {

namespace {
const char* kCategoryNames[] = {"attack", "control", "defense"};
}

const char* to_string(TacticCategory c) { return kCategoryNames[static_cast<int>(c)]; }

std::optional<TacticCategory> tactic_category_from_string(const std::string& s) {
  for (int i = 0; i < 3; ++i) {
    if (s == kCategoryNames[i]) return static_cast<TacticCategory>(i);
  }
  return std::nullopt;
}

const TacticMapping& default_tactic_mapping() {
  static const TacticMapping m = [] {
    TacticMapping m;
    auto set = [&](ShotType t, TacticCategory c) { m.table[static_cast<int>(t)] = c; };
    set(ShotType::smash, TacticCategory::attack);
    set(ShotType::net_kill, TacticCategory::attack);
    set(ShotType::drive, TacticCategory::attack);
    set(ShotType::press, TacticCategory::attack);
    set(ShotType::drop, TacticCategory::control);
    set(ShotType::net_shot, TacticCategory::control);
    set(ShotType::push, TacticCategory::control);
    set(ShotType::clear, TacticCategory::control);
    set(ShotType::serve, TacticCategory::control);
    set(ShotType::long_serve, TacticCategory::control);
    set(ShotType::block, TacticCategory::defense);
    set(ShotType::lift, TacticCategory::defense);
    return m;
  }();
  return m;
}

TacticMapping tactic_mapping_from_json(const json& j) {
  TacticMapping m;
  std::array<bool, kNumShotTypes> seen{};
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto shot = shot_type_from_string(it.key());
    if (!shot) throw SchemaViolation("/" + it.key(), "unknown shot type");
    auto cat = tactic_category_from_string(it.value().get<std::string>());
    if (!cat) throw SchemaViolation("/" + it.key(), "unknown tactic category");
    m.table[static_cast<int>(*shot)] = *cat;
    seen[static_cast<int>(*shot)] = true;
  }
  for (int i = 0; i < kNumShotTypes; ++i) {
    if (!seen[i])
      throw SchemaViolation("", std::string("mapping missing shot type ") +
                                    to_string(static_cast<ShotType>(i)));
  }
  return m;
}

json tactic_mapping_to_json(const TacticMapping& m) {
  json j = json::object();
  for (int i = 0; i < kNumShotTypes; ++i)
    j[to_string(static_cast<ShotType>(i))] = to_string(m.table[i]);
  return j;
}

const std::vector<TacticPattern>& default_tactic_patterns() {
  using C = TacticCategory;
  static const std::vector<TacticPattern> ps = {
      {"attack_attack", {C::attack, C::attack}},
      {"control_attack", {C::control, C::attack}},
      {"defense_attack", {C::defense, C::attack}},
      {"attack_defense", {C::attack, C::defense}},
      {"control_control_attack", {C::control, C::control, C::attack}},
      {"defense_defense", {C::defense, C::defense}},
  };
  return ps;
}

std::vector<TacticPattern> tactic_patterns_from_json(const json& j) {
  std::vector<TacticPattern> out;
  for (const auto& e : j) {
    TacticPattern p;
    p.pattern_id = e.at("pattern_id").get<std::string>();
    for (const auto& c : e.at("sequence")) {
      auto cat = tactic_category_from_string(c.get<std::string>());
      if (!cat)
        throw SchemaViolation("/sequence", "unknown tactic category in pattern \"" +
                                               p.pattern_id + "\"");
      p.sequence.push_back(*cat);
    }
    if (p.sequence.size() < 2 || p.sequence.size() > 8)
      throw SchemaViolation("/sequence", "pattern \"" + p.pattern_id +
                                             "\" length must be in [2, 8]");
    out.push_back(std::move(p));
  }
  return out;
}

json tactic_patterns_to_json(const std::vector<TacticPattern>& ps) {
  json arr = json::array();
  for (const auto& p : ps) {
    json seq = json::array();
    for (auto c : p.sequence) seq.push_back(to_string(c));
    arr.push_back({{"pattern_id", p.pattern_id}, {"sequence", seq}});
  }
  return arr;
}

std::vector<TacticCategory> categorize_rally(const RallyRecord& rally,
                                             const TacticMapping& mapping) {
  std::vector<TacticCategory> out;
  out.reserve(rally.hits.size());
  for (const auto& h : rally.hits) out.push_back(mapping.of(h.shot.shot_type));
  return out;
}

std::vector<Occurrence> detect_patterns(const std::vector<TacticCategory>& seq,
                                        const std::vector<TacticPattern>& patterns) {
  std::vector<Occurrence> out;
  for (const auto& p : patterns) {
    if (p.sequence.empty() || p.sequence.size() > seq.size()) continue;
    for (std::size_t start = 0; start + p.sequence.size() <= seq.size(); ++start) {
      bool all = true;
      for (std::size_t k = 0; k < p.sequence.size(); ++k) {
        if (seq[start + k] != p.sequence[k]) {
          all = false;
          break;
        }
      }
      if (all) out.push_back({p.pattern_id, start});
    }
  }
  std::sort(out.begin(), out.end(), [](const Occurrence& a, const Occurrence& b) {
    if (a.start_index != b.start_index) return a.start_index < b.start_index;
    return a.pattern_id < b.pattern_id;
  });
  return out;
}

std::vector<TimedOccurrence> match_occurrences(
    const MatchRecord& match, const TacticMapping& mapping,
    const std::vector<TacticPattern>& patterns) {
  std::vector<TimedOccurrence> out;
  for (const auto& rally : match.rallies) {
    auto seq = categorize_rally(rally, mapping);
    for (const auto& occ : detect_patterns(seq, patterns)) {
      double t = static_cast<double>(rally.hits[occ.start_index].frame) / match.fps;
      out.push_back({occ.pattern_id, t});
    }
  }
  return out;
}

std::vector<IntensityCurve> intensity_curves(
    const std::vector<TimedOccurrence>& occurrences, double match_duration,
    double bin_width, double kernel_sigma) {
  if (bin_width <= 0.0)
    throw InvalidParameter("intensity_curves: bin_width must be positive");
  if (kernel_sigma < 0.0)
    throw InvalidParameter("intensity_curves: kernel_sigma must be >= 0");
  if (match_duration <= 0.0)
    throw InvalidParameter("intensity_curves: match_duration must be positive");

  const std::size_t n_bins = static_cast<std::size_t>(
      std::max<double>(1.0, std::ceil(match_duration / bin_width)));

  std::vector<std::string> pattern_ids;
  for (const auto& occ : occurrences) {
    if (std::find(pattern_ids.begin(), pattern_ids.end(), occ.pattern_id) ==
        pattern_ids.end())
      pattern_ids.push_back(occ.pattern_id);
  }
  std::sort(pattern_ids.begin(), pattern_ids.end());

  // Reflect out-of-range bin indices about the array boundaries so the
  // kernel never loses mass.
  auto reflect = [&](long long i) {
    const long long n = static_cast<long long>(n_bins);
    while (i < 0 || i >= n) {
      if (i < 0) i = -1 - i;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return static_cast<std::size_t>(i);
  };

  // Discrete kernel, normalized to unit mass.
  std::vector<double> kernel = {1.0};
  if (kernel_sigma > 0.0) {
    const long long radius = static_cast<long long>(
        std::ceil(4.0 * kernel_sigma / bin_width));
    kernel.assign(static_cast<std::size_t>(2 * radius + 1), 0.0);
    double total = 0.0;
    for (long long j = -radius; j <= radius; ++j) {
      double x = static_cast<double>(j) * bin_width;
      double w = std::exp(-0.5 * (x / kernel_sigma) * (x / kernel_sigma));
      kernel[static_cast<std::size_t>(j + radius)] = w;
      total += w;
    }
    for (double& w : kernel) w /= total;
  }
  const long long radius = static_cast<long long>(kernel.size() / 2);

  std::vector<IntensityCurve> curves;
  for (const auto& pid : pattern_ids) {
    std::vector<double> counts(n_bins, 0.0);
    for (const auto& occ : occurrences) {
      if (occ.pattern_id != pid) continue;
      auto bin = static_cast<long long>(std::floor(occ.t_seconds / bin_width));
      bin = std::clamp<long long>(bin, 0, static_cast<long long>(n_bins) - 1);
      counts[static_cast<std::size_t>(bin)] += 1.0;
    }

    std::vector<double> smoothed(n_bins, 0.0);
    for (std::size_t b = 0; b < n_bins; ++b) {
      if (counts[b] == 0.0) continue;
      for (long long j = -radius; j <= radius; ++j) {
        smoothed[reflect(static_cast<long long>(b) + j)] +=
            counts[b] * kernel[static_cast<std::size_t>(j + radius)];
      }
    }

    IntensityCurve curve;
    curve.pattern_id = pid;
    curve.times.resize(n_bins);
    curve.values.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
      curve.times[b] = (static_cast<double>(b) + 0.5) * bin_width;
      curve.values[b] = smoothed[b] / bin_width;
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

std::string curves_to_csv(const std::vector<IntensityCurve>& curves) {
  std::ostringstream os;
  os << "pattern_id,t_seconds,intensity\n";
  os << std::setprecision(10);
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.times.size(); ++i)
      os << c.pattern_id << "," << c.times[i] << "," << c.values[i] << "\n";
  }
  return os.str();
}

std::string curves_to_svg(const std::vector<IntensityCurve>& curves,
                          const std::string& title) {
  const int width = 960, height = 420, margin = 50;
  const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  double t_max = 1.0, v_max = 1e-12;
  for (const auto& c : curves) {
    if (!c.times.empty()) t_max = std::max(t_max, c.times.back());
    for (double v : c.values) v_max = std::max(v_max, v);
  }

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
     << width - margin << "\" y2=\"" << height - margin
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
     << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";

  auto sx = [&](double t) {
    return margin + t / t_max * (width - 2.0 * margin);
  };
  auto sy = [&](double v) {
    return height - margin - v / v_max * (height - 2.0 * margin);
  };

  int color = 0;
  int legend_y = margin;
  for (const auto& c : curves) {
    std::ostringstream pts;
    for (std::size_t i = 0; i < c.times.size(); ++i)
      pts << sx(c.times[i]) << "," << sy(c.values[i]) << " ";
    const char* col = palette[color % 8];
    os << "<polyline fill=\"none\" stroke=\"" << col
       << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
    os << "<text x=\"" << width - margin + 4 << "\" y=\"" << legend_y
       << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" << col
       << "\">" << c.pattern_id << "</text>\n";
    legend_y += 14;
    ++color;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace bfmd
