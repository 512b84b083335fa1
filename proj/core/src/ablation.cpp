#include "partshot/ablation.hpp"

#include <cmath>
#include <sstream>

#include "partshot/errors.hpp"

namespace partshot {

AblationGrid component_grid(const PdnConfig& pdn, const PanConfig& pan) {
  AblationGrid g;
  g.name = "components";
  PdnConfig baseline = pdn, all_parts = pdn, select = pdn;
  baseline.selection = SelectionMode::global_pair;
  all_parts.selection = SelectionMode::use_all_parts;
  select.selection = SelectionMode::select_best;
  g.encoders = {{"baseline", baseline}, {"pdn_no_select", all_parts}, {"pdn", select}};

  PanConfig off = pan, c2am = pan, plain = pan;
  off.enabled = false;
  c2am.enabled = plain.enabled = true;
  c2am.cam_mode = CamMode::c2am;
  plain.cam_mode = CamMode::plain;
  g.variants = {{"baseline", "baseline", off},
                {"pdn_no_select", "pdn_no_select", off},
                {"pdn_no_select+pan", "pdn_no_select", c2am},
                {"pdn", "pdn", off},
                {"pdn+cam", "pdn", plain},
                {"pdn+pan", "pdn", c2am}};
  g.expected_order = {{"baseline", "pdn_no_select"},
                      {"pdn_no_select", "pdn"},
                      {"pdn", "pdn+pan"},
                      {"pdn_no_select", "pdn_no_select+pan"},
                      {"pdn+cam", "pdn+pan"}};
  return g;
}

AblationGrid crops_grid(const PdnConfig& pdn, const PanConfig& pan, const std::vector<int>& counts) {
  AblationGrid g;
  g.name = "crops";
  for (int n : counts) {
    PdnConfig c = pdn;
    c.selection = SelectionMode::select_best;
    c.n_parts = n;
    const std::string name = "pdn_n" + std::to_string(n);
    g.encoders.push_back({name, c});
    g.variants.push_back({name, name, pan});
  }
  for (std::size_t i = 1; i < counts.size(); ++i) {
    g.expected_order.emplace_back(g.variants[i - 1].name, g.variants[i].name);
  }
  return g;
}

AblationGrid augmented_grid(const PdnConfig& pdn, const PanConfig& pan, const std::vector<int>& n_a) {
  AblationGrid g;
  g.name = "n_a";
  PdnConfig select = pdn;
  select.selection = SelectionMode::select_best;
  g.encoders = {{"pdn", select}};
  for (int n : n_a) {
    PanConfig p = pan;
    p.enabled = true;
    p.n_a = n;
    g.variants.push_back({"pan_na" + std::to_string(n), "pdn", p});
  }
  if (g.variants.size() >= 2) g.expected_order.emplace_back(g.variants.front().name, g.variants.back().name);
  return g;
}

AblationGrid grid_by_name(const std::string& name, const PdnConfig& pdn, const PanConfig& pan) {
  if (name == "components" || name == "table2") return component_grid(pdn, pan);
  if (name == "crops") return crops_grid(pdn, pan);
  if (name == "n_a" || name == "augmented") return augmented_grid(pdn, pan);
  throw Error("unknown ablation grid '" + name + "'");
}

const EvalReport& AblationTable::row(const std::string& name) const {
  for (const auto& [n, r] : rows) {
    if (n == name) return r;
  }
  throw Error("no ablation row named '" + name + "'");
}

AblationComparison compare(const std::string& from, const EvalReport& a, const std::string& to, const EvalReport& b) {
  AblationComparison c;
  c.from = from;
  c.to = to;
  c.delta = b.mean - a.mean;
  c.direction_ok = b.mean >= a.mean;
  c.ci_overlap = std::abs(c.delta) <= a.ci95 + b.ci95;
  return c;
}

AblationTable run_ablation(const AblationGrid& grid, const std::map<std::string, EncoderAssets>& assets,
                           const EvalProtocol& protocol) {
  AblationTable table;
  table.grid = grid.name;
  for (const auto& v : grid.variants) {
    auto it = assets.find(v.encoder);
    if (it == assets.end()) throw Error("missing encoder '" + v.encoder + "' for ablation row '" + v.name + "'");
    EvalReport report = evaluate(it->second.novel, &it->second.pool, protocol, v.pan);
    report.provenance["encoder"] = v.encoder;
    table.rows.emplace_back(v.name, std::move(report));
  }
  for (const auto& [from, to] : grid.expected_order) {
    table.comparisons.push_back(compare(from, table.row(from), to, table.row(to)));
  }
  return table;
}

nlohmann::json AblationTable::to_json() const {
  nlohmann::json j;
  j["grid"] = grid;
  j["rows"] = nlohmann::json::array();
  for (const auto& [name, r] : rows) {
    j["rows"].push_back({{"name", name}, {"mean", r.mean}, {"ci95", r.ci95}, {"fingerprint", r.fingerprint},
                         {"provenance", r.provenance}});
  }
  j["comparisons"] = nlohmann::json::array();
  for (const auto& c : comparisons) {
    j["comparisons"].push_back({{"from", c.from},
                                {"to", c.to},
                                {"delta", c.delta},
                                {"direction_ok", c.direction_ok},
                                {"ci_overlap", c.ci_overlap},
                                {"failed", c.failed()}});
  }
  return j;
}

std::string AblationTable::to_csv() const {
  std::ostringstream os;
  os << "variant,mean,ci95,episodes\n";
  for (const auto& [name, r] : rows) os << name << "," << r.mean << "," << r.ci95 << "," << r.accuracies.size() << "\n";
  return os.str();
}

}  // namespace partshot
