#include "condsym/report.hpp"

namespace condsym {

namespace {

Json relations(const std::vector<Relation>& rs) {
  Json out = Json::array();
  for (const auto& r : rs) out.push_back(r.text);
  return out;
}

}  // namespace

Json to_json(const CheckReport& r) {
  Json j;
  j["claim-id"] = r.claim;
  j["n_points"] = r.n_points;
  j["tol"] = r.tol;
  j["max_violation"] = r.max_violation;
  j["status"] = r.status;
  j["seed"] = r.seed;
  j["resamples"] = r.resamples;
  Json pt = Json::object();
  for (const auto& [k, v] : r.worst_point) pt[k] = v;
  j["worst_point"] = pt;
  return j;
}

Json to_json(const VerifyResult& r) {
  Json j = to_json(r.report);
  j["kind"] = kind_name(r.kind);
  j["indices"] = r.indices;
  j["symbolic_zero"] = r.symbolic_zero;
  Json samples = Json::array();
  for (const auto& s : r.per_sample) samples.push_back(to_json(s));
  j["samples"] = samples;
  return j;
}

Json to_json(const CompareReport& r) {
  Json j;
  j["status"] = r.status;
  j["reduced_identical"] = r.reduced_identical;
  Json pairs = Json::array();
  for (const auto& p : r.matched_pairs)
    pairs.push_back({{"a", p.label_a}, {"b", p.label_b}, {"level", p.level}});
  j["matched_pairs"] = pairs;
  j["unmatched_a"] = r.unmatched_a_text;
  j["unmatched_b"] = r.unmatched_b_text;
  j["implied_a"] = r.implied_a;
  j["implied_b"] = r.implied_b;
  j["assumptions"] = r.assumptions;
  return j;
}

Json to_json(const DeterminingSystem& ds) {
  Json j;
  j["description"] = ds.description;
  Json eqs = Json::array();
  for (const auto& e : ds.equations) eqs.push_back({{"label", e.label}, {"equation", to_string(e.expr) + " = 0"}});
  j["equations"] = eqs;
  Json basis = Json::array();
  for (const auto& b : ds.basis) basis.push_back(to_string(b));
  j["basis"] = basis;
  j["assumptions"] = relations(ds.assumptions);
  j["xi0_power"] = ds.xi0_power;
  return j;
}

Json to_json(const Classification& c) {
  Json j;
  j["nonclassical"] = c.nonclassical;
  j["first_type"] = c.first_type;
  j["lie_degenerate"] = c.lie_degenerate;
  j["trace"] = c.trace;
  return j;
}

Json report(const std::string& command, bool ok, const Json& payload) {
  Json j;
  j["schema"] = kReportSchema;
  j["command"] = command;
  j["ok"] = ok;
  for (auto it = payload.begin(); it != payload.end(); ++it) j[it.key()] = it.value();
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace condsym
