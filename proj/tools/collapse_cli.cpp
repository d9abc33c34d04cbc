// Command-line front end: scenario reports, counterexample demonstration,
// pillowcase structure checks, and randomized oracle self-tests.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "collapse/verifier.hpp"

namespace {

using namespace collapse;
using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct GlobalOpts {
  std::string scenario_file;
  std::string preset;
  double h = 0;  // 0: use the preset default
  std::vector<double> mu;
  std::vector<double> r;
  std::string out;
  std::string format = "json";
  unsigned long long seed = 1;
  int threads = default_threads();
  bool inject_fault = false;
};

void write_csv_config(std::ostream& os, const json& cfg) {
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    os << "# " << it.key() << '=';
    if (it->is_string()) {
      os << it->get<std::string>();
    } else if (it->is_number_float()) {
      os << fmt(it->get<double>());
    } else if (it->is_array()) {
      bool first = true;
      for (const auto& e : *it) {
        if (!first) os << ',';
        first = false;
        os << (e.is_number_float() ? fmt(e.get<double>()) : e.dump());
      }
    } else {
      os << it->dump();
    }
    os << '\n';
  }
}

int emit(const GlobalOpts& g, const json& cfg, json body,
         const std::function<void(std::ostream&)>& csv_body) {
  std::ostringstream ss;
  if (g.format == "csv") {
    write_csv_config(ss, cfg);
    csv_body(ss);
  } else {
    body["config"] = cfg;
    ss << body.dump(2) << '\n';
  }
  if (g.out.empty()) {
    std::cout << ss.str();
  } else {
    std::ofstream f(g.out);
    require(f.good(), "cannot open output file: " + g.out);
    f << ss.str();
  }
  return 0;
}

json base_config(const GlobalOpts& g, const std::string& command) {
  return {{"command", command}, {"format", g.format}, {"seed", g.seed},
          {"threads", g.threads}};
}

CollapseScenario resolve_scenario(const GlobalOpts& g, json& cfg) {
  require(g.scenario_file.empty() || g.preset.empty(),
          "give either --scenario or --preset, not both");
  if (!g.scenario_file.empty()) {
    std::ifstream in(g.scenario_file);
    require(in.good(), "cannot open scenario file: " + g.scenario_file);
    json j;
    try {
      j = json::parse(in);
    } catch (const std::exception& e) {
      throw config_error(std::string("scenario file: ") + e.what());
    }
    if (g.h > 0 && j.contains("model")) j["model"]["h"] = g.h;
    if (!g.mu.empty()) j["mu"] = g.mu;
    if (!g.r.empty()) j["r"] = g.r;
    CollapseScenario s = scenario_from_json(j);
    cfg["scenario_file"] = g.scenario_file;
    cfg["scenario"] = s.name;
    cfg["mu"] = s.mu_grid;
    cfg["r"] = s.r_grid;
    return s;
  }
  const std::string preset = g.preset.empty() ? "simple" : g.preset;
  const std::vector<double> mu =
      g.mu.empty() ? std::vector<double>{4, 16, 64, 256} : g.mu;
  CollapseScenario s;
  if (preset == "simple") {
    const double h = g.h > 0 ? g.h : 2 * kPi / 48;
    s = g.r.empty() ? make_simple_collapse(h, mu) : make_simple_collapse(h, mu, g.r);
    cfg["h"] = h;
  } else if (preset == "counterexample") {
    require(g.r.empty(), "the counterexample preset carries a fixed r grid");
    int n = 48;
    if (g.h > 0) {
      n = static_cast<int>(std::llround(1.0 / g.h));
      require(n >= 8 && std::abs(n * g.h - 1.0) <= 1e-9,
              "the counterexample preset needs h = 1/n for an integer n >= 8");
    }
    s = make_counterexample_scenario(n, mu);
    cfg["h"] = 1.0 / n;
  } else if (preset == "pillowcase") {
    require(g.r.empty(), "the pillowcase preset carries a fixed r grid");
    const double h = g.h > 0 ? g.h : 2 * kPi / 16;
    s = make_pillowcase_scenario(h, mu);
    cfg["h"] = h;
  } else {
    throw config_error("unknown preset: " + preset);
  }
  cfg["preset"] = preset;
  cfg["scenario"] = s.name;
  cfg["mu"] = s.mu_grid;
  cfg["r"] = s.r_grid;
  return s;
}

// ---------------------------------------------------------------- quasifinsler

int cmd_quasifinsler(const GlobalOpts& g, double lambda, int base_n, int fiber_n,
                     int samples) {
  require(samples >= 4, "need at least 4 direction samples");
  const T3Setup t3 = make_t3(lambda, base_n, fiber_n);
  const QuasiFinslerField qf = build_quasifinsler(
      std::make_shared<const DiscreteFibration>(t3.fib), t3.field, t3.reference);

  const auto closed = [lambda](double a, double b) {
    return std::sqrt(a * a + b * b + lambda * std::min(a * a, b * b));
  };
  json rows = json::array();
  double max_gap = 0;
  std::ostringstream csv_rows;
  csv_rows << "# directions\n";
  csv_rows << "a,b,value,closed_form,gap\n";
  for (int i = 0; i < samples; ++i) {
    const double th = 2 * kPi * i / samples;
    const double a = std::cos(th), b = std::sin(th);
    const double val = qf.eval(0, Eigen::Vector2d(a, b));
    const double cl = closed(a, b);
    const double gap = std::abs(val - cl);
    max_gap = std::max(max_gap, gap);
    rows.push_back({{"a", a}, {"b", b}, {"value", val}, {"closed_form", cl}, {"gap", gap}});
    csv_rows << fmt(a) << ',' << fmt(b) << ',' << fmt(val) << ',' << fmt(cl) << ','
             << fmt(gap) << '\n';
  }
  const double l1 = qf.eval(0, Eigen::Vector2d(1, 0));
  const double l2 = qf.eval(0, Eigen::Vector2d(0, 1));
  const double l12 = qf.eval(0, Eigen::Vector2d(1, 1));
  const double triangle_gap = l12 - l1 - l2;
  const double expected_gap = std::sqrt(lambda + 2) - 2;
  // the axis pair forces this much relaxation; the sampled modulus may top it
  const double axis_pair_k = std::sqrt(lambda + 2) / 2;

  json cfg = base_config(g, "quasifinsler");
  cfg["lambda"] = lambda;
  cfg["base_n"] = base_n;
  cfg["fiber_n"] = fiber_n;
  cfg["samples"] = samples;

  json body = {{"directions", rows},
               {"max_direction_gap", max_gap},
               {"value_e1", l1},
               {"value_e2", l2},
               {"value_diagonal", l12},
               {"triangle_gap", triangle_gap},
               {"expected_triangle_gap", expected_gap},
               {"modulus_k", qf.modulus_k},
               {"modulus_k_axis_pair", axis_pair_k},
               {"envelope_c", qf.envelope_c},
               {"axioms",
                {{"positivity_violations", qf.axioms.positivity_violations},
                 {"max_homogeneity_residual", qf.axioms.max_homogeneity_residual},
                 {"sampled_modulus", qf.axioms.modulus_k},
                 {"min_unit_value", qf.axioms.min_unit_value},
                 {"samples", qf.axioms.samples}}}};
  const std::string dir_csv = csv_rows.str();
  emit(g, cfg, body, [&](std::ostream& os) {
    os << dir_csv;
    os << "# summary\n";
    os << "value_e1,value_e2,value_diagonal,triangle_gap,expected_triangle_gap,"
          "modulus_k,modulus_k_axis_pair,envelope_c,max_direction_gap\n";
    os << fmt(l1) << ',' << fmt(l2) << ',' << fmt(l12) << ',' << fmt(triangle_gap) << ','
       << fmt(expected_gap) << ',' << fmt(qf.modulus_k) << ',' << fmt(axis_pair_k) << ','
       << fmt(qf.envelope_c) << ',' << fmt(max_gap) << '\n';
  });
  ensure(max_gap <= 1e-6, "fiberwise evaluator deviates from the closed form");
  ensure(std::abs(triangle_gap - expected_gap) <= 1e-6,
         "triangle defect deviates from the expected value");
  ensure(qf.axioms.positivity_violations == 0, "quasinorm positivity violated");
  ensure(qf.modulus_k >= axis_pair_k - 1e-9,
         "sampled modulus fell below the axis-pair ratio");
  return 0;
}

// -------------------------------------------------------------- counterexample

int cmd_counterexample(const GlobalOpts& g, int n) {
  const std::vector<double> mu =
      g.mu.empty() ? std::vector<double>{4, 16, 64, 256} : g.mu;
  const CollapseScenario s = make_counterexample_scenario(n, mu);
  const double h = 1.0 / n;

  std::vector<int> all(s.e1->node_count());
  std::iota(all.begin(), all.end(), 0);

  struct Row {
    double mu, diameter, bound, lambda, expected_lambda, gh_to_point;
  };
  std::vector<Row> rows;
  for (const double m : mu) {
    const StratifiedMetricField gm = s.family.at_mu(m);
    const GeodesicGraph graph = GeodesicGraph::build(*s.e1, gm, s.family.stencil_at_mu(m));
    Row row;
    row.mu = m;
    row.diameter = graph.eccentricity(0);  // vertex-transitive: any source works
    ensure(std::isfinite(row.diameter), "level graph is disconnected");
    row.bound = 1.0 / m + 1.0 / std::sqrt(m) + 3 * h;
    row.lambda = lambda_sup(gm, *s.g_inf_on_e1, *s.e1, all);
    row.expected_lambda = 1.0 / std::sqrt(m);
    row.gh_to_point = 0.5 * row.diameter;
    rows.push_back(row);
  }

  json cfg = base_config(g, "counterexample");
  cfg["n"] = n;
  cfg["h"] = h;
  cfg["mu"] = mu;

  json jrows = json::array();
  for (const auto& r : rows)
    jrows.push_back({{"mu", r.mu},
                     {"diameter", r.diameter},
                     {"bound", r.bound},
                     {"lambda", r.lambda},
                     {"expected_lambda", r.expected_lambda},
                     {"gh_to_point", r.gh_to_point}});
  json body = {{"rows", jrows}};
  emit(g, cfg, body, [&](std::ostream& os) {
    os << "# counterexample\n";
    os << "mu,diameter,bound,lambda,expected_lambda,gh_to_point\n";
    for (const auto& r : rows)
      os << fmt(r.mu) << ',' << fmt(r.diameter) << ',' << fmt(r.bound) << ','
         << fmt(r.lambda) << ',' << fmt(r.expected_lambda) << ',' << fmt(r.gh_to_point)
         << '\n';
  });

  for (const auto& r : rows) {
    ensure(r.diameter <= r.bound + 1e-12, "diameter exceeds the collapse bound");
    ensure(std::abs(r.lambda - r.expected_lambda) <= 1e-6,
           "lower form bound deviates from the expected value");
  }
  for (size_t i = 0; i + 1 < rows.size(); ++i)
    ensure(rows[i + 1].diameter < rows[i].diameter,
           "diameters are not strictly decreasing");
  return 0;
}

// -------------------------------------------------------------------- collapse

int cmd_collapse(const GlobalOpts& g, int pairs) {
  json cfg = base_config(g, "collapse");
  const CollapseScenario s = resolve_scenario(g, cfg);
  cfg["pairs"] = pairs;

  const ConditionReport cond = check_conditions(s, g.threads);
  const CollapseReport run = run_collapse(s, g.threads);
  const bool base_done = s.g_inf->regular;
  BaseComparisonReport basecmp;
  if (base_done) basecmp = base_vs_total(s, pairs, 0.5, g.seed, g.threads);

  json body = {{"conditions", to_json(cond)},
               {"collapse", to_json(run)},
               {"base_comparison", base_done ? to_json(basecmp) : json(nullptr)},
               {"all_pass", cond.all_pass}};
  return emit(g, cfg, body, [&](std::ostream& os) {
    write_csv(cond, os);
    write_csv(run, os);
    if (base_done) write_csv(basecmp, os);
  });
}

// ------------------------------------------------------------------ pillowcase

int cmd_pillowcase(const GlobalOpts& g) {
  const double h = g.h > 0 ? g.h : 2 * kPi / 16;
  const Pillowcase pc = make_pillowcase(h);

  int corners = 0;
  for (int v = 0; v < pc.total->node_count(); ++v)
    if (pc.total->tag(v) == OrbifoldTag::z2) ++corners;
  const StratificationLabel canon = canonical_stratification(*pc.total);
  const StratificationLabel bstrat = canonical_stratification(*pc.base);
  const StratificationLabel ind = induced_stratification(pc.fib, bstrat);
  const int nb = pc.base->node_count();
  const int end_lo = static_cast<int>(fiber_endpoint_nodes(pc.fib, 0).size());
  const int end_hi = static_cast<int>(fiber_endpoint_nodes(pc.fib, nb - 1).size());
  int interior_max = 0;
  for (int b = 1; b + 1 < nb; ++b)
    interior_max = std::max(
        interior_max, static_cast<int>(fiber_endpoint_nodes(pc.fib, b).size()));

  json cfg = base_config(g, "pillowcase");
  cfg["h"] = h;
  json body = {{"total_nodes", pc.total->node_count()},
               {"base_nodes", nb},
               {"corner_nodes", corners},
               {"canonical_strata", canon.count},
               {"base_strata", bstrat.count},
               {"induced_strata", ind.count},
               {"end_fiber_endpoints", {end_lo, end_hi}},
               {"interior_fiber_endpoints", interior_max}};
  emit(g, cfg, body, [&](std::ostream& os) {
    os << "# pillowcase\n";
    os << "key,value\n";
    os << "total_nodes," << pc.total->node_count() << '\n';
    os << "base_nodes," << nb << '\n';
    os << "corner_nodes," << corners << '\n';
    os << "canonical_strata," << canon.count << '\n';
    os << "base_strata," << bstrat.count << '\n';
    os << "induced_strata," << ind.count << '\n';
    os << "end_fiber_endpoints_lo," << end_lo << '\n';
    os << "end_fiber_endpoints_hi," << end_hi << '\n';
    os << "interior_fiber_endpoints," << interior_max << '\n';
  });
  ensure(corners == 4, "pillowcase must have exactly 4 corner points");
  ensure(canon.count == 5, "pillowcase must have 5 canonical strata");
  ensure(bstrat.count == 3, "base interval must have 3 strata");
  ensure(ind.count == 7, "pillowcase must have 7 induced strata");
  ensure(end_lo == 2 && end_hi == 2, "end fibers must have 2 endpoint nodes");
  ensure(interior_max == 0, "interior fibers must have no endpoint nodes");
  return 0;
}

// --------------------------------------------------------------------- oracles

struct OracleRow {
  std::string name;
  int trials = 0;
  double residual = 0;
  bool pass = false;
  std::string note;
};

SemiMetricSpace random_cloud_space(Rng& rng, int n) {
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts)
    p = Eigen::Vector3d(uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0),
                        uniform(rng, 0.0, 1.0));
  std::vector<double> full(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) full[static_cast<size_t>(i) * n + j] = (pts[i] - pts[j]).norm();
  return SemiMetricSpace::from_full(n, full);
}

int cmd_oracles(const GlobalOpts& g, int trials) {
  require(trials >= 1, "need at least one trial");
  Rng rng(g.seed);
  std::vector<OracleRow> rows;

  {  // 1: the triangle oracle must accept true metrics and reject corruption
    OracleRow row{"metric_axioms", trials, 0, true, ""};
    for (int t = 0; t < trials; ++t) {
      const int n = uniform_int(rng, 4, 9);
      std::vector<Eigen::Vector3d> pts(n);
      for (auto& p : pts)
        p = Eigen::Vector3d(uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0),
                            uniform(rng, 0.0, 1.0));
      std::vector<double> full(static_cast<size_t>(n) * n, 0.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          full[static_cast<size_t>(i) * n + j] = (pts[i] - pts[j]).norm();
      try {
        SemiMetricSpace::from_full(n, full);
      } catch (const check_error&) {
        row.pass = false;
        row.note = "a true metric was rejected";
      }
      double worst = 0;
      for (int k = 0; k < n; ++k)
        worst = std::max(worst, full[k] + full[static_cast<size_t>(k) * n + 1]);
      full[1] = full[static_cast<size_t>(1) * n] = 1.5 * worst + 1.0;
      bool caught = false;
      try {
        SemiMetricSpace::from_full(n, full);
      } catch (const check_error&) {
        caught = true;
      }
      if (!caught) {
        row.pass = false;
        row.residual += 1;
        row.note = "a triangle violation went undetected";
      }
    }
    rows.push_back(row);
  }

  {  // 2: graph distances against the dense all-pairs recursion
    OracleRow row{"shortest_paths", trials, 0, true, ""};
    const ModelSpace model = ModelSpace::torus({2 * kPi, 2 * kPi}, 2 * kPi / 8);
    for (int t = 0; t < trials; ++t) {
      Eigen::Matrix2d m;
      m << uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0),
          uniform(rng, -1.0, 1.0);
      const Eigen::MatrixXd form = m.transpose() * m + 0.2 * Eigen::Matrix2d::Identity();
      const auto field = StratifiedMetricField::uniform(2, form, /*semi=*/false);
      const GeodesicGraph graph = GeodesicGraph::build(model, field, StencilConfig{});
      const DistanceMatrix dm = graph.all_pairs(g.threads);
      const int n = graph.node_count();
      std::vector<double> fw(static_cast<size_t>(n) * n,
                             std::numeric_limits<double>::infinity());
      for (int i = 0; i < n; ++i) fw[static_cast<size_t>(i) * n + i] = 0;
      for (const GraphEdge& e : graph.edges()) {
        fw[static_cast<size_t>(e.a) * n + e.b] =
            std::min(fw[static_cast<size_t>(e.a) * n + e.b], e.w);
        fw[static_cast<size_t>(e.b) * n + e.a] =
            std::min(fw[static_cast<size_t>(e.b) * n + e.a], e.w);
      }
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) {
          const double dik = fw[static_cast<size_t>(i) * n + k];
          if (!std::isfinite(dik)) continue;
          for (int j = 0; j < n; ++j) {
            const double v = dik + fw[static_cast<size_t>(k) * n + j];
            if (v < fw[static_cast<size_t>(i) * n + j])
              fw[static_cast<size_t>(i) * n + j] = v;
          }
        }
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          row.residual = std::max(
              row.residual, std::abs(dm(i, j) - fw[static_cast<size_t>(i) * n + j]));
    }
    row.pass = row.residual <= 1e-9;
    rows.push_back(row);
  }

  {  // 3: two-stage composition bound
    OracleRow row{"composition_bound", trials, 0, true, ""};
    for (int t = 0; t < trials; ++t) {
      const int na = uniform_int(rng, 4, 9), nb = uniform_int(rng, 4, 9),
                nc = uniform_int(rng, 4, 9);
      const SemiMetricSpace x = random_cloud_space(rng, na);
      const SemiMetricSpace y = random_cloud_space(rng, nb);
      const SemiMetricSpace z = random_cloud_space(rng, nc);
      CorrespondenceMap f, fp;
      f.target_size = nb;
      fp.target_size = nc;
      for (int i = 0; i < na; ++i) f.to.push_back(uniform_int(rng, 0, nb - 1));
      for (int i = 0; i < nb; ++i) fp.to.push_back(uniform_int(rng, 0, nc - 1));
      const DiscrepancyReport rf = discrepancy(f, x, y);
      const DiscrepancyReport rp = discrepancy(fp, y, z);
      const DiscrepancyReport rc = compose_discrepancy(f, fp, x, y, z);
      row.residual = std::max(
          row.residual, rc.epsilon - (rf.epsilon + 2 * rp.epsilon));
    }
    row.pass = row.residual <= 1e-12;
    rows.push_back(row);
  }

  {  // 4: zero-distance quotient, class count and idempotence
    OracleRow row{"free_quotient", trials, 0, true, ""};
    for (int t = 0; t < trials; ++t) {
      const int k = uniform_int(rng, 3, 6);
      std::vector<Eigen::Vector3d> pts(k);
      for (auto& p : pts)
        p = Eigen::Vector3d(uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0),
                            uniform(rng, 0.0, 1.0));
      std::vector<Eigen::Vector3d> blown;
      for (const auto& p : pts) {
        const int reps = uniform_int(rng, 1, 3);
        for (int i = 0; i < reps; ++i) blown.push_back(p);
      }
      const int n = static_cast<int>(blown.size());
      std::vector<double> full(static_cast<size_t>(n) * n, 0.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          full[static_cast<size_t>(i) * n + j] = (blown[i] - blown[j]).norm();
      const SemiMetricSpace space = SemiMetricSpace::from_full(n, full);
      const QuotientResult q = free_quotient(space, 1e-9);
      if (q.quotient.size() != k) {
        row.pass = false;
        row.residual += 1;
        row.note = "wrong class count";
        continue;
      }
      const QuotientResult q2 = free_quotient(q.quotient, 0.0);
      if (q2.quotient.size() != k) {
        row.pass = false;
        row.residual += 1;
        row.note = "quotient is not idempotent";
      }
      for (int i = 0; i < q.quotient.size(); ++i)
        for (int j = 0; j < q.quotient.size(); ++j)
          row.residual = std::max(
              row.residual,
              std::abs(q.quotient(i, j) - space(q.representative[i], q.representative[j])));
    }
    row.pass = row.pass && row.residual <= 1e-12;
    rows.push_back(row);
  }

  int witness_a = -1, witness_b = -1;
  {  // 5: comb decomposition against plain graph search
    OracleRow row{"comb_decomposition", trials, 0, true, ""};
    const double h = 2 * kPi / 16, mu = 4;
    const CollapseScenario s = make_simple_collapse(h, {mu}, {1, 0.5});
    CombDecomposer dec(s, /*r_index=*/1, mu, g.threads);
    if (g.inject_fault) dec.inject_fault(0.5);
    const GeodesicGraph graph =
        GeodesicGraph::build(*s.e1, s.family.at_mu(mu), s.family.stencil_at_mu(mu));
    const std::vector<int> ext = exterior_nodes(s, 1, 1);
    const int npairs = std::max(trials, 64);
    row.trials = npairs;
    for (int t = 0; t < npairs; ++t) {
      const int x = ext[uniform_int(rng, 0, static_cast<int>(ext.size()) - 1)];
      const int y = ext[uniform_int(rng, 0, static_cast<int>(ext.size()) - 1)];
      const double via_comb = dec.distance(x, y);
      const double via_graph = graph.dijkstra(x)[y];
      const double diff = std::abs(via_comb - via_graph);
      if (diff > row.residual) {
        row.residual = diff;
        witness_a = x;
        witness_b = y;
      }
    }
    row.pass = row.residual <= 1e-9;
    if (!row.pass)
      row.note = "pair (" + std::to_string(witness_a) + ", " + std::to_string(witness_b) +
                 ") off by " + fmt(row.residual);
    rows.push_back(row);
  }

  json cfg = base_config(g, "oracles");
  cfg["trials"] = trials;
  cfg["inject_fault"] = g.inject_fault;
  json jrows = json::array();
  for (const auto& r : rows)
    jrows.push_back({{"name", r.name},
                     {"trials", r.trials},
                     {"residual", r.residual},
                     {"pass", r.pass},
                     {"note", r.note}});
  bool all_pass = true;
  for (const auto& r : rows) all_pass = all_pass && r.pass;
  json body = {{"rows", jrows}, {"all_pass", all_pass}};
  emit(g, cfg, body, [&](std::ostream& os) {
    os << "# oracles\n";
    os << "name,trials,residual,pass\n";
    for (const auto& r : rows)
      os << r.name << ',' << r.trials << ',' << fmt(r.residual) << ',' << int(r.pass)
         << '\n';
    os << "# all_pass," << int(all_pass) << '\n';
  });

  if (g.inject_fault) {
    const OracleRow& comb = rows.back();
    ensure(!comb.pass, "the injected fault was not detected");
    std::cerr << "injected fault detected by the comb oracle: " << comb.note << '\n';
    return 1;
  }
  for (const auto& r : rows)
    ensure(r.pass, "oracle failed: " + r.name + (r.note.empty() ? "" : " (" + r.note + ")"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete collapse verification toolkit"};
  app.require_subcommand(1);
  // --h is taken by the grid step; keep help on the long flag only
  app.set_help_flag("--help", "print this help message and exit");

  GlobalOpts g;
  app.add_option("--scenario", g.scenario_file, "scenario description file (JSON)");
  app.add_option("--preset", g.preset, "built-in scenario: simple|counterexample|pillowcase");
  app.add_option("--h", g.h, "grid step override");
  app.add_option("--mu", g.mu, "mu schedule override")->expected(-1);
  app.add_option("--r", g.r, "r grid override")->expected(-1);
  app.add_option("--out", g.out, "write the report to this file instead of stdout");
  app.add_option("--format", g.format, "output format")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--seed", g.seed, "seed for sampled checks");
  app.add_option("--threads", g.threads, "worker threads");
  app.add_flag("--inject-fault", g.inject_fault,
               "corrupt an internal table to demonstrate oracle sensitivity");

  double lambda = 7;
  int base_n = 8, fiber_n = 64, samples = 64;
  CLI::App* sc_quasi = app.add_subcommand(
      "quasifinsler", "induced fiberwise length structure on the base torus");
  sc_quasi->add_option("--lambda", lambda, "anisotropy strength (> 2)");
  sc_quasi->add_option("--base-n", base_n, "base grid subdivisions");
  sc_quasi->add_option("--fiber-n", fiber_n, "fiber grid subdivisions (multiple of 4)");
  sc_quasi->add_option("--samples", samples, "direction samples");

  int ce_n = 128;
  CLI::App* sc_counter = app.add_subcommand(
      "counterexample", "distance collapse without form convergence");
  sc_counter->add_option("--n", ce_n, "grid subdivisions of the unit-period torus");

  int pairs = 100;
  CLI::App* sc_collapse =
      app.add_subcommand("collapse", "full scenario report: conditions, limit, base");
  sc_collapse->add_option("--pairs", pairs, "sampled pairs for the base comparison");

  CLI::App* sc_pillow =
      app.add_subcommand("pillowcase", "structure checks for the pillowcase orbifold");

  int trials = 32;
  CLI::App* sc_oracles = app.add_subcommand("oracles", "randomized oracle self-tests");
  sc_oracles->add_option("--trials", trials, "trials per oracle");

  for (CLI::App* sub : {sc_quasi, sc_counter, sc_collapse, sc_pillow, sc_oracles})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(sc_quasi))
      return cmd_quasifinsler(g, lambda, base_n, fiber_n, samples);
    if (app.got_subcommand(sc_counter)) return cmd_counterexample(g, ce_n);
    if (app.got_subcommand(sc_collapse)) return cmd_collapse(g, pairs);
    if (app.got_subcommand(sc_pillow)) return cmd_pillowcase(g);
    if (app.got_subcommand(sc_oracles)) return cmd_oracles(g, trials);
    throw config_error("no subcommand selected");
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const check_error& e) {
    std::cerr << "check failed: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
