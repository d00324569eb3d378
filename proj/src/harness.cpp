#include "adsv/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace adsv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  os << s;
  if (!os) throw SolverError("cannot write " + p.string());
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  get("mode", c.mode);
  get("lambda", c.lambda);
  get("eps", c.eps);
  get("hierarchy_mode", c.hierarchy_mode);
  if (j.contains("ladder_config")) {
    const json& l = j.at("ladder_config");
    auto g = [&](const char* key, auto& dst) {
      if (l.contains(key) && !l.at(key).is_null())
        dst = l.at(key).get<std::decay_t<decltype(dst)>>();
    };
    g("sigma_pow", c.ladder.sigma_pow);
    g("delta_pow", c.ladder.delta_pow);
    g("rho_pow", c.ladder.rho_pow);
    g("eps_decay", c.ladder.eps_decay);
    g("n_beams", c.ladder.n_beams);
    g("h_factor", c.ladder.h_factor);
    g("htilde_factor", c.ladder.htilde_factor);
    g("beta_factor", c.ladder.beta_factor);
    g("beta_tilde_factor", c.ladder.beta_tilde_factor);
    g("exact_levels", c.ladder.exact_levels);
    if (l.contains("exact_sigma") && !l.at("exact_sigma").is_null())
      c.ladder.exact_sigma = l.at("exact_sigma").get<double>();
  }
  if (j.contains("n_beams_override") && !j.at("n_beams_override").is_null())
    c.n_beams_override = j.at("n_beams_override").get<int>();
  if (j.contains("amplitudes")) {
    if (j.at("amplitudes").is_string()) {
      if (j.at("amplitudes").get<std::string>() != "fine-tuned")
        throw ConfigError("amplitudes: expected an array or \"fine-tuned\"");
      c.fine_tuned = true;
    } else {
      c.amplitudes = j.at("amplitudes").get<std::vector<double>>();
    }
  }
  if (j.contains("target_profile")) {
    const json& p = j.at("target_profile");
    if (p.contains("C")) c.profile_C = p.at("C").get<double>();
    if (p.contains("n_plus")) c.profile_n_plus = p.at("n_plus").get<int>();
    if (p.contains("E_top_target")) c.profile_E_top = p.at("E_top_target").get<double>();
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (g.contains("K")) c.grid_K = g.at("K").get<int>();
    if (g.contains("refinement")) c.grid_refine = g.at("refinement").get<int>();
  }
  get("fp_tol", c.fp_tol);
  get("max_iters", c.max_iters);
  if (j.contains("sampling")) {
    const json& s = j.at("sampling");
    if (s.contains("nv")) c.sampling.nv = s.at("nv").get<int>();
    if (s.contains("np")) c.sampling.np = s.at("np").get<int>();
    if (s.contains("nl")) c.sampling.nl = s.at("nl").get<int>();
  }
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    auto g = [&](const char* key, double& dst) {
      if (t.contains(key)) dst = t.at(key).get<double>();
    };
    g("eta0", c.eta0);
    g("noise_tol", c.noise_tol);
    g("c0", c.c0);
    g("trapped_threshold", c.trapped_threshold);
    g("C1", c.C1);
  }
  if (j.contains("evolution")) {
    const json& e = j.at("evolution");
    if (e.contains("cycles")) c.evolve_cycles = e.at("cycles").get<int>();
    if (e.contains("u_max") && !e.at("u_max").is_null())
      c.u_max = e.at("u_max").get<double>();
    if (e.contains("snapshot_stride")) c.snapshot_stride = e.at("snapshot_stride").get<int>();
    if (e.contains("field_iters")) c.field_iters = e.at("field_iters").get<int>();
    if (e.contains("repush")) c.repush = e.at("repush").get<bool>();
    if (e.contains("trapped_policy")) c.trapped_policy = e.at("trapped_policy").get<std::string>();
  }
  if (j.contains("geodesics")) {
    const json& g = j.at("geodesics");
    if (g.contains("l_over_e")) c.geo_l_over_e = g.at("l_over_e").get<double>();
    if (g.contains("periods")) c.geo_periods = g.at("periods").get<int>();
    if (g.contains("kappa")) c.geo_kappa = g.at("kappa").get<double>();
    if (g.contains("c_min")) c.geo_c_min = g.at("c_min").get<double>();
    if (g.contains("launch_v") && !g.at("launch_v").is_null())
      c.geo_launch_v = g.at("launch_v").get<double>();
  }
  get("out", c.out);
  get("threads", c.threads);
  get("seed", c.seed);
  get("resolution_scale", c.resolution_scale);
  return c;
}

json RunConfig::to_json() const {
  json l{{"sigma_pow", ladder.sigma_pow},
         {"delta_pow", ladder.delta_pow},
         {"rho_pow", ladder.rho_pow},
         {"eps_decay", ladder.eps_decay},
         {"n_beams", ladder.n_beams},
         {"h_factor", ladder.h_factor},
         {"htilde_factor", ladder.htilde_factor},
         {"beta_factor", ladder.beta_factor},
         {"beta_tilde_factor", ladder.beta_tilde_factor},
         {"exact_levels", ladder.exact_levels}};
  if (ladder.exact_sigma)
    l["exact_sigma"] = *ladder.exact_sigma;
  else
    l["exact_sigma"] = nullptr;
  json j{{"mode", mode},
         {"lambda", lambda},
         {"eps", eps},
         {"hierarchy_mode", hierarchy_mode},
         {"ladder_config", l},
         {"grid", {{"K", grid_K}, {"refinement", grid_refine}}},
         {"fp_tol", fp_tol},
         {"max_iters", max_iters},
         {"sampling", {{"nv", sampling.nv}, {"np", sampling.np}, {"nl", sampling.nl}}},
         {"tolerances",
          {{"eta0", eta0},
           {"noise_tol", noise_tol},
           {"c0", c0},
           {"trapped_threshold", trapped_threshold},
           {"C1", C1}}},
         {"evolution",
          {{"cycles", evolve_cycles},
           {"snapshot_stride", snapshot_stride},
           {"field_iters", field_iters},
           {"repush", repush},
           {"trapped_policy", trapped_policy}}},
         {"geodesics",
          {{"l_over_e", geo_l_over_e},
           {"periods", geo_periods},
           {"kappa", geo_kappa},
           {"c_min", geo_c_min}}},
         {"target_profile",
          {{"C", profile_C}, {"n_plus", profile_n_plus}, {"E_top_target", profile_E_top}}},
         {"out", out},
         {"threads", threads},
         {"seed", seed},
         {"resolution_scale", resolution_scale}};
  if (n_beams_override)
    j["n_beams_override"] = *n_beams_override;
  else
    j["n_beams_override"] = nullptr;
  if (fine_tuned)
    j["amplitudes"] = "fine-tuned";
  else
    j["amplitudes"] = amplitudes;
  if (u_max)
    j["evolution"]["u_max"] = *u_max;
  else
    j["evolution"]["u_max"] = nullptr;
  if (geo_launch_v)
    j["geodesics"]["launch_v"] = *geo_launch_v;
  else
    j["geodesics"]["launch_v"] = nullptr;
  return j;
}

void RunConfig::validate() const {
  if (!(lambda < 0.0)) throw ConfigError("config: lambda must be negative");
  if (mode != "cascade" && mode != "initdata" && mode != "geodesics" &&
      mode != "evolve" && mode != "pipeline")
    throw ConfigError("config: unknown mode " + mode);
  if (hierarchy_mode != "softened-hierarchy" && hierarchy_mode != "exact-hierarchy")
    throw ConfigError("config: unknown hierarchy_mode " + hierarchy_mode);
  if ((mode == "evolve" || mode == "pipeline" || mode == "initdata") &&
      hierarchy_mode == "exact-hierarchy")
    throw ConfigError("config: the PDE stack runs only on the softened hierarchy");
  if (trapped_policy != "stop" && trapped_policy != "excise")
    throw ConfigError("config: trapped_policy must be stop or excise");
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("config: eps must lie in (0,1]");
  if (grid_K < 8) throw ConfigError("config: grid K too small");
  if (!(resolution_scale > 0.0)) throw ConfigError("config: resolution_scale must be > 0");
}

Cosmology RunConfig::cosmology() const {
  return Cosmology::make(lambda, hierarchy_mode == "exact-hierarchy"
                                     ? HierarchyMode::exact
                                     : HierarchyMode::softened);
}

int RunConfig::scaled_K() const {
  return std::max(8, static_cast<int>(std::lround(grid_K * resolution_scale)));
}

HierarchyParams RunConfig::hierarchy() const {
  LadderConfig l = ladder;
  if (n_beams_override) l.n_beams = *n_beams_override;
  return build_hierarchy(eps, cosmology().mode, l, cosmology());
}

namespace {

// mu_i[0], E_i[0], R_i[0] measured directly on the constraint-solved slice
MeasuredCascadeInit measure_on_initdata(const InitialDataSlice& s) {
  const HierarchyParams& h = s.hierarchy;
  int N = h.n_beams;
  MeasuredCascadeInit out;
  out.E0.resize(N + 1);
  out.R0.assign(N + 1, 0.0);
  out.mu0.resize(N);
  for (int i = 0; i <= N; ++i)
    out.E0[i] = s.interp(s.mtilde, h.centers[i] + h.width_h[i]) -
                s.interp(s.mtilde, h.centers[i] - h.width_h[i]);
  double off = std::pow(h.rho, -7.0 / 8.0) + 1.0;
  for (int i = 1; i <= N; ++i) {
    double lo = h.centers[i - 1] + off * h.width_h[i - 1];
    double hi = h.centers[i] - off * h.width_h[i - 1];
    if (lo < h.centers[i - 1] + h.width_h[i - 1] || hi > h.centers[i] - h.width_h[i] ||
        hi <= lo) {
      lo = h.centers[i - 1] + h.width_h[i - 1];
      hi = h.centers[i] - h.width_h[i];
    }
    // integrate Omega^2/(4 (-du_r)) over the gap on the composite grid
    double sum = 0.0;
    for (size_t j = 0; j + 1 < s.v.size(); ++j) {
      double va = s.v[j], vb = s.v[j + 1];
      if (vb <= lo || va >= hi) continue;
      double a = std::max(va, lo), b = std::min(vb, hi);
      auto f = [&](size_t jj) { return s.omega2[jj] / (4.0 * (-s.du_r[jj])); };
      sum += 0.5 * (f(j) + f(j + 1)) * (b - a);
    }
    out.R0[i] = sum;
  }
  for (int i = 0; i < N; ++i) out.mu0[i] = 2.0 * out.E0[i] / out.R0[i + 1];
  return out;
}

}  // namespace

ResolvedWeights resolve_weights(const RunConfig& cfg, const HierarchyParams& h) {
  ResolvedWeights out;
  int N = h.n_beams;
  if (!cfg.fine_tuned) {
    if (cfg.amplitudes.empty())
      out.weights.a.assign(N + 1, 0.0);  // vacuum
    else
      out.weights.a = cfg.amplitudes;
    out.weights.validate(h);
    return out;
  }
  TargetProfile profile =
      TargetProfile::make(cfg.profile_C, N, cfg.profile_n_plus, cfg.profile_E_top);
  FineTuneResult ft = fine_tune(profile, h, {}, cfg.C1);

  GaugeSolveOpts opts;
  opts.K = cfg.scaled_K();
  opts.refine = cfg.grid_refine;
  opts.fp_tol = cfg.fp_tol;
  opts.max_iters = cfg.max_iters;
  opts.c0 = cfg.c0;

  // target mu_i[0] (and top-beam energy); iterate a_i by measured ratio
  BeamWeights w;
  w.a.assign(N + 1, 0.0);
  for (int i = 0; i < N; ++i) w.a[i] = std::min(0.05 * h.sigma, ft.mu0[i] / h.rho);
  w.a[N] = std::min(0.05 * h.sigma, std::max(ft.E_top0, 1e-8));
  double mismatch = INFINITY;
  for (int it = 0; it < 4 && mismatch > 1e-3; ++it) {
    InitialDataSlice slice = solve_normalized_gauge(h, w, opts);
    MeasuredCascadeInit meas = measure_on_initdata(slice);
    mismatch = 0.0;
    for (int i = 0; i < N; ++i) {
      if (!(meas.mu0[i] > 0.0))
        throw SolverError("resolve_weights: measured mu0 vanished at beam " +
                          std::to_string(i));
      mismatch = std::max(mismatch, std::abs(meas.mu0[i] - ft.mu0[i]) / ft.mu0[i]);
      w.a[i] *= ft.mu0[i] / meas.mu0[i];
    }
    if (ft.E_top0 > 0.0) {
      mismatch = std::max(mismatch, std::abs(meas.E0[N] - ft.E_top0) /
                                        std::max(ft.E_top0, 1e-300));
      w.a[N] *= ft.E_top0 / std::max(meas.E0[N], 1e-300);
    }
  }
  out.calibration.assign(N + 1, 1.0);
  for (int i = 0; i < N; ++i) out.calibration[i] = ft.mu0[i] / (h.rho * w.a[i]);
  if (ft.E_top0 > 0.0 && ft.mu_top0 > 0.0)
    out.calibration[N] = ft.mu_top0 / (h.rho * w.a[N]);
  out.fine_tune = fine_tune(profile, h, out.calibration, cfg.C1);
  out.weights = w;
  out.weights.validate(h);
  out.mismatch = mismatch;
  return out;
}

namespace {

json monitor_json(const EvolutionMonitor& m) {
  json br = json::array();
  size_t cap = std::min<size_t>(m.breaches.size(), 64);
  for (size_t i = 0; i < cap; ++i)
    br.push_back({{"kind", m.breaches[i].kind},
                  {"u", m.breaches[i].u},
                  {"value", m.breaches[i].value},
                  {"threshold", m.breaches[i].threshold}});
  return json{{"max_mass_ratio", m.max_mass_ratio},
              {"max_flux_norm", m.max_flux_norm},
              {"boundary_mass_ref", m.boundary_mass_ref},
              {"boundary_mass_drift", m.boundary_mass_drift},
              {"boundary_rho_drift", m.boundary_rho_drift},
              {"u_constraint_residual", m.u_constraint_residual},
              {"mass_monotonicity_dip", m.mass_monotonicity_dip},
              {"breach_count", m.breaches.size()},
              {"breaches", br}};
}

std::string slice_csv(const InitialDataSlice& s) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "v,r,omega2,dv_r,du_r,mtilde\n";
  for (size_t j = 0; j < s.v.size(); ++j)
    os << s.v[j] << "," << s.r[j] << "," << s.omega2[j] << "," << s.dv_r[j] << ","
       << s.du_r[j] << "," << s.mtilde[j] << "\n";
  return os.str();
}

std::string snapshots_csv(const SliceHistory& hist, int stride) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "u,v,r,omega2,mtilde,Tuu,Tuv,Tvv,mass_ratio\n";
  for (size_t i = 0; i < hist.slices.size(); i += stride) {
    const FieldSlice& s = hist.slices[i];
    for (int j = 0; j <= s.K(); ++j)
      os << s.u << "," << s.v_of(j) << "," << s.r(j) << "," << s.omega2(j) << ","
         << s.mtilde[j] << "," << s.T_uu(j) << "," << s.T_uv(j) << "," << s.T_vv(j)
         << "," << s.mass_ratio(j) << "\n";
  }
  return os.str();
}

std::string cascade_csv(const CascadeState& st) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "n,i,mu,energy,sep\n";
  for (int n = 0; n <= st.n_max; ++n)
    for (int i = 0; i <= st.n_beams; ++i) {
      os << n << "," << i << "," << st.mu_at(n, i) << "," << st.energy[n][i] << ",";
      if (i >= 1)
        os << st.sep[n][i];
      else
        os << "";
      os << "\n";
    }
  return os.str();
}

std::string trajectory_csv(const Trajectory& tr, double k) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "s,u,v,pu,pv,r,energy,generation\n";
  for (const TrajPoint& p : tr.pts) {
    double omega2 = 1.0 + k * k * p.r * p.r;  // exact AdS chart
    os << p.s << "," << p.u << "," << p.v << "," << p.omega2_pu / omega2 << ","
       << p.omega2_pv / omega2 << "," << p.r << "," << p.energy << "," << p.generation
       << "\n";
  }
  return os.str();
}

json ledger_json(const IntersectionLedger& led) {
  json arr = json::array();
  for (const auto& [key, e] : led.entries) {
    arr.push_back({{"n", e.n},
                   {"i", e.i},
                   {"j", e.j},
                   {"rect", {e.u_lo, e.u_hi, e.v_lo, e.v_hi}},
                   {"E_in_before", e.energy.in_before},
                   {"E_in_after", e.energy.in_after},
                   {"E_out_before", e.energy.out_before},
                   {"E_out_after", e.energy.out_after},
                   {"sep_in_before", e.sep.in_before},
                   {"sep_in_after", e.sep.in_after},
                   {"sep_out_before", e.sep.out_before},
                   {"sep_out_after", e.sep.out_after},
                   {"sep_clamped", e.sep.clamped},
                   {"sep_singular", e.sep.singular},
                   {"r_cross", e.r_cross}});
  }
  return arr;
}

struct ModeContext {
  const RunConfig& cfg;
  fs::path outdir;
  json& manifest;
};

EvolutionConfig evolution_config(const RunConfig& cfg) {
  EvolutionConfig ec;
  ec.K = cfg.scaled_K();
  ec.field_iters = cfg.field_iters;
  ec.repush = cfg.repush;
  ec.threads = cfg.threads;
  ec.trapped_policy =
      cfg.trapped_policy == "excise" ? TrappedPolicy::excise : TrappedPolicy::stop;
  ec.eta0 = cfg.eta0;
  ec.noise_tol = cfg.noise_tol;
  return ec;
}

GaugeSolveOpts gauge_opts(const RunConfig& cfg) {
  GaugeSolveOpts opts;
  opts.K = cfg.scaled_K();
  opts.refine = cfg.grid_refine;
  opts.fp_tol = cfg.fp_tol;
  opts.max_iters = cfg.max_iters;
  opts.c0 = cfg.c0;
  return opts;
}

int mode_cascade(ModeContext ctx) {
  const RunConfig& cfg = ctx.cfg;
  HierarchyParams h = cfg.hierarchy();
  int N = (cfg.hierarchy_mode == "exact-hierarchy")
              ? (cfg.n_beams_override ? *cfg.n_beams_override : cfg.ladder.n_beams)
              : h.n_beams;
  TargetProfile profile =
      TargetProfile::make(cfg.profile_C, N, cfg.profile_n_plus, cfg.profile_E_top);
  FineTuneResult ft = fine_tune(profile, h, {}, cfg.C1);

  // synthetic initial separations: vacuum gap integrals from the ladder
  std::vector<double> R0(N + 1, 0.0), E0(N + 1, 0.0);
  if (h.mode == HierarchyMode::softened) {
    for (int i = 1; i <= N; ++i)
      R0[i] = 0.5 * ((h.centers[i] - h.width_h[i]) -
                     (h.centers[i - 1] + h.width_h[i - 1]));
  } else {
    for (int i = 1; i <= N; ++i) R0[i] = 1.0;  // scale-free bookkeeping
  }
  for (int i = 0; i < N; ++i) E0[i] = 0.5 * ft.mu0[i] * R0[i + 1];
  E0[N] = ft.E_top0 > 0.0 ? ft.E_top0 : 0.5 * ft.mu0[N - 1] * R0[N];
  double coeff = 0.0;
  if (h.mode == HierarchyMode::softened)
    coeff = 2.0 * h.rho * h.cosmo.sqrt_neg_lambda() / h.eps_i[N];
  CascadeState st = cascade_forward(ft.mu0, E0, R0, profile.n_plus, coeff);
  FinalStepResult fin = final_step(st, profile, h, cfg.trapped_threshold);

  write_text(ctx.outdir / "cascade.csv", cascade_csv(st));
  json ftj{{"mu0", ft.mu0},
           {"mu_top0", ft.mu_top0},
           {"E_top0", ft.E_top0},
           {"weights", ft.weights.a},
           {"calibrated", ft.calibrated},
           {"weights_feasible", ft.weights_feasible},
           {"mu0_sum", ft.mu0_sum},
           {"mu0_sum_bound", ft.mu0_sum_bound}};
  write_text(ctx.outdir / "finetune_report.json", ftj.dump(2));
  double rt = 0.0;
  for (int j = 0; j < N; ++j) {
    double rel = std::abs(st.mu[profile.n_plus][j] - profile.mu_target[j]) /
                 profile.mu_target[j];
    rt = std::max(rt, rel);
  }
  ctx.manifest["cascade"] = {{"roundtrip_max_rel", rt},
                             {"flat_value", fin.flat_value},
                             {"flat_max_rel_dev", fin.flat_max_rel_dev},
                             {"amplification", fin.amplification},
                             {"trapped_estimate", fin.trapped_estimate},
                             {"trapped", fin.trapped},
                             {"quotient_residual", st.quotient_residual()}};
  if (h.mode == HierarchyMode::exact && h.exact.from_sigma) {
    ExactVerdict v = exact_trapped_verdict(h);
    ctx.manifest["exact_verdict"] = {{"trapped", v.trapped}, {"rendering", v.rendering}};
  }
  return kExitOk;
}

int mode_initdata(ModeContext ctx) {
  const RunConfig& cfg = ctx.cfg;
  HierarchyParams h = cfg.hierarchy();
  ResolvedWeights rw = resolve_weights(cfg, h);
  InitialDataSlice slice = solve_normalized_gauge(h, rw.weights, gauge_opts(cfg));
  write_text(ctx.outdir / "slice.csv", slice_csv(slice));
  DataNormOpts nopts;
  nopts.sampling = cfg.sampling;
  double norm = data_norm(slice, nopts);
  ctx.manifest["initdata"] = {{"a_gauge", slice.a_gauge},
                              {"MF", slice.MF},
                              {"MF_small", slice.MF_small},
                              {"fp_iters", slice.fp_iters},
                              {"fp_residual", slice.fp_residual},
                              {"mass_at_infinity", slice.mass_at_infinity()},
                              {"data_norm", norm},
                              {"amplitudes", rw.weights.a},
                              {"finetune_mismatch", rw.mismatch}};
  return kExitOk;
}

int mode_geodesics(ModeContext ctx) {
  const RunConfig& cfg = ctx.cfg;
  Cosmology cosmo = cfg.cosmology();
  AdsBackground ads(cosmo);
  double vI = cosmo.v_infinity;
  double v0 = cfg.geo_launch_v ? *cfg.geo_launch_v : 0.5 * vI;
  double E0 = 1.0;
  double l = cfg.geo_l_over_e * E0;

  // ingoing launch at (0, v0): A + B = 2 E0 with A B = Omega^2 l^2 / r^2
  BackgroundPoint bp = ads.eval(0.0, v0);
  double prod = bp.omega2 * l * l / (bp.r * bp.r);
  double A = E0 + std::sqrt(std::max(E0 * E0 - prod, 0.0));
  double B = prod / A;
  Particle p;
  p.u = 0.0;
  p.v = v0;
  p.omega2_pu = A;
  p.omega2_pv = B;
  p.l = l;
  p.weight = 1.0;

  Particle p0 = p;
  Trajectory traj;
  traj.stride = 1;
  AdvanceDiag diag;
  StepControl ctl;
  AdvanceTarget tgt{TargetKind::tau_equals, p.u + p.v + cfg.geo_periods * 4.0 * vI};
  advance(p, ads, tgt, ctl, &traj, &diag);
  write_text(ctx.outdir / "trajectory.csv", trajectory_csv(traj, cosmo.k()));

  // reversibility: integrate back to the launch advanced time
  Particle pr = p;
  AdvanceTarget back{TargetKind::tau_equals, p0.u + p0.v};
  advance(pr, ads, back, ctl, nullptr, nullptr, -1);
  double rev = std::abs(pr.u - p0.u) + std::abs(pr.v - p0.v) +
               std::abs(pr.omega2_pu - p0.omega2_pu) / p0.energy() +
               std::abs(pr.omega2_pv - p0.omega2_pv) / p0.energy();

  CorridorParams cp;
  cp.c_min = cfg.geo_c_min;
  cp.kappa = cfg.geo_kappa;
  CorridorReport rep = corridor_check(traj, l, v0, cp, vI);
  ctx.manifest["geodesics"] = {{"l_over_E0", cfg.geo_l_over_e},
                               {"min_r", rep.min_r},
                               {"min_r_bound", rep.min_r_bound},
                               {"corridor_ok", rep.corridor_ok},
                               {"min_r_ok", rep.min_r_ok},
                               {"energy_ok", rep.energy_ok},
                               {"hypothesis_ok", rep.hypothesis_ok},
                               {"max_shell_residual", diag.max_shell_residual},
                               {"reversibility", rev},
                               {"reflections", static_cast<int>(traj.events.size())},
                               {"violations", rep.violations}};
  return kExitOk;
}

int finalize_evolution(ModeContext& ctx, Evolution& evo, StepOutcome outcome) {
  const RunConfig& cfg = ctx.cfg;
  write_text(ctx.outdir / "snapshots.csv",
             snapshots_csv(evo.history(), cfg.snapshot_stride));
  json tr = json::array();
  for (const TrappedEvent& e : evo.trapped_events()) tr.push_back({{"u", e.u}, {"v", e.v}});
  ConservationReport cons = audit_vlasov_conservation(evo.history());
  ctx.manifest["evolution"] = {
      {"final_u", evo.slice().u},
      {"outcome", outcome == StepOutcome::ok
                      ? "completed"
                      : (outcome == StepOutcome::trapped ? "trapped" : "breakdown")},
      {"trapped_events", tr},
      {"monitor", monitor_json(evo.monitor())},
      {"sampling_mass_error", evo.sampling_mass_error()},
      {"total_weight", evo.total_weight()},
      {"conservation", {{"max_resid", cons.max_resid},
                        {"l1_resid", cons.l1_resid},
                        {"cells", cons.cells}}}};
  if (outcome == StepOutcome::trapped) return kExitTrapped;
  if (outcome == StepOutcome::breakdown) return kExitBreakdown;
  return kExitOk;
}

int mode_evolve(ModeContext ctx) {
  const RunConfig& cfg = ctx.cfg;
  HierarchyParams h = cfg.hierarchy();
  ResolvedWeights rw = resolve_weights(cfg, h);
  InitialDataSlice slice = solve_normalized_gauge(h, rw.weights, gauge_opts(cfg));
  Evolution evo(slice, cfg.sampling, evolution_config(cfg));
  double umax = cfg.u_max ? *cfg.u_max : cfg.evolve_cycles * h.cosmo.v_infinity;
  StepOutcome outcome = evo.run_until(umax);

  // vacuum runs report the AdS-preservation errors directly
  bool vacuum = true;
  for (double a : rw.weights.a) vacuum = vacuum && a == 0.0;
  if (vacuum) {
    double max_mt = 0.0, max_dr = 0.0;
    for (const FieldSlice& s : evo.history().slices)
      for (int j = 0; j <= s.K(); ++j) {
        max_mt = std::max(max_mt, std::abs(s.mtilde[j]));
        if (j > 0 && j < s.K()) {
          double rex = ads_reference(s.u, s.v_of(j), cfg.lambda).r;
          max_dr = std::max(max_dr, std::abs(s.r(j) - rex) / rex);
        }
      }
    ctx.manifest["vacuum"] = {{"max_abs_mtilde", max_mt}, {"max_rel_r_error", max_dr}};
  }
  ctx.manifest["initdata"] = {{"a_gauge", slice.a_gauge},
                              {"mass_at_infinity", slice.mass_at_infinity()},
                              {"amplitudes", rw.weights.a}};
  return finalize_evolution(ctx, evo, outcome);
}

int mode_pipeline(ModeContext ctx) {
  const RunConfig& cfg = ctx.cfg;
  HierarchyParams h = cfg.hierarchy();
  ResolvedWeights rw = resolve_weights(cfg, h);
  InitialDataSlice slice = solve_normalized_gauge(h, rw.weights, gauge_opts(cfg));
  Evolution evo(slice, cfg.sampling, evolution_config(cfg));
  int cycles = cfg.evolve_cycles;
  double umax =
      cfg.u_max ? *cfg.u_max : h.centers[0] + cycles * h.cosmo.v_infinity;
  StepOutcome outcome = evo.run_until(umax);

  write_text(ctx.outdir / "slice.csv", slice_csv(slice));
  bool vacuum = true;
  for (double a : rw.weights.a) vacuum = vacuum && a == 0.0;

  if (!vacuum && evo.history().covers(h.centers[0] - h.width_h[0])) {
    MeasuredCascadeInit init = measure_initial_cascade(evo.history(), h);
    bool positive = true;
    for (double e : init.E0) positive = positive && e > 0.0;
    if (positive) {
      double coeff = 2.0 * h.rho * h.cosmo.sqrt_neg_lambda() / h.eps_i[h.n_beams];
      CascadeState model =
          cascade_forward(init.mu0, init.E0, init.R0, cycles, coeff);
      std::optional<double> breach_u;
      for (const auto& b : evo.monitor().breaches)
        if (b.kind == "eta0") {
          breach_u = b.u;
          break;
        }
      DiscrepancyReport disc =
          compare_with_cascade(evo.history(), h, model, cycles, breach_u);
      write_text(ctx.outdir / "discrepancy.csv", disc.csv());
      write_text(ctx.outdir / "cascade.csv", cascade_csv(model));
      IntersectionLedger led = build_ledger(evo.history(), h, cycles);
      write_text(ctx.outdir / "ledger.json", ledger_json(led).dump(2));
      ctx.manifest["pipeline"] = {{"max_discrepancy", disc.max_rel},
                                  {"mean_discrepancy", disc.mean_rel},
                                  {"rows", disc.rows.size()}};
    }
  }
  if (vacuum) {
    double max_mt = 0.0;
    for (const FieldSlice& s : evo.history().slices)
      for (int j = 0; j <= s.K(); ++j) max_mt = std::max(max_mt, std::abs(s.mtilde[j]));
    ctx.manifest["pipeline"] = {{"vacuum_max_abs_mtilde", max_mt}};
  }

  // per-cycle concentration curve: max of 2 mt / r per reflection cycle
  {
    std::vector<double> curve;
    double vI = h.cosmo.v_infinity;
    for (int n = 0; n < cycles; ++n) {
      double ulo = n == 0 ? 0.0 : h.centers[0] + (n - 1) * vI - h.width_h[0];
      double uhi = h.centers[0] + n * vI - h.width_h[0];
      double mx = 0.0;
      for (const FieldSlice& s : evo.history().slices) {
        if (s.u < ulo || s.u > uhi) continue;
        for (int j = 1; j <= s.K(); ++j) {
          double rr = s.r(j);
          if (rr > 0.0) mx = std::max(mx, 2.0 * s.mtilde[j] / rr);
        }
      }
      curve.push_back(mx);
    }
    ctx.manifest["pipeline"]["mass_ratio_curve"] = curve;
  }

  if (rw.fine_tune) {
    TargetProfile profile = TargetProfile::make(cfg.profile_C, h.n_beams,
                                                cfg.profile_n_plus, cfg.profile_E_top);
    const FineTuneResult& ft = *rw.fine_tune;
    std::vector<double> R0(h.n_beams + 1, 0.0), E0(h.n_beams + 1, 0.0);
    for (int i = 1; i <= h.n_beams; ++i)
      R0[i] = 0.5 * ((h.centers[i] - h.width_h[i]) -
                     (h.centers[i - 1] + h.width_h[i - 1]));
    for (int i = 0; i < h.n_beams; ++i) E0[i] = 0.5 * ft.mu0[i] * R0[i + 1];
    E0[h.n_beams] = ft.E_top0 > 0.0 ? ft.E_top0 : E0[h.n_beams - 1];
    CascadeState target_model = cascade_forward(ft.mu0, E0, R0, profile.n_plus);
    FinalStepResult fin = final_step(target_model, profile, h, cfg.trapped_threshold);
    ctx.manifest["pipeline"]["final_step"] = {
        {"flat_value", fin.flat_value},
        {"flat_max_rel_dev", fin.flat_max_rel_dev},
        {"amplification", fin.amplification},
        {"trapped_estimate", fin.trapped_estimate},
        {"trapped", fin.trapped}};
    ctx.manifest["pipeline"]["finetune_mismatch"] = rw.mismatch;
  }
  return finalize_evolution(ctx, evo, outcome);
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  RunResult res;
  auto t0 = std::chrono::steady_clock::now();
  fs::path outdir(cfg.out);
  res.manifest["config"] = cfg.to_json();
  res.manifest["version"] = kVersion;
  auto finish = [&](int code) {
    auto t1 = std::chrono::steady_clock::now();
    res.manifest["wall_time_s"] =
        std::chrono::duration<double>(t1 - t0).count();
    res.manifest["exit_code"] = code;
    fs::create_directories(outdir);
    write_text(outdir / "manifest.json", res.manifest.dump(2));
    res.exit_code = code;
    return res;
  };
  try {
    cfg.validate();
    fs::create_directories(outdir);
    ModeContext ctx{cfg, outdir, res.manifest};
    int code;
    if (cfg.mode == "cascade")
      code = mode_cascade(ctx);
    else if (cfg.mode == "initdata")
      code = mode_initdata(ctx);
    else if (cfg.mode == "geodesics")
      code = mode_geodesics(ctx);
    else if (cfg.mode == "evolve")
      code = mode_evolve(ctx);
    else
      code = mode_pipeline(ctx);
    return finish(code);
  } catch (const ConfigError& e) {
    res.manifest["error"] = std::string("config error: ") + e.what();
    return finish(kExitConfig);
  } catch (const SolverError& e) {
    res.manifest["error"] = std::string("solver error: ") + e.what();
    return finish(kExitBreakdown);
  } catch (const std::exception& e) {
    res.manifest["error"] = e.what();
    return finish(kExitError);
  }
}

}  // namespace adsv
