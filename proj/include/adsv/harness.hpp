/* harness.hpp
 *
 * Batch front door: JSON run configuration, orchestration of the five run
 * modes (cascade / initdata / geodesics / evolve / pipeline), artifact and
 * manifest output, and the exit-code contract:
 *
 *   0  success
 *   1  unexpected error
 *   2  configuration error
 *   3  solver breakdown
 *   4  trapped-event stop (a successful scientific outcome, flagged apart)
 */
#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "adsv/cascade.hpp"
#include "adsv/diagnostics.hpp"
#include "adsv/initial_data.hpp"
#include "adsv/vlasov.hpp"

namespace adsv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBreakdown = 3;
inline constexpr int kExitTrapped = 4;

inline constexpr const char* kVersion = "1.0.0";

struct RunConfig {
  std::string mode = "cascade";
  double lambda = -3.0;
  double eps = 0.1;
  std::string hierarchy_mode = "softened-hierarchy";
  LadderConfig ladder;
  std::optional<int> n_beams_override;

  std::vector<double> amplitudes;  // explicit; empty + fine_tuned=false => vacuum
  bool fine_tuned = false;

  double profile_C = 1.0;
  int profile_n_plus = 10;
  double profile_E_top = 0.0;

  int grid_K = 256;
  int grid_refine = 8;
  double fp_tol = 1e-10;
  int max_iters = 200;
  SamplingConfig sampling;

  double eta0 = 0.1;
  double noise_tol = 1e-6;
  double c0 = 0.1;
  double trapped_threshold = 1.0;
  double C1 = 10.0;

  int evolve_cycles = 3;
  std::optional<double> u_max;
  int snapshot_stride = 8;
  int field_iters = 2;
  bool repush = false;
  std::string trapped_policy = "stop";

  double geo_l_over_e = 0.01;
  int geo_periods = 1;
  double geo_kappa = 4.0;
  double geo_c_min = 0.5;
  std::optional<double> geo_launch_v;

  std::string out = "out";
  int threads = 1;
  std::uint64_t seed = 0;  // reserved; default sampling is deterministic
  double resolution_scale = 1.0;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  Cosmology cosmology() const;
  HierarchyParams hierarchy() const;
  int scaled_K() const;
};

struct RunResult {
  int exit_code = kExitOk;
  nlohmann::json manifest;
};

RunResult run(const RunConfig& cfg);

/// Fine-tuned amplitude resolution: calibrates the mu_i[0] = c_i rho a_i
/// constants against the constraint solver and iterates to the target.
struct ResolvedWeights {
  BeamWeights weights;
  std::optional<FineTuneResult> fine_tune;
  std::vector<double> calibration;  // c_i
  double mismatch = 0.0;            // final relative mu0 mismatch
};
ResolvedWeights resolve_weights(const RunConfig& cfg, const HierarchyParams& h);

int run_cli(int argc, char** argv);

}  // namespace adsv
