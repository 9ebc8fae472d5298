#pragma once

#include "seird/common.hpp"
#include "seird/estimation.hpp"
#include "seird/io.hpp"
#include "seird/kernel.hpp"
#include "seird/params.hpp"
#include "seird/policy.hpp"
#include "seird/rng.hpp"
#include "seird/sensitivity.hpp"

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace seird {

/// Algorithm tunables, each reachable from the CLI via `--set key=value`.
struct AlgoOptions {
    int k_iters = 5;            ///< calibration iterations (K)
    int n_runs = 20;            ///< replicates behind each loss evaluation
    int policy_replicates = 50; ///< J, rollouts per policy candidate
    int band_outer = 100;       ///< O, perturbed parameter sets
    int band_inner = 20;        ///< I, trajectories per parameter set
    double noise_scale = 1.0;   ///< multiplier on the log-odds noise
    double latent_fraction = 0.5;
    ParameterGrid grid;
    PolicyGrid policy_grid;
};

namespace detail {

inline double override_double(const std::string& key, const std::string& value) {
    return parse_double(value, "override " + key);
}

inline std::int64_t override_int(const std::string& key, const std::string& value) {
    return parse_count(value, "override " + key);
}

inline std::vector<double> override_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ':')) out.push_back(parse_double(item, "override " + key));
    if (out.empty()) throw ValidationError("override " + key + " must list at least one value");
    return out;
}

} // namespace detail

/// Applies `--set` overrides to the region config and algorithm options.
/// Lists use ':' separators (e.g. grid_factors=0.5:1:2). Unknown keys are
/// rejected.
inline void apply_overrides(const std::map<std::string, std::string>& overrides, RegionConfig& cfg,
                            AlgoOptions& algo) {
    using detail::override_double;
    using detail::override_int;
    using detail::override_list;
    for (const auto& [key, value] : overrides) {
        if (key == "population") cfg.population = override_int(key, value);
        else if (key == "cap") cfg.cap = override_int(key, value);
        else if (key == "c_e") cfg.economic_day_cost = override_int(key, value);
        else if (key == "c_l") cfg.life_cost = override_int(key, value);
        else if (key == "rho") cfg.rho = override_double(key, value);
        else if (key == "p_s") cfg.p_severe = override_double(key, value);
        else if (key == "phi") cfg.inflation = override_double(key, value);
        else if (key == "r0_base") cfg.r0_base = override_double(key, value);
        else if (key == "r1") cfg.r1 = override_double(key, value);
        else if (key == "r2") cfg.r2 = override_double(key, value);
        else if (key == "death_multiplier") cfg.death_multiplier = override_double(key, value);
        else if (key == "training_action") cfg.training_action = static_cast<int>(override_int(key, value));
        else if (key == "train_days") cfg.train_days = static_cast<int>(override_int(key, value));
        else if (key == "horizon_days") cfg.horizon_days = static_cast<int>(override_int(key, value));
        else if (key == "start_date") cfg.start_date = value;
        else if (key == "k_iters") algo.k_iters = static_cast<int>(override_int(key, value));
        else if (key == "n_runs") algo.n_runs = static_cast<int>(override_int(key, value));
        else if (key == "J") algo.policy_replicates = static_cast<int>(override_int(key, value));
        else if (key == "O") algo.band_outer = static_cast<int>(override_int(key, value));
        else if (key == "I") algo.band_inner = static_cast<int>(override_int(key, value));
        else if (key == "noise_scale") algo.noise_scale = override_double(key, value);
        else if (key == "latent_fraction") algo.latent_fraction = override_double(key, value);
        else if (key == "grid_factors") algo.grid.factors = override_list(key, value);
        else if (key == "grid_cartesian") algo.grid.cartesian = override_int(key, value) != 0;
        else if (key == "policy_levels") algo.policy_grid.set_levels(override_list(key, value));
        else if (key == "policy_l") algo.policy_grid.l_values = override_list(key, value);
        else if (key == "policy_u1") algo.policy_grid.u1_values = override_list(key, value);
        else if (key == "policy_u2") algo.policy_grid.u2_values = override_list(key, value);
        else if (key == "policy_thetas") algo.policy_grid.thetas = override_list(key, value);
        else throw ValidationError("unknown override key '" + key + "'");
    }
    check_region(cfg);
}

inline ModelParams make_params(const RegionConfig& cfg, const TransitionProbs& probs) {
    return ModelParams(probs, cfg.r0_base, cfg.r1, cfg.r2, cfg.death_multiplier, cfg.cap);
}

inline CostConfig make_cost(const RegionConfig& cfg) {
    CostConfig cost{cfg.economic_day_cost, cfg.life_cost, cfg.rho, cfg.cap};
    check_cost(cost);
    return cost;
}

inline InitializationSpec make_init_spec(const RegionConfig& cfg, count_t initial_active,
                                         count_t initial_deaths, count_t initial_recoveries,
                                         double latent_fraction) {
    return InitializationSpec{cfg.p_severe, cfg.inflation, latent_fraction,
                              initial_active,  initial_deaths, initial_recoveries};
}

/// Keeps the first train_days rows; errors when fewer are available.
inline RealDataSeries clip_to_training(const RealDataSeries& data, int train_days) {
    if (data.size() < train_days)
        throw ValidationError("need " + std::to_string(train_days) + " days of data, got " +
                              std::to_string(data.size()));
    RealDataSeries out;
    out.days.assign(data.days.begin(), data.days.begin() + train_days);
    return out;
}

/// Simulates the coupled processes over the training period (days 1..T)
/// under the training action. Returns all daily states, path[t-1] = day t.
inline std::vector<CoupledState> simulate_training(const ModelParams& params,
                                                   const InitializationSpec& spec,
                                                   count_t population, const TestingSchedule& schedule,
                                                   Action training_action, int train_days,
                                                   RngStream rng) {
    auto [pop, obs] = initialize_states(spec, population);
    std::vector<CoupledState> path{CoupledState{pop, obs}};
    path.reserve(static_cast<std::size_t>(train_days));
    for (int t = 2; t <= train_days; ++t)
        path.push_back(step_coupled(path.back(), params, training_action, schedule.mild_at(t),
                                    schedule.severe_at(t), rng));
    return path;
}

// Stream branches per pipeline stage. The training rollforward branch is
// shared by optimize and band so both start from the same day-T state.
inline constexpr std::uint64_t stream_fit = 1;
inline constexpr std::uint64_t stream_optimize = 2;
inline constexpr std::uint64_t stream_band = 3;
inline constexpr std::uint64_t stream_training = 4;

struct CommandIo {
    std::string config_path;
    std::string data_path;
    std::string fit_dir;     ///< directory holding fit.csv + testing_probs.csv
    std::string policy_path; ///< policy.csv
    std::string out_dir;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> overrides;
};

namespace detail {

inline std::string join_path(const std::string& dir, const char* file) {
    return (std::filesystem::path(dir) / file).string();
}

inline void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

inline void write_command_manifest(const CommandIo& io, const std::string& command) {
    RunManifest manifest;
    manifest.command = command;
    manifest.config_path = io.config_path;
    manifest.data_path = io.data_path;
    manifest.fit_path = io.fit_dir;
    manifest.policy_path = io.policy_path;
    manifest.out_dir = io.out_dir;
    manifest.seed = io.seed;
    manifest.overrides = io.overrides;
    write_manifest(join_path(io.out_dir, "manifest.json"), manifest);
}

inline TrajectoryRecord to_record(const CoupledState& st, Action action,
                                  const std::string& start_date) {
    TrajectoryRecord rec;
    rec.day = st.pop.day;
    rec.date = date_add(start_date, st.pop.day - 1);
    rec.action = action_level(action);
    rec.s = static_cast<double>(st.pop.s);
    rec.l = static_cast<double>(st.pop.l);
    rec.i_m = static_cast<double>(st.pop.i_m);
    rec.i_s = static_cast<double>(st.pop.i_s);
    rec.r = static_cast<double>(st.pop.r);
    rec.d = static_cast<double>(st.pop.d);
    rec.i_m_o = static_cast<double>(st.obs.i_m_o);
    rec.i_s_o = static_cast<double>(st.obs.i_s_o);
    rec.r_o = static_cast<double>(st.obs.r_o);
    rec.d_o = static_cast<double>(st.obs.d_o);
    return rec;
}

inline TrajectoryRecord to_record(const MeanTrajectoryPoint& m, const std::string& start_date) {
    TrajectoryRecord rec;
    rec.day = m.day;
    rec.date = date_add(start_date, m.day - 1);
    rec.action = action_level(m.action);
    rec.s = m.s;
    rec.l = m.l;
    rec.i_m = m.i_m;
    rec.i_s = m.i_s;
    rec.r = m.r;
    rec.d = m.d;
    rec.i_m_o = m.i_m_o;
    rec.i_s_o = m.i_s_o;
    rec.r_o = m.r_o;
    rec.d_o = m.d_o;
    return rec;
}

} // namespace detail

/// Calibrates the model to the training window and writes fit.csv,
/// testing_probs.csv and the run manifest.
inline FitResult run_fit(const CommandIo& io) {
    RegionConfig cfg = load_region_config(io.config_path);
    AlgoOptions algo;
    apply_overrides(io.overrides, cfg, algo);
    const RealDataSeries data = clip_to_training(load_case_csv(io.data_path), cfg.train_days);
    if (data.day(1).date != cfg.start_date)
        throw ValidationError("data starts on " + data.day(1).date + " but the config expects " +
                              cfg.start_date + " (override start_date to relabel)");

    const InitializationSpec spec =
        make_init_spec(cfg, data.day(1).active_cases, data.day(1).cumulative_deaths,
                       data.day(1).cumulative_recoveries.value_or(0), algo.latent_fraction);
    const ModelParams init_params = make_params(cfg, default_initial_probs());
    const Action training_action = action_from_level(cfg.training_action);

    const FitResult result =
        fit(data, spec, cfg.population, init_params, algo.grid, training_action, algo.k_iters,
            algo.n_runs, RngStream(io.seed).sub(stream_fit));

    detail::ensure_out_dir(io.out_dir);
    write_fit(detail::join_path(io.out_dir, "fit.csv"), result, spec);
    write_testing_probs(detail::join_path(io.out_dir, "testing_probs.csv"), result.schedule);
    detail::write_command_manifest(io, "fit");
    return result;
}

struct OptimizeOutputs {
    OptimalPolicy policy;
    std::vector<TrajectoryRecord> trajectories;
};

/// Searches the policy grid from the end-of-training state and writes
/// policy.csv, trajectories.csv (training path + test-period means) and the
/// manifest.
inline OptimizeOutputs run_optimize(const CommandIo& io) {
    RegionConfig cfg = load_region_config(io.config_path);
    AlgoOptions algo;
    apply_overrides(io.overrides, cfg, algo);
    const FitFile fitted = read_fit(detail::join_path(io.fit_dir, "fit.csv"));
    const TestingSchedule schedule =
        read_testing_probs(detail::join_path(io.fit_dir, "testing_probs.csv"));
    if (schedule.last_day() != cfg.train_days)
        throw ValidationError("testing schedule covers day " + std::to_string(schedule.last_day()) +
                              " but train_days is " + std::to_string(cfg.train_days));

    const ModelParams params = make_params(cfg, fitted.probs);
    const CostConfig cost = make_cost(cfg);
    const InitializationSpec spec =
        make_init_spec(cfg, fitted.initial_active, fitted.initial_deaths, fitted.initial_recoveries,
                       algo.latent_fraction);
    const Action training_action = action_from_level(cfg.training_action);
    const TestingSchedule extended = extrapolate_testing_probs(schedule, cfg.horizon_days);

    const RngStream base(io.seed);
    const std::vector<CoupledState> training =
        simulate_training(params, spec, cfg.population, schedule, training_action, cfg.train_days,
                          base.sub(stream_training));

    const RngStream policy_base = base.sub(stream_optimize);
    const OptimalPolicy best =
        optimize_policy(algo.policy_grid, params, cost, training.back(), training_action, extended,
                        cfg.horizon_days, algo.policy_replicates, policy_base);
    const std::vector<MeanTrajectoryPoint> mean =
        simulate_policy_mean(best.thresholds, params, cost, training.back(), training_action,
                             extended, cfg.horizon_days, algo.policy_replicates, policy_base);

    std::vector<TrajectoryRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.horizon_days));
    for (std::size_t i = 0; i + 1 < training.size(); ++i)
        records.push_back(detail::to_record(training[i], training_action, cfg.start_date));
    for (const auto& m : mean) records.push_back(detail::to_record(m, cfg.start_date));

    detail::ensure_out_dir(io.out_dir);
    write_policy(detail::join_path(io.out_dir, "policy.csv"), best);
    write_trajectories(detail::join_path(io.out_dir, "trajectories.csv"), records);
    detail::write_command_manifest(io, "optimize");
    return OptimizeOutputs{best, std::move(records)};
}

/// Draws the perturbation band around the forecast under a fixed policy and
/// writes band_infected.csv, band_deaths.csv, band_severe.csv plus the
/// manifest.
inline BandResult run_band(const CommandIo& io) {
    RegionConfig cfg = load_region_config(io.config_path);
    AlgoOptions algo;
    apply_overrides(io.overrides, cfg, algo);
    const FitFile fitted = read_fit(detail::join_path(io.fit_dir, "fit.csv"));
    const TestingSchedule schedule =
        read_testing_probs(detail::join_path(io.fit_dir, "testing_probs.csv"));
    if (schedule.last_day() != cfg.train_days)
        throw ValidationError("testing schedule covers day " + std::to_string(schedule.last_day()) +
                              " but train_days is " + std::to_string(cfg.train_days));
    const OptimalPolicy policy = read_policy(io.policy_path);

    const ModelParams params = make_params(cfg, fitted.probs);
    const InitializationSpec spec =
        make_init_spec(cfg, fitted.initial_active, fitted.initial_deaths, fitted.initial_recoveries,
                       algo.latent_fraction);
    const Action training_action = action_from_level(cfg.training_action);
    const TestingSchedule extended = extrapolate_testing_probs(schedule, cfg.horizon_days);

    const RngStream base(io.seed);
    const std::vector<CoupledState> training =
        simulate_training(params, spec, cfg.population, schedule, training_action, cfg.train_days,
                          base.sub(stream_training));

    const BandResult band =
        sensitivity_band(params, training.back(), policy.thresholds, training_action, extended,
                         algo.band_outer, algo.band_inner, cfg.horizon_days, base.sub(stream_band),
                         algo.noise_scale);

    detail::ensure_out_dir(io.out_dir);
    write_band(detail::join_path(io.out_dir, "band_infected.csv"), band.first_day, cfg.start_date,
               band.infected);
    write_band(detail::join_path(io.out_dir, "band_deaths.csv"), band.first_day, cfg.start_date,
               band.deaths);
    write_band(detail::join_path(io.out_dir, "band_severe.csv"), band.first_day, cfg.start_date,
               band.severe);
    detail::write_command_manifest(io, "band");
    return band;
}

/// Full pipeline: fit, then policy optimization, then the band, all in one
/// output directory, plus a one-row summary with the day-horizon severe and
/// death counts of the mean trajectory.
inline void run_analyze(const CommandIo& io) {
    CommandIo fit_io = io;
    run_fit(fit_io);

    CommandIo opt_io = io;
    opt_io.fit_dir = io.out_dir;
    const OptimizeOutputs opt = run_optimize(opt_io);

    CommandIo band_io = io;
    band_io.fit_dir = io.out_dir;
    band_io.policy_path = detail::join_path(io.out_dir, "policy.csv");
    run_band(band_io);

    RegionConfig cfg = load_region_config(io.config_path);
    AlgoOptions algo;
    apply_overrides(io.overrides, cfg, algo);
    const TrajectoryRecord& last = opt.trajectories.back();
    auto out = detail::open_for_write(detail::join_path(io.out_dir, "summary.csv"));
    out << "state,day,active_severe,cumulative_deaths\n";
    out << cfg.name << ',' << last.day << ',' << format_value(last.i_s) << ','
        << format_value(last.d) << "\n";

    detail::write_command_manifest(io, "analyze");
}

} // namespace seird
