#include "seird/io.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(SEIRD_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    char buf[512];
    while (fgets(buf, sizeof buf, pipe)) result.output += buf;
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string data_dir() { return SEIRD_DATA_DIR; }
std::string mi_config() { return data_dir() + "/regions/mi.json"; }
std::string mi_cases() { return data_dir() + "/mi_sample_cases.csv"; }

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::ifstream in(entry.path(), std::ios::binary);
        files[entry.path().filename().string()] =
            std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return files;
}

const std::string fast_fit = " --set k_iters=1 --set n_runs=2";
const std::string fast_policy = " --set J=4";
const std::string fast_band = " --set O=2 --set I=1";

} // namespace

TEST_CASE("fit writes its outputs and succeeds on the bundled fixture") {
    const fs::path out = fresh_dir("seird_cli_fit");
    const RunResult r = run_cli("fit --config " + mi_config() + " --data " + mi_cases() +
                                " --out " + out.string() + " --seed 7" + fast_fit);
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(out / "fit.csv"));
    REQUIRE(fs::exists(out / "testing_probs.csv"));
    REQUIRE(fs::exists(out / "manifest.json"));
    const seird::FitFile fit = seird::read_fit((out / "fit.csv").string());
    for (double p : fit.probs.as_array()) {
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
    }
    REQUIRE(fit.losses.size() == 1);
}

TEST_CASE("missing data file fails with the path in the message") {
    const fs::path out = fresh_dir("seird_cli_missing");
    const RunResult r = run_cli("fit --config " + mi_config() +
                                " --data /no/such/file.csv --out " + out.string());
    REQUIRE(r.exit_code == 3);
    REQUIRE(r.output.find("/no/such/file.csv") != std::string::npos);
}

TEST_CASE("too little data for the training window is a validation error") {
    const fs::path out = fresh_dir("seird_cli_short");
    const fs::path short_csv = fs::temp_directory_path() / "seird_short.csv";
    std::ofstream f(short_csv);
    f << "date,new_cases,active_cases,cumulative_deaths\n2020-05-01,1,10,5\n2020-05-02,1,10,5\n";
    f.close();
    const RunResult r = run_cli("fit --config " + mi_config() + " --data " + short_csv.string() +
                                " --out " + out.string());
    REQUIRE(r.exit_code == 2);
    REQUIRE(r.output.find("40") != std::string::npos);
}

TEST_CASE("unknown override keys are a validation error") {
    const fs::path out = fresh_dir("seird_cli_badset");
    const RunResult r = run_cli("fit --config " + mi_config() + " --data " + mi_cases() +
                                " --out " + out.string() + " --set typo=1");
    REQUIRE(r.exit_code == 2);
    REQUIRE(r.output.find("typo") != std::string::npos);
}

TEST_CASE("a start-date mismatch between config and data is rejected") {
    const fs::path out = fresh_dir("seird_cli_datemismatch");
    const RunResult bad = run_cli("fit --config " + data_dir() + "/regions/ca.json --data " +
                                  mi_cases() + " --out " + out.string() + fast_fit);
    REQUIRE(bad.exit_code == 2);
    REQUIRE(bad.output.find("2020-05-01") != std::string::npos);
    const RunResult relabeled = run_cli("fit --config " + data_dir() + "/regions/ca.json --data " +
                                        mi_cases() + " --out " + out.string() + fast_fit +
                                        " --set start_date=2020-05-01");
    REQUIRE(relabeled.exit_code == 0);
}

TEST_CASE("fit is byte-identical under a repeated seed") {
    const fs::path out = fresh_dir("seird_cli_fit_det");
    const std::string args = "fit --config " + mi_config() + " --data " + mi_cases() +
                             " --out " + out.string() + " --seed 11" + fast_fit;
    REQUIRE(run_cli(args).exit_code == 0);
    const auto first = snapshot(out);
    fs::remove_all(out);
    REQUIRE(run_cli(args).exit_code == 0);
    REQUIRE(snapshot(out) == first);
}

TEST_CASE("optimize echoes a singleton grid and keeps 14-day blocks") {
    const fs::path fit_out = fresh_dir("seird_cli_opt_fit");
    REQUIRE(run_cli("fit --config " + mi_config() + " --data " + mi_cases() + " --out " +
                    fit_out.string() + " --seed 3" + fast_fit)
                .exit_code == 0);

    const fs::path out = fresh_dir("seird_cli_opt");
    const RunResult r = run_cli("optimize --config " + mi_config() + " --fit " + fit_out.string() +
                                " --out " + out.string() + " --seed 3" + fast_policy +
                                " --set policy_levels=0.0001:0.001:0.01 --set policy_thetas=0.5");
    INFO(r.output);
    REQUIRE(r.exit_code == 0);

    const seird::OptimalPolicy policy = seird::read_policy((out / "policy.csv").string());
    REQUIRE(policy.thresholds == seird::PolicyThresholds(0.0001, 0.001, 0.01, 0.5));

    const auto traj = seird::read_trajectories((out / "trajectories.csv").string());
    REQUIRE(traj.size() == 90);
    REQUIRE(traj.front().day == 1);
    REQUIRE(traj.back().day == 90);
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        REQUIRE(traj[i + 1].day == traj[i].day + 1);
        // the action may switch only on decision days
        if ((traj[i].day + 1) % 14 != 0 && traj[i].day >= 40)
            REQUIRE(traj[i + 1].action == traj[i].action);
    }
    for (const auto& rec : traj)
        if (rec.day <= 40) REQUIRE(rec.action == 2);
}

TEST_CASE("a zero life-cost override releases for the whole test period") {
    const fs::path fit_out = fresh_dir("seird_cli_cl0_fit");
    REQUIRE(run_cli("fit --config " + mi_config() + " --data " + mi_cases() + " --out " +
                    fit_out.string() + " --seed 6" + fast_fit + " --set training_action=0")
                .exit_code == 0);
    const fs::path out = fresh_dir("seird_cli_cl0_opt");
    const RunResult r = run_cli("optimize --config " + mi_config() + " --fit " + fit_out.string() +
                                " --out " + out.string() + " --seed 6 --set J=10" +
                                " --set c_l=0 --set training_action=0");
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    const auto traj = seird::read_trajectories((out / "trajectories.csv").string());
    for (const auto& rec : traj)
        if (rec.day >= 40 && rec.day <= 89) REQUIRE(rec.action == 0);
}

TEST_CASE("band writes ordered bounds and collapses under zero noise") {
    const fs::path fit_out = fresh_dir("seird_cli_band_fit");
    REQUIRE(run_cli("fit --config " + mi_config() + " --data " + mi_cases() + " --out " +
                    fit_out.string() + " --seed 5" + fast_fit)
                .exit_code == 0);
    const fs::path opt_out = fresh_dir("seird_cli_band_opt");
    REQUIRE(run_cli("optimize --config " + mi_config() + " --fit " + fit_out.string() + " --out " +
                    opt_out.string() + " --seed 5" + fast_policy)
                .exit_code == 0);

    const fs::path out = fresh_dir("seird_cli_band");
    const std::string policy_file = (opt_out / "policy.csv").string();
    const RunResult r = run_cli("band --config " + mi_config() + " --fit " + fit_out.string() +
                                " --policy " + policy_file + " --out " + out.string() +
                                " --seed 5" + fast_band);
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    for (const char* name : {"band_infected.csv", "band_deaths.csv", "band_severe.csv"}) {
        const seird::BandFile band = seird::read_band((out / name).string());
        REQUIRE(band.days.front() == 40);
        REQUIRE(band.days.back() == 90);
        for (std::size_t i = 0; i < band.lower.size(); ++i)
            REQUIRE(band.lower[i] <= band.upper[i]);
    }

    const fs::path zero = fresh_dir("seird_cli_band_zero");
    REQUIRE(run_cli("band --config " + mi_config() + " --fit " + fit_out.string() + " --policy " +
                    policy_file + " --out " + zero.string() + " --seed 5" + fast_band +
                    " --set noise_scale=0")
                .exit_code == 0);
    const seird::BandFile collapsed = seird::read_band((zero / "band_deaths.csv").string());
    for (std::size_t i = 0; i < collapsed.lower.size(); ++i)
        REQUIRE(collapsed.lower[i] == collapsed.upper[i]);
}

TEST_CASE("analyze chains the pipeline and summarizes the horizon") {
    const fs::path out = fresh_dir("seird_cli_analyze");
    const std::string args = "analyze --config " + mi_config() + " --data " + mi_cases() +
                             " --out " + out.string() + " --seed 9" + fast_fit + fast_policy +
                             fast_band;
    const RunResult r = run_cli(args);
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    for (const char* name : {"fit.csv", "testing_probs.csv", "policy.csv", "trajectories.csv",
                             "band_infected.csv", "band_deaths.csv", "band_severe.csv",
                             "summary.csv", "manifest.json"})
        REQUIRE(fs::exists(out / name));

    const seird::CsvTable summary = seird::read_csv((out / "summary.csv").string());
    REQUIRE(summary.header ==
            std::vector<std::string>{"state", "day", "active_severe", "cumulative_deaths"});
    REQUIRE(summary.rows.size() == 1);
    REQUIRE(summary.rows[0][0] == "MI");
    REQUIRE(summary.rows[0][1] == "90");
    const double severe = std::stod(summary.rows[0][2]);
    REQUIRE(severe >= 0.0);
    REQUIRE(severe <= 10077331.0);

    // the summary repeats the final mean-trajectory row verbatim
    const auto traj = seird::read_trajectories((out / "trajectories.csv").string());
    REQUIRE(summary.rows[0][2] == seird::format_value(traj.back().i_s));
    REQUIRE(summary.rows[0][3] == seird::format_value(traj.back().d));

    SECTION("inputs are not mutated") {
        // config + data hashes unchanged by the run
        std::ifstream cfg(mi_config(), std::ios::binary);
        const std::string cfg_now(std::istreambuf_iterator<char>(cfg), {});
        REQUIRE(cfg_now.find("484700000") != std::string::npos);
    }
    SECTION("repeated seed reproduces every byte") {
        const auto first = snapshot(out);
        fs::remove_all(out);
        REQUIRE(run_cli(args).exit_code == 0);
        REQUIRE(snapshot(out) == first);
    }
}
