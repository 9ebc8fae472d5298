#pragma once

#include "seird/common.hpp"
#include "seird/estimation.hpp"
#include "seird/policy.hpp"
#include "seird/sensitivity.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace seird {

// ---------------------------------------------------------------------------
// Dates (ISO-8601 calendar days)

inline std::chrono::sys_days parse_date(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream in(text);
    in >> y >> dash1 >> m >> dash2 >> d;
    // The stream extracts the sign of the month/day, so re-check the layout.
    if (!in || dash1 != '-' || dash2 != '-' || text.size() != 10)
        throw ValidationError("date '" + text + "' is not ISO-8601 (YYYY-MM-DD)");
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw ValidationError("date '" + text + "' is not a valid calendar day");
    return std::chrono::sys_days{ymd};
}

inline std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

inline std::string date_add(const std::string& start, int days) {
    return format_date(parse_date(start) + std::chrono::days{days});
}

// ---------------------------------------------------------------------------
// Number rendering: integral values print exactly, everything else with six
// significant digits. Keeps integer counts bit-faithful across round trips.

inline std::string format_value(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline count_t parse_count(const std::string& text, const std::string& context) {
    count_t value = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ValidationError(context + ": '" + text + "' is not an integer");
    return value;
}

inline double parse_double(const std::string& text, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(context + ": '" + text + "' is not a number");
    }
}

inline std::ifstream open_for_read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

} // namespace detail

/// Reads a whole CSV file as header + string rows, checking that every row
/// has the header's width.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::string& path) {
    auto in = detail::open_for_read(path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.header = detail::split_csv_line(line);
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row_no;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != table.header.size())
            throw ValidationError("'" + path + "' row " + std::to_string(row_no) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(table.header.size()));
        table.rows.push_back(std::move(fields));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Case-count series

inline RealDataSeries load_case_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    const std::vector<std::string> required{"date", "new_cases", "active_cases",
                                            "cumulative_deaths"};
    const std::vector<std::string> with_recoveries{"date", "new_cases", "active_cases",
                                                   "cumulative_deaths", "cumulative_recoveries"};
    bool has_recoveries = false;
    if (table.header == with_recoveries) {
        has_recoveries = true;
    } else if (table.header != required) {
        throw ValidationError("'" + path +
                              "': header must be date,new_cases,active_cases,cumulative_deaths"
                              "[,cumulative_recoveries]");
    }

    RealDataSeries series;
    std::optional<std::chrono::sys_days> prev_date;
    count_t prev_deaths = 0;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = "'" + path + "' row " + std::to_string(i + 1);
        DayRecord rec;
        rec.date = row[0];
        const auto date = parse_date(rec.date);
        if (prev_date && date != *prev_date + std::chrono::days{1})
            throw ValidationError(where + ": date " + rec.date + " is not contiguous with " +
                                  format_date(*prev_date));
        prev_date = date;
        rec.new_cases = detail::parse_count(row[1], where + " new_cases");
        rec.active_cases = detail::parse_count(row[2], where + " active_cases");
        rec.cumulative_deaths = detail::parse_count(row[3], where + " cumulative_deaths");
        if (rec.new_cases < 0 || rec.active_cases < 0 || rec.cumulative_deaths < 0)
            throw ValidationError(where + ": negative count");
        if (i > 0 && rec.cumulative_deaths < prev_deaths)
            throw ValidationError(where + ": cumulative deaths decrease");
        prev_deaths = rec.cumulative_deaths;
        if (has_recoveries) {
            rec.cumulative_recoveries = detail::parse_count(row[4], where + " cumulative_recoveries");
            if (*rec.cumulative_recoveries < 0) throw ValidationError(where + ": negative count");
        }
        series.days.push_back(std::move(rec));
    }
    if (series.days.empty()) throw ValidationError("'" + path + "' contains no data rows");
    return series;
}

inline void write_case_csv(const std::string& path, const RealDataSeries& series) {
    auto out = detail::open_for_write(path);
    const bool has_recoveries =
        !series.days.empty() && series.days.front().cumulative_recoveries.has_value();
    out << "date,new_cases,active_cases,cumulative_deaths";
    if (has_recoveries) out << ",cumulative_recoveries";
    out << "\n";
    for (const auto& rec : series.days) {
        out << rec.date << ',' << rec.new_cases << ',' << rec.active_cases << ','
            << rec.cumulative_deaths;
        if (has_recoveries) out << ',' << rec.cumulative_recoveries.value_or(0);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Region configuration

/// Region settings: population and capacity, the cost structure, the
/// initial-state split, reproduction numbers per lockdown level, and the
/// train/test protocol. Loaded from a strict flat JSON file.
struct RegionConfig {
    std::string name;
    count_t population = 0;
    count_t cap = 0;                  ///< beds available for these patients
    std::int64_t economic_day_cost = 0;
    std::int64_t life_cost = 4'700'000;
    double rho = 0.25;
    double p_severe = 0.07;
    double inflation = 10.0;
    double r0_base = 0.8;
    double r1 = 0.5;
    double r2 = 1.0;
    double death_multiplier = 3.0;
    int training_action = 2;
    int train_days = 40;
    int horizon_days = 90;
    std::string start_date;
};

inline void check_region(const RegionConfig& c) {
    if (c.name.empty()) throw ValidationError("region config: name must not be empty");
    if (c.population <= 0) throw ValidationError("region config: population must be positive");
    if (c.cap < 0) throw ValidationError("region config: cap must be non-negative");
    if (c.economic_day_cost < 0 || c.life_cost < 0)
        throw ValidationError("region config: costs must be non-negative");
    if (!(c.rho >= 0.0 && c.rho < 1.0))
        throw ValidationError("region config: rho must lie in [0,1)");
    if (!(c.p_severe >= 0.0 && c.p_severe <= 1.0))
        throw ValidationError("region config: p_s must lie in [0,1]");
    if (!(c.inflation >= 1.0)) throw ValidationError("region config: phi must be >= 1");
    if (!(c.r1 > 0.0 && c.r2 > c.r1))
        throw ValidationError("region config: need 0 < r1 < r2");
    if (!(c.death_multiplier >= 1.0))
        throw ValidationError("region config: death_multiplier must be >= 1");
    if (c.training_action < 0 || c.training_action > 2)
        throw ValidationError("region config: training_action must be 0, 1 or 2");
    if (c.train_days < 8) throw ValidationError("region config: train_days must be >= 8");
    if (c.train_days >= c.horizon_days)
        throw ValidationError("region config: train_days must be smaller than horizon_days");
    parse_date(c.start_date);
}

inline RegionConfig load_region_config(const std::string& path) {
    auto in = detail::open_for_read(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("'" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw ValidationError("'" + path + "': expected a JSON object");

    RegionConfig cfg;
    bool saw_name = false, saw_population = false, saw_cap = false, saw_ce = false,
         saw_start = false;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "name") { cfg.name = value.get<std::string>(); saw_name = true; }
            else if (key == "population") { cfg.population = value.get<count_t>(); saw_population = true; }
            else if (key == "cap") { cfg.cap = value.get<count_t>(); saw_cap = true; }
            else if (key == "c_e") { cfg.economic_day_cost = value.get<std::int64_t>(); saw_ce = true; }
            else if (key == "c_l") cfg.life_cost = value.get<std::int64_t>();
            else if (key == "rho") cfg.rho = value.get<double>();
            else if (key == "p_s") cfg.p_severe = value.get<double>();
            else if (key == "phi") cfg.inflation = value.get<double>();
            else if (key == "r0_base") cfg.r0_base = value.get<double>();
            else if (key == "r1") cfg.r1 = value.get<double>();
            else if (key == "r2") cfg.r2 = value.get<double>();
            else if (key == "death_multiplier") cfg.death_multiplier = value.get<double>();
            else if (key == "training_action") cfg.training_action = value.get<int>();
            else if (key == "train_days") cfg.train_days = value.get<int>();
            else if (key == "horizon_days") cfg.horizon_days = value.get<int>();
            else if (key == "start_date") { cfg.start_date = value.get<std::string>(); saw_start = true; }
            else throw ValidationError("'" + path + "': unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("'" + path + "': " + e.what());
    }
    if (!saw_name || !saw_population || !saw_cap || !saw_ce || !saw_start)
        throw ValidationError("'" + path +
                              "': name, population, cap, c_e and start_date are required");
    check_region(cfg);
    return cfg;
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryRecord {
    int day = 0;
    std::string date;
    int action = 0;
    double s = 0, l = 0, i_m = 0, i_s = 0, r = 0, d = 0;
    double i_m_o = 0, i_s_o = 0, r_o = 0, d_o = 0;
};

inline constexpr const char* trajectory_header =
    "day,date,action,s,l,i_m,i_s,r,d,i_m_o,i_s_o,r_o,d_o";

inline void write_trajectories(const std::string& path,
                               const std::vector<TrajectoryRecord>& records) {
    auto out = detail::open_for_write(path);
    out << trajectory_header << "\n";
    for (const auto& rec : records) {
        out << rec.day << ',' << rec.date << ',' << rec.action << ',' << format_value(rec.s) << ','
            << format_value(rec.l) << ',' << format_value(rec.i_m) << ',' << format_value(rec.i_s)
            << ',' << format_value(rec.r) << ',' << format_value(rec.d) << ','
            << format_value(rec.i_m_o) << ',' << format_value(rec.i_s_o) << ','
            << format_value(rec.r_o) << ',' << format_value(rec.d_o) << "\n";
    }
}

inline std::vector<TrajectoryRecord> read_trajectories(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header != detail::split_csv_line(trajectory_header))
        throw ValidationError("'" + path + "': unexpected trajectory header");
    std::vector<TrajectoryRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = "'" + path + "' row " + std::to_string(i + 1);
        TrajectoryRecord rec;
        rec.day = static_cast<int>(detail::parse_count(row[0], where));
        rec.date = row[1];
        rec.action = static_cast<int>(detail::parse_count(row[2], where));
        double* fields[] = {&rec.s,   &rec.l,     &rec.i_m,   &rec.i_s, &rec.r,
                            &rec.d,   &rec.i_m_o, &rec.i_s_o, &rec.r_o, &rec.d_o};
        for (std::size_t j = 0; j < 10; ++j) *fields[j] = detail::parse_double(row[j + 3], where);
        out.push_back(std::move(rec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bands

inline void write_band(const std::string& path, int first_day, const std::string& start_date,
                       const BandChannel& channel) {
    auto out = detail::open_for_write(path);
    out << "day,date,lower,mean,upper\n";
    for (std::size_t i = 0; i < channel.mean.size(); ++i) {
        const int day = first_day + static_cast<int>(i);
        out << day << ',' << date_add(start_date, day - 1) << ',' << format_value(channel.lower[i])
            << ',' << format_value(channel.mean[i]) << ',' << format_value(channel.upper[i])
            << "\n";
    }
}

struct BandFile {
    std::vector<int> days;
    std::vector<double> lower, mean, upper;
};

inline BandFile read_band(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header != detail::split_csv_line("day,date,lower,mean,upper"))
        throw ValidationError("'" + path + "': unexpected band header");
    BandFile out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = "'" + path + "' row " + std::to_string(i + 1);
        out.days.push_back(static_cast<int>(detail::parse_count(row[0], where)));
        out.lower.push_back(detail::parse_double(row[2], where));
        out.mean.push_back(detail::parse_double(row[3], where));
        out.upper.push_back(detail::parse_double(row[4], where));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fit results

inline void write_fit(const std::string& path, const FitResult& fit,
                      const InitializationSpec& spec) {
    auto out = detail::open_for_write(path);
    out << "key,value\n";
    const auto probs = fit.params.probs();
    out << "p_l_im," << format_value(probs.l_to_im) << "\n";
    out << "p_im_is," << format_value(probs.im_to_is) << "\n";
    out << "p_im_r," << format_value(probs.im_to_r) << "\n";
    out << "p_is_r," << format_value(probs.is_to_r) << "\n";
    out << "p_is_d1," << format_value(probs.is_to_d1) << "\n";
    out << "k_min," << fit.k_min << "\n";
    // Day-1 anchors, so downstream commands need no data file.
    out << "initial_active," << spec.initial_active << "\n";
    out << "initial_deaths," << spec.initial_deaths << "\n";
    out << "initial_recoveries," << spec.initial_recoveries << "\n";
    for (std::size_t k = 0; k < fit.iteration_losses.size(); ++k)
        out << "loss_" << (k + 1) << ',' << format_value(fit.iteration_losses[k]) << "\n";
}

struct FitFile {
    TransitionProbs probs;
    int k_min = 1;
    count_t initial_active = 0;
    count_t initial_deaths = 0;
    count_t initial_recoveries = 0;
    std::vector<double> losses;
};

inline FitFile read_fit(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header != detail::split_csv_line("key,value"))
        throw ValidationError("'" + path + "': unexpected fit header");
    std::map<std::string, std::string> kv;
    std::vector<double> losses;
    for (const auto& row : table.rows) {
        if (row[0].rfind("loss_", 0) == 0)
            losses.push_back(detail::parse_double(row[1], "'" + path + "' " + row[0]));
        else
            kv[row[0]] = row[1];
    }
    auto need = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw ValidationError("'" + path + "': missing key '" + key + "'");
        return detail::parse_double(it->second, "'" + path + "' " + key);
    };
    FitFile out;
    out.probs = TransitionProbs{need("p_l_im"), need("p_im_is"), need("p_im_r"), need("p_is_r"),
                                need("p_is_d1")};
    out.k_min = static_cast<int>(need("k_min"));
    out.initial_active = static_cast<count_t>(need("initial_active"));
    out.initial_deaths = static_cast<count_t>(need("initial_deaths"));
    out.initial_recoveries = static_cast<count_t>(need("initial_recoveries"));
    out.losses = std::move(losses);
    return out;
}

inline void write_testing_probs(const std::string& path, const TestingSchedule& schedule) {
    auto out = detail::open_for_write(path);
    out << "day,test_mild,test_severe\n";
    for (int day = TestingSchedule::first_day; day <= schedule.last_day(); ++day)
        out << day << ',' << format_value(schedule.mild_at(day)) << ','
            << format_value(schedule.severe_at(day)) << "\n";
}

inline TestingSchedule read_testing_probs(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header != detail::split_csv_line("day,test_mild,test_severe"))
        throw ValidationError("'" + path + "': unexpected testing-probability header");
    TestingSchedule schedule;
    int expected_day = TestingSchedule::first_day;
    for (const auto& row : table.rows) {
        const std::string where = "'" + path + "' day " + row[0];
        if (detail::parse_count(row[0], where) != expected_day)
            throw ValidationError(where + ": days must be contiguous from " +
                                  std::to_string(TestingSchedule::first_day));
        schedule.append(detail::parse_double(row[1], where), detail::parse_double(row[2], where));
        ++expected_day;
    }
    if (schedule.empty()) throw ValidationError("'" + path + "' contains no data rows");
    return schedule;
}

// ---------------------------------------------------------------------------
// Policies

inline void write_policy(const std::string& path, const OptimalPolicy& policy) {
    auto out = detail::open_for_write(path);
    out << "l,u1,u2,theta,expected_reward\n";
    out << format_value(policy.thresholds.l()) << ',' << format_value(policy.thresholds.u1()) << ','
        << format_value(policy.thresholds.u2()) << ',' << format_value(policy.thresholds.theta())
        << ',' << format_value(policy.expected_reward) << "\n";
}

inline OptimalPolicy read_policy(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.header != detail::split_csv_line("l,u1,u2,theta,expected_reward") ||
        table.rows.size() != 1)
        throw ValidationError("'" + path + "': expected a single-row policy file");
    const auto& row = table.rows.front();
    const std::string where = "'" + path + "'";
    return OptimalPolicy{PolicyThresholds(detail::parse_double(row[0], where),
                                          detail::parse_double(row[1], where),
                                          detail::parse_double(row[2], where),
                                          detail::parse_double(row[3], where)),
                         detail::parse_double(row[4], where)};
}

// ---------------------------------------------------------------------------
// Run manifests

/// Everything needed to reproduce a command's outputs byte for byte.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::string data_path;  ///< empty when the command takes no data file
    std::string fit_path;   ///< empty when the command does not consume a fit
    std::string policy_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> overrides;
};

inline void write_manifest(const std::string& path, const RunManifest& manifest) {
    nlohmann::json doc;
    doc["command"] = manifest.command;
    doc["config"] = manifest.config_path;
    if (!manifest.data_path.empty()) doc["data"] = manifest.data_path;
    if (!manifest.fit_path.empty()) doc["fit"] = manifest.fit_path;
    if (!manifest.policy_path.empty()) doc["policy"] = manifest.policy_path;
    doc["out"] = manifest.out_dir;
    doc["seed"] = manifest.seed;
    doc["overrides"] = manifest.overrides;
    auto out = detail::open_for_write(path);
    out << doc.dump(2) << "\n";
}

} // namespace seird
