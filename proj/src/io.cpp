#include "fosemu/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fosemu/error.hpp"
#include "fosemu/stats.hpp"
#include "json.hpp"

namespace fosemu::io {

using Json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_int(const std::string& s, int& out) {
    double d = 0.0;
    if (!parse_double(s, d) || d != std::floor(d) || std::abs(d) > 2e9) return false;
    out = static_cast<int>(d);
    return true;
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json box_json(const BoxplotSummary& b) {
    return Json{{"lower_whisker", b.lower_whisker}, {"q1", b.q1},           {"median", b.median},
                {"q3", b.q3},                       {"upper_whisker", b.upper_whisker}, {"outliers", b.outliers}};
}

Json parse_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw DataValidationError({fmt::format("{}: malformed JSON ({})", path.string(), e.what())});
    }
}

}  // namespace

std::string format_number(double x) { return fmt::format("{:.17g}", x); }

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw DataValidationError({fmt::format("missing column '{}'", name)});
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataValidationError({fmt::format("cannot open '{}'", path.string())});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty() || line[0] == '#') continue;
        if (first) {
            t.header = split(line);
            first = false;
        } else {
            t.rows.push_back(split(line));
        }
    }
    if (first) throw DataValidationError({fmt::format("{}: empty file", path.string())});
    return t;
}

std::string design_csv(const Design& design) {
    std::string s = "run_id,height_m,angle_deg,cohesion_kpa,friction_deg,permeability_m_per_s\n";
    for (std::size_t i = 0; i < design.size(); ++i) {
        const auto x = design.points[i].to_array();
        s += fmt::format("{},{},{},{},{},{}\n", design.run_ids[i], format_number(x[0]), format_number(x[1]),
                         format_number(x[2]), format_number(x[3]), format_number(x[4]));
    }
    return s;
}

Design read_design(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    std::vector<std::string> problems;
    static const char* names[] = {"height_m", "angle_deg", "cohesion_kpa", "friction_deg", "permeability_m_per_s"};
    std::array<std::size_t, kIcCount> cols{};
    std::size_t id_col = 0;
    try {
        id_col = t.column("run_id");
        for (int k = 0; k < kIcCount; ++k) cols[static_cast<std::size_t>(k)] = t.column(names[k]);
    } catch (const DataValidationError& e) {
        throw DataValidationError({fmt::format("{}: {}", path.string(), e.violations().front())});
    }
    Design d;
    std::set<int> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row.size() != t.header.size()) {
            problems.push_back(fmt::format("line {}: {} fields, expected {}", r + 2, row.size(), t.header.size()));
            continue;
        }
        int id = 0;
        if (!parse_int(row[id_col], id)) {
            problems.push_back(fmt::format("line {}: run_id '{}' is not an integer", r + 2, row[id_col]));
            continue;
        }
        if (!seen.insert(id).second) problems.push_back(fmt::format("line {}: duplicate run id {}", r + 2, id));
        std::array<double, kIcCount> x{};
        bool ok = true;
        for (int k = 0; k < kIcCount; ++k) {
            const auto& cell = row[cols[static_cast<std::size_t>(k)]];
            if (!parse_double(cell, x[static_cast<std::size_t>(k)])) {
                problems.push_back(fmt::format("line {}: {} '{}' is not a finite number", r + 2, names[k], cell));
                ok = false;
            }
        }
        if (!ok) continue;
        d.run_ids.push_back(id);
        d.points.push_back(InitialConditions::from_array(x));
    }
    if (d.points.empty() && problems.empty()) problems.push_back("design has no rows");
    if (!problems.empty()) {
        for (auto& p : problems) p = path.string() + ": " + p;
        throw DataValidationError(std::move(problems));
    }
    for (int k = 0; k < kIcCount; ++k) {
        auto& r = d.ranges[static_cast<std::size_t>(k)];
        r.lo = r.hi = d.points.front().to_array()[static_cast<std::size_t>(k)];
        for (const auto& p : d.points) {
            const double v = p.to_array()[static_cast<std::size_t>(k)];
            r.lo = std::min(r.lo, v);
            r.hi = std::max(r.hi, v);
        }
    }
    return d;
}

std::string series_csv(std::span<const FoSSeries> series) {
    std::string s = "run_id,year,fos\n";
    for (const auto& r : series)
        for (std::size_t j = 0; j < r.size(); ++j)
            s += fmt::format("{},{},{}\n", r.run_id, format_number(r.years[j]), format_number(1.0 + r.excess[j]));
    return s;
}

std::vector<FoSSeries> read_series(const std::filesystem::path& path, std::size_t min_observations) {
    const CsvTable t = read_csv(path);
    std::size_t id_col = 0, year_col = 0, fos_col = 0;
    try {
        id_col = t.column("run_id");
        year_col = t.column("year");
        fos_col = t.column("fos");
    } catch (const DataValidationError& e) {
        throw DataValidationError({fmt::format("{}: {}", path.string(), e.violations().front())});
    }
    std::vector<std::string> problems;
    std::vector<FoSSeries> runs;
    std::map<int, std::size_t> index;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row.size() != t.header.size()) {
            problems.push_back(fmt::format("line {}: {} fields, expected {}", r + 2, row.size(), t.header.size()));
            continue;
        }
        int id = 0;
        double year = 0.0, fos = 0.0;
        if (!parse_int(row[id_col], id) || !parse_double(row[year_col], year) || !parse_double(row[fos_col], fos)) {
            problems.push_back(fmt::format("line {}: unparseable values", r + 2));
            continue;
        }
        auto [it, inserted] = index.try_emplace(id, runs.size());
        if (inserted) {
            runs.emplace_back();
            runs.back().run_id = id;
        }
        auto& s = runs[it->second];
        s.years.push_back(year);
        s.excess.push_back(fos - 1.0);
    }
    for (auto& s : runs) s.censored = !s.excess.empty() && s.excess.back() > 0.0;
    for (auto& p : validate_series(runs, min_observations)) problems.push_back(std::move(p));
    if (runs.empty() && problems.empty()) problems.push_back("no observations");
    if (!problems.empty()) {
        for (auto& p : problems) p = path.string() + ": " + p;
        throw DataValidationError(std::move(problems));
    }
    return runs;
}

std::string truth_json(const SyntheticTruth& truth) {
    Json j;
    j["generator"] = truth.generator;
    j["quadratic"] = truth.quadratic;
    j["horizon"] = truth.horizon;
    j["seed"] = truth.seed;
    Json runs = Json::array();
    for (const auto& r : truth.runs) {
        runs.push_back(Json{{"run_id", r.run_id},
                            {"gamma0", r.params.gamma0()},
                            {"gamma1", r.params.gamma1()},
                            {"gamma2", r.params.gamma2()},
                            {"omega", r.params.ttf()},
                            {"sigma", r.params.noise_sd()},
                            {"end_year", r.end_year},
                            {"censored", r.censored},
                            {"dropped", r.dropped},
                            {"observations", r.observations}});
    }
    j["runs"] = std::move(runs);
    return j.dump(2) + "\n";
}

SyntheticTruth read_truth(const std::filesystem::path& path) {
    const Json j = parse_json(path);
    try {
        SyntheticTruth t;
        t.generator = j.at("generator").get<std::string>();
        t.quadratic = j.at("quadratic").get<bool>();
        t.horizon = j.at("horizon").get<double>();
        t.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& r : j.at("runs")) {
            RunTruth rt;
            rt.run_id = r.at("run_id").get<int>();
            rt.params = BSplineParams::from_constrained(r.at("gamma0").get<double>(), r.at("gamma1").get<double>(),
                                                        r.at("gamma2").get<double>(), r.at("omega").get<double>(),
                                                        r.at("sigma").get<double>());
            rt.end_year = r.at("end_year").get<double>();
            rt.censored = r.at("censored").get<bool>();
            rt.dropped = r.at("dropped").get<bool>();
            rt.observations = r.at("observations").get<std::size_t>();
            t.runs.push_back(rt);
        }
        return t;
    } catch (const Json::exception& e) {
        throw DataValidationError({fmt::format("{}: {}", path.string(), e.what())});
    }
}

std::string draws_jsonl(const PosteriorDraws& draws) {
    std::string out;
    for (int c = 0; c < draws.chains; ++c) {
        for (int d = 0; d < draws.per_chain; ++d) {
            out += fmt::format("{{\"chain\":{},\"iteration\":{}", c + 1, draws.first_iteration + d + 1);
            for (std::size_t p = 0; p < draws.parameters(); ++p)
                out += fmt::format(",\"{}\":{}", draws.names[p], format_number(draws(c, d, p)));
            out += "}\n";
        }
    }
    return out;
}

PosteriorDraws read_draws(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    PosteriorDraws draws;
    std::string line;
    std::size_t line_no = 0;
    std::map<int, int> per_chain;
    int prev_chain = 0;
    int min_iteration = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error&) {
            throw DataValidationError({fmt::format("{}:{}: malformed JSON line", path.string(), line_no)});
        }
        const int chain = j.at("chain").get<int>();
        const int iteration = j.at("iteration").get<int>();
        if (chain < prev_chain)
            throw DataValidationError({fmt::format("{}:{}: chains out of order", path.string(), line_no)});
        prev_chain = chain;
        ++per_chain[chain];
        if (min_iteration < 0 || iteration < min_iteration) min_iteration = iteration;
        std::size_t p = 0;
        const bool first = draws.names.empty();
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == "chain" || it.key() == "iteration") continue;
            if (first) {
                draws.names.push_back(it.key());
            } else if (p >= draws.names.size() || draws.names[p] != it.key()) {
                throw DataValidationError(
                    {fmt::format("{}:{}: parameter '{}' out of place", path.string(), line_no, it.key())});
            }
            draws.values.push_back(it.value().is_number() ? it.value().get<double>() : std::nan(""));
            ++p;
        }
        if (p != draws.names.size())
            throw DataValidationError({fmt::format("{}:{}: {} parameters, expected {}", path.string(), line_no, p,
                                                   draws.names.size())});
    }
    if (per_chain.empty()) throw DataValidationError({fmt::format("{}: no draws", path.string())});
    draws.chains = static_cast<int>(per_chain.size());
    draws.per_chain = per_chain.begin()->second;
    for (const auto& [c, n] : per_chain)
        if (n != draws.per_chain)
            throw DataValidationError({fmt::format("{}: chain {} has {} draws, chain {} has {}", path.string(), c, n,
                                                   per_chain.begin()->first, draws.per_chain)});
    draws.first_iteration = min_iteration - 1;
    return draws;
}

std::string summary_json(const DiagnosticsReport& report) {
    Json j;
    j["chains"] = report.chains;
    j["draws_per_chain"] = report.per_chain;
    j["divergences"] = report.divergences();
    const auto mr = report.max_rhat();
    j["max_rhat"] = mr ? number_or_null(*mr) : Json(nullptr);
    j["rhat_threshold"] = kRhatThreshold;
    j["flagged"] = report.flagged();
    j["multimodal"] = report.multimodal();
    Json chains = Json::array();
    for (const auto& s : report.chain_stats)
        chains.push_back(Json{{"step_size", s.step_size},
                              {"divergences", s.divergences},
                              {"mean_accept", s.mean_accept},
                              {"mean_tree_depth", s.mean_tree_depth},
                              {"gradient_evaluations", s.gradient_evaluations}});
    j["chain_stats"] = std::move(chains);
    Json params = Json::array();
    for (const auto& p : report.parameters) {
        params.push_back(Json{{"name", p.name},
                              {"mean", number_or_null(p.mean)},
                              {"sd", number_or_null(p.sd)},
                              {"q2.5", number_or_null(p.q025)},
                              {"q50", number_or_null(p.q50)},
                              {"q97.5", number_or_null(p.q975)},
                              {"rhat", p.rhat ? number_or_null(*p.rhat) : Json(nullptr)},
                              {"ess_bulk", number_or_null(p.ess)},
                              {"rhat_flag", p.rhat_flag},
                              {"multimodal", p.multimodal}});
    }
    j["parameters"] = std::move(params);
    return j.dump(2) + "\n";
}

std::string band_csv(const PredictionBand& band) {
    std::string s = "year,mean,lo95,hi95\n";
    for (std::size_t i = 0; i < band.grid.size(); ++i)
        s += fmt::format("{},{},{},{}\n", format_number(band.grid[i]), format_number(band.mean[i]),
                         format_number(band.lo95[i]), format_number(band.hi95[i]));
    return s;
}

std::string band_samples_csv(const PredictionBand& band) {
    if (!band.samples) throw InvalidParameter("band was computed without per-draw samples");
    std::string s = "draw";
    for (double t : band.grid) s += "," + format_number(t);
    s += "\n";
    const auto& m = *band.samples;
    for (Eigen::Index d = 0; d < m.rows(); ++d) {
        s += std::to_string(d + 1);
        for (Eigen::Index j = 0; j < m.cols(); ++j) s += "," + format_number(m(d, j));
        s += "\n";
    }
    return s;
}

std::string ttf_json(const TTFDistribution& ttf, std::string_view label, bool include_samples) {
    auto summary = [](const std::vector<double>& v) {
        return Json{{"mean", stats::mean(v)},
                    {"q2.5", stats::quantile(v, 0.025)},
                    {"q50", stats::quantile(v, 0.5)},
                    {"q97.5", stats::quantile(v, 0.975)}};
    };
    Json j;
    j["label"] = label;
    j["step"] = ttf.step;
    j["draws"] = ttf.rho.size();
    j["predicted_ttf"] = summary(ttf.rho);
    j["model_ttf"] = summary(ttf.omega);
    if (include_samples) {
        j["predicted_ttf_samples"] = ttf.rho;
        j["model_ttf_samples"] = ttf.omega;
    }
    return j.dump(2) + "\n";
}

std::string scores_csv(std::span<const RunScores> scores) {
    std::string s = "run_id,year,squared_error,crps\n";
    for (const auto& r : scores)
        for (std::size_t j = 0; j < r.years.size(); ++j)
            s += fmt::format("{},{},{},{}\n", r.run_id, format_number(r.years[j]), format_number(r.squared_error[j]),
                             format_number(r.crps[j]));
    return s;
}

std::vector<RunScores> read_scores(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t id = t.column("run_id"), yr = t.column("year"), se = t.column("squared_error"),
                      cr = t.column("crps");
    std::vector<RunScores> out;
    std::vector<std::string> problems;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        int run = 0;
        double year = 0, sq = 0, crps = 0;
        if (row.size() != t.header.size() || !parse_int(row[id], run) || !parse_double(row[yr], year) ||
            !parse_double(row[se], sq) || !parse_double(row[cr], crps)) {
            problems.push_back(fmt::format("{}: line {}: unparseable values", path.string(), r + 2));
            continue;
        }
        if (out.empty() || out.back().run_id != run) {
            out.emplace_back();
            out.back().run_id = run;
        }
        out.back().years.push_back(year);
        out.back().squared_error.push_back(sq);
        out.back().crps.push_back(crps);
    }
    if (!problems.empty()) throw DataValidationError(std::move(problems));
    return out;
}

std::string comparison_csv(const ScoreTable& table) {
    std::string s = "run_id,year,delta_mse,delta_crps\n";
    for (const auto& r : table.runs)
        for (std::size_t j = 0; j < r.years.size(); ++j)
            s += fmt::format("{},{},{},{}\n", r.run_id, format_number(r.years[j]), format_number(r.delta_mse[j]),
                             format_number(r.delta_crps[j]));
    return s;
}

std::string comparison_json(const ScoreTable& table) {
    Json j;
    j["median_delta_mse"] = table.median_delta_mse();
    j["median_delta_crps"] = table.median_delta_crps();
    j["median_crps_first"] = median_run_crps(table.first);
    j["median_crps_second"] = median_run_crps(table.second);
    Json runs = Json::array();
    for (const auto& r : table.runs) {
        Json e{{"run_id", r.run_id}, {"times", r.years.size()}};
        if (!r.years.empty()) {
            e["delta_mse"] = box_json(r.mse_box);
            e["delta_crps"] = box_json(r.crps_box);
        }
        runs.push_back(std::move(e));
    }
    j["runs"] = std::move(runs);
    return j.dump(2) + "\n";
}

std::string band_svg(const PredictionBand& band, std::string_view title, std::span<const double> obs_years,
                     std::span<const double> obs_fos) {
    constexpr double width = 720, height = 420, left = 60, right = 20, top = 40, bottom = 50;
    if (band.grid.empty()) throw InvalidParameter("cannot plot an empty band");
    double x0 = band.grid.front(), x1 = band.grid.back();
    double y0 = *std::min_element(band.lo95.begin(), band.lo95.end());
    double y1 = *std::max_element(band.hi95.begin(), band.hi95.end());
    for (std::size_t i = 0; i < obs_years.size() && i < obs_fos.size(); ++i) {
        x0 = std::min(x0, obs_years[i]);
        x1 = std::max(x1, obs_years[i]);
        y0 = std::min(y0, obs_fos[i]);
        y1 = std::max(y1, obs_fos[i]);
    }
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= y0) y1 = y0 + 1.0;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (width - left - right); };
    auto py = [&](double y) { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); };
    auto polyline = [&](const std::vector<double>& ys, std::string_view style) {
        std::string pts;
        for (std::size_t i = 0; i < band.grid.size(); ++i) pts += fmt::format("{:.2f},{:.2f} ", px(band.grid[i]), py(ys[i]));
        return fmt::format("<polyline fill=\"none\" {} points=\"{}\"/>\n", style, pts);
    };

    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        width, height);
    s += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", width / 2, title);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", left, height - bottom,
                     width - right);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top,
                     height - bottom);
    for (int k = 0; k <= 5; ++k) {
        const double xv = x0 + (x1 - x0) * k / 5.0;
        const double yv = y0 + (y1 - y0) * k / 5.0;
        s += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{:.0f}</text>\n", px(xv),
                         height - bottom + 18, xv);
        s += fmt::format("<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">{:.2f}</text>\n", left - 6, py(yv) + 4, yv);
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">Years</text>\n", width / 2, height - 12);
    s += fmt::format("<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">FoS</text>\n",
                     height / 2, height / 2);
    if (y0 < 1.0 && y1 > 1.0)
        s += fmt::format("<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"grey\" "
                         "stroke-dasharray=\"2,3\"/>\n",
                         left, py(1.0), width - right);
    s += polyline(band.lo95, "stroke=\"steelblue\" stroke-dasharray=\"6,4\"");
    s += polyline(band.hi95, "stroke=\"steelblue\" stroke-dasharray=\"6,4\"");
    s += polyline(band.mean, "stroke=\"black\" stroke-width=\"1.5\"");
    for (std::size_t i = 0; i < obs_years.size() && i < obs_fos.size(); ++i)
        s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.8\" fill=\"firebrick\"/>\n", px(obs_years[i]),
                         py(obs_fos[i]));
    s += "</svg>\n";
    return s;
}

std::string fingerprint(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

Eigen::MatrixXd FittedModelArchive::z_training() const { return standardize_design(design, stats); }

std::string stats_fingerprint(const StandardizationStats& stats, std::span<const int> run_ids,
                              std::span<const InitialConditions> design) {
    std::string canon;
    for (int k = 0; k < kIcCount; ++k)
        canon += format_number(stats.mean[static_cast<std::size_t>(k)]) + ";" +
                 format_number(stats.sd[static_cast<std::size_t>(k)]) + ";";
    for (std::size_t i = 0; i < design.size(); ++i) {
        canon += std::to_string(run_ids[i]);
        for (double v : design[i].to_array()) canon += "," + format_number(v);
        canon += ";";
    }
    return fingerprint(canon);
}

std::string archive_json(const FittedModelArchive& a) {
    Json j;
    j["tool_version"] = a.tool_version;
    j["model"] = std::string(to_string(a.model));
    j["nugget"] = a.nugget;
    j["standardization"] = Json{{"mean", a.stats.mean}, {"sd", a.stats.sd}};
    Json design = Json::array();
    for (std::size_t i = 0; i < a.design.size(); ++i)
        design.push_back(Json{{"run_id", a.run_ids[i]}, {"x", a.design[i].to_array()}});
    j["design"] = std::move(design);
    j["chains"] = Json{{"chains", a.chains.chains},
                       {"iterations", a.chains.iterations},
                       {"warmup", a.chains.warmup},
                       {"seed", a.chains.seed},
                       {"algorithm", std::string(to_string(a.chains.algorithm))},
                       {"target_accept", a.chains.target_accept},
                       {"max_tree_depth", a.chains.max_tree_depth}};
    j["draws_file"] = a.draws_file;
    j["data_fingerprint"] = a.data_fingerprint;
    j["stats_fingerprint"] = a.stats_fingerprint;
    return j.dump(2) + "\n";
}

FittedModelArchive read_archive(const std::filesystem::path& path) {
    const Json j = parse_json(path);
    FittedModelArchive a;
    try {
        a.tool_version = j.at("tool_version").get<std::string>();
        a.model = parse_model_kind(j.at("model").get<std::string>());
        a.nugget = j.at("nugget").get<double>();
        a.stats.mean = j.at("standardization").at("mean").get<std::array<double, kIcCount>>();
        a.stats.sd = j.at("standardization").at("sd").get<std::array<double, kIcCount>>();
        for (const auto& d : j.at("design")) {
            a.run_ids.push_back(d.at("run_id").get<int>());
            a.design.push_back(InitialConditions::from_array(d.at("x").get<std::array<double, kIcCount>>()));
        }
        const auto& c = j.at("chains");
        a.chains.chains = c.at("chains").get<int>();
        a.chains.iterations = c.at("iterations").get<int>();
        a.chains.warmup = c.at("warmup").get<int>();
        a.chains.seed = c.at("seed").get<std::uint64_t>();
        a.chains.algorithm = parse_sampler_kind(c.at("algorithm").get<std::string>());
        a.chains.target_accept = c.at("target_accept").get<double>();
        a.chains.max_tree_depth = c.at("max_tree_depth").get<int>();
        a.draws_file = j.at("draws_file").get<std::string>();
        a.data_fingerprint = j.at("data_fingerprint").get<std::string>();
        a.stats_fingerprint = j.at("stats_fingerprint").get<std::string>();
    } catch (const Json::exception& e) {
        throw DataValidationError({fmt::format("{}: incomplete archive ({})", path.string(), e.what())});
    }
    if (stats_fingerprint(a.stats, a.run_ids, a.design) != a.stats_fingerprint)
        throw DataValidationError(
            {fmt::format("{}: standardization fingerprint mismatch; the archive was modified", path.string())});
    return a;
}

}  // namespace fosemu::io
