#include "fosemu/cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "fosemu/diagnostics.hpp"
#include "fosemu/error.hpp"
#include "fosemu/experiment.hpp"
#include "fosemu/inference.hpp"
#include "fosemu/io.hpp"
#include "fosemu/prediction.hpp"
#include "fosemu/sampler.hpp"
#include "fosemu/scoring.hpp"
#include "fosemu/stats.hpp"
#include "fosemu/version.hpp"
#include "json.hpp"

namespace fosemu::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

/// Bad flags or flag combinations.
class UsageError : public Error {
public:
    using Error::Error;
};

void throw_usage(const std::vector<std::string>& problems) {
    std::string msg = problems.size() == 1 ? problems.front() : "invalid arguments:";
    if (problems.size() > 1)
        for (const auto& p : problems) msg += "\n  " + p;
    throw UsageError(msg);
}

struct Common {
    std::string config;
    std::string out_dir;
    int threads = 0;

    fs::path out() const {
        if (!out_dir.empty()) return out_dir;
        if (const char* env = std::getenv("FOSEMU_OUT_DIR"); env && *env) return env;
        return ".";
    }
};

void add_common(CLI::App* sub, Common& c, bool with_threads) {
    sub->add_option("--config", c.config, "key = value file; every key is a flag name, flags take precedence");
    sub->add_option("--out-dir", c.out_dir, "Output directory (default: $FOSEMU_OUT_DIR or .)");
    if (with_threads) sub->add_option("--threads", c.threads, "Worker threads (0: hardware concurrency)");
}

// Fills options not given on the command line from the config file.
void apply_config(CLI::App* sub, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw DataValidationError({fmt::format("cannot open config file '{}'", path)});
    std::vector<std::string> problems;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back(fmt::format("{}:{}: expected key = value", path, line_no));
            continue;
        }
        auto strip = [](std::string s) {
            const auto s0 = s.find_first_not_of(" \t\r");
            const auto s1 = s.find_last_not_of(" \t\r");
            return s0 == std::string::npos ? std::string() : s.substr(s0, s1 - s0 + 1);
        };
        std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        std::replace(key.begin(), key.end(), '_', '-');
        if (key == "config") {
            problems.push_back(fmt::format("{}:{}: config files cannot include other config files", path, line_no));
            continue;
        }
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt) {
            problems.push_back(fmt::format("{}:{}: unknown key '{}' for '{}'", path, line_no, key, sub->get_name()));
            continue;
        }
        if (opt->count() > 0) continue;
        try {
            opt->add_result(value);
            opt->run_callback();
        } catch (const CLI::Error& e) {
            problems.push_back(fmt::format("{}:{}: {}: {}", path, line_no, key, e.what()));
        }
    }
    if (!problems.empty()) throw_usage(problems);
}

std::vector<int> parse_id_list(const std::string& text) {
    std::vector<int> ids;
    if (text.empty()) return ids;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-', 1);
        try {
            if (dash == std::string::npos) {
                ids.push_back(std::stoi(item));
            } else {
                const int a = std::stoi(item.substr(0, dash));
                const int b = std::stoi(item.substr(dash + 1));
                if (b < a) throw std::invalid_argument("range");
                for (int i = a; i <= b; ++i) ids.push_back(i);
            }
        } catch (const std::exception&) {
            throw UsageError(fmt::format("'{}' is not a run id list (e.g. 1,4,10-12)", text));
        }
    }
    return ids;
}

std::vector<double> make_grid(double max, double step) {
    std::vector<double> g;
    for (long long k = 0;; ++k) {
        const double t = static_cast<double>(k) * step;
        if (t > max + 1e-9) break;
        g.push_back(t);
    }
    return g;
}

void require_files(const std::vector<std::pair<std::string, std::string>>& files) {
    std::vector<std::string> problems;
    for (const auto& [flag, path] : files) {
        if (path.empty())
            problems.push_back(fmt::format("{} is required", flag));
        else if (!fs::is_regular_file(path))
            problems.push_back(fmt::format("{}: file '{}' does not exist", flag, path));
    }
    if (!problems.empty()) throw DataValidationError(problems);
}

InitialConditions design_point(const Design& d, int run_id) {
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d.run_ids[i] == run_id) return d.points[i];
    throw DataValidationError({fmt::format("run {} is not in the design", run_id)});
}

const FoSSeries* find_series(const std::vector<FoSSeries>& all, int run_id) {
    for (const auto& s : all)
        if (s.run_id == run_id) return &s;
    return nullptr;
}

std::vector<double> fos_values(const FoSSeries& s) {
    std::vector<double> v;
    for (double y : s.excess) v.push_back(1.0 + y);
    return v;
}

// ---- design --------------------------------------------------------------------

struct DesignArgs {
    Common common;
    int n = 75;
    std::uint64_t seed = 20240501;
    int candidates = kMaximinCandidates;
    std::string out = "design.csv";
};

int cmd_design(const DesignArgs& a, std::ostream& out) {
    std::vector<std::string> problems;
    if (a.n < 1) problems.push_back("--n must be >= 1");
    if (a.candidates < 1) problems.push_back("--candidates must be >= 1");
    if (!problems.empty()) throw_usage(problems);
    const Design d = lhs_design(a.n, default_ic_ranges(), a.seed, a.candidates);
    const fs::path path = a.common.out() / a.out;
    io::write_text(path, io::design_csv(d));
    fmt::print(out, "wrote {} runs to {} (min pairwise distance {:.4f})\n", d.size(), path.string(),
               min_pairwise_distance(d));
    return kOk;
}

// ---- simulate ------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::string design;
    int n = 75;
    std::uint64_t seed = 20240501;
    std::string truth = "bspline";
    double horizon = kDefaultHorizon;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<std::string> problems;
    if (a.design.empty() && a.n < 1) problems.push_back("--n must be >= 1");
    if (!(a.horizon >= 0.0)) problems.push_back("--horizon must be >= 0");
    const auto names = TruthGenerator::preset_names();
    if (std::find(names.begin(), names.end(), a.truth) == names.end())
        problems.push_back(fmt::format("--truth must be one of bspline, two_regime, quadratic (got '{}')", a.truth));
    if (!problems.empty()) throw_usage(problems);
    if (!a.design.empty()) require_files({{"--design", a.design}});

    const fs::path dir = a.common.out();
    Design d;
    if (a.design.empty()) {
        d = lhs_design(a.n, default_ic_ranges(), a.seed);
        io::write_text(dir / "design.csv", io::design_csv(d));
    } else {
        d = io::read_design(a.design);
    }
    const SyntheticData data = synth_generate(d, TruthGenerator::preset(a.truth), a.horizon, stream_seed(a.seed, 1));
    io::write_text(dir / "series.csv", io::series_csv(data.series));
    io::write_text(dir / "truth.json", io::truth_json(data.truth));
    int censored = 0;
    for (const auto& s : data.series) censored += s.censored ? 1 : 0;
    for (const auto& r : data.truth.runs)
        if (r.dropped)
            fmt::print(err, "warning: run {} dropped: {} measurements, at least {} required\n", r.run_id,
                       r.observations, kMinObservations);
    fmt::print(out, "simulated {} runs ({} censored at {} years, {} dropped) into {}\n", data.series.size(), censored,
               a.horizon, d.size() - data.series.size(), dir.string());
    return kOk;
}

// ---- fit -----------------------------------------------------------------------

struct FitArgs {
    Common common;
    std::string design;
    std::string series;
    std::string model = "bspline";
    std::string sampler = "nuts";
    int chains = 4;
    int iterations = 2000;
    int warmup = 1000;
    std::uint64_t seed = 20240501;
    double target_accept = 0.8;
    int max_tree_depth = 10;
    double nugget = kDefaultNugget;
    std::string holdout;
};

struct TrainingSet {
    std::vector<int> run_ids;
    std::vector<InitialConditions> design;
    std::vector<FoSSeries> series;
};

TrainingSet training_set(const Design& d, const std::vector<FoSSeries>& all, const std::set<int>& holdout) {
    TrainingSet t;
    std::vector<std::string> problems;
    for (const auto& s : all) {
        if (holdout.count(s.run_id)) continue;
        const auto it = std::find(d.run_ids.begin(), d.run_ids.end(), s.run_id);
        if (it == d.run_ids.end()) {
            problems.push_back(fmt::format("run {} has observations but no design row", s.run_id));
            continue;
        }
        t.run_ids.push_back(s.run_id);
        t.design.push_back(d.points[static_cast<std::size_t>(it - d.run_ids.begin())]);
        t.series.push_back(s);
    }
    if (t.series.size() < 2 && problems.empty()) problems.push_back("at least 2 training runs are required");
    if (!problems.empty()) throw DataValidationError(problems);
    return t;
}

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
    ChainConfig cfg;
    std::vector<std::string> problems;
    ModelKind model = ModelKind::bspline;
    try {
        model = parse_model_kind(a.model);
    } catch (const InvalidParameter& e) {
        problems.push_back(e.what());
    }
    try {
        cfg.algorithm = parse_sampler_kind(a.sampler);
    } catch (const InvalidParameter& e) {
        problems.push_back(e.what());
    }
    if (a.chains < 1) problems.push_back(fmt::format("--chains must be >= 1 (got {})", a.chains));
    if (a.warmup < 0) problems.push_back(fmt::format("--warmup must be >= 0 (got {})", a.warmup));
    if (a.iterations <= a.warmup)
        problems.push_back(fmt::format("--iterations ({}) must exceed --warmup ({})", a.iterations, a.warmup));
    if (!problems.empty()) throw_usage(problems);
    cfg.chains = a.chains;
    cfg.iterations = a.iterations;
    cfg.warmup = a.warmup;
    cfg.seed = a.seed;
    cfg.target_accept = a.target_accept;
    cfg.max_tree_depth = a.max_tree_depth;
    cfg.threads = a.common.threads;
    try {
        cfg.validate();
    } catch (const InvalidParameter& e) {
        problems.push_back(e.what());
    }
    if (!(a.nugget >= 0.0)) problems.push_back("--nugget must be >= 0");
    if (!problems.empty()) throw_usage(problems);
    const auto holdout_ids = parse_id_list(a.holdout);
    require_files({{"--design", a.design}, {"--series", a.series}});

    const Design d = io::read_design(a.design);
    const auto all = io::read_series(a.series);
    const TrainingSet t = training_set(d, all, {holdout_ids.begin(), holdout_ids.end()});
    const auto stats = StandardizationStats::from_training(t.design);
    const Eigen::MatrixXd z = standardize_design(t.design, stats);
    const PosteriorModel posterior(model, TrainingData{z, t.series}, a.nugget);

    fmt::print(out, "fitting {} model to {} runs: {} chains x {} iterations ({} warmup), {} parameters\n",
               to_string(model), t.series.size(), cfg.chains, cfg.iterations, cfg.warmup, posterior.dimension());
    const McmcResult result = run_mcmc(posterior, cfg);
    const DiagnosticsReport report = diagnose(result.draws, result.chain_stats);

    const fs::path dir = a.common.out();
    io::write_text(dir / "draws.jsonl", io::draws_jsonl(result.draws));
    io::write_text(dir / "summary.json", io::summary_json(report));
    io::FittedModelArchive archive;
    archive.tool_version = kVersion;
    archive.model = model;
    archive.nugget = a.nugget;
    archive.stats = stats;
    archive.run_ids = t.run_ids;
    archive.design = t.design;
    archive.chains = cfg;
    archive.draws_file = "draws.jsonl";
    archive.data_fingerprint = io::fingerprint(io::series_csv(t.series));
    archive.stats_fingerprint = io::stats_fingerprint(stats, t.run_ids, t.design);
    io::write_text(dir / "archive.json", io::archive_json(archive));

    const auto max_rhat = report.max_rhat();
    fmt::print(out, "divergences {}, max R-hat {}, wrote {}\n", report.divergences(),
               max_rhat ? fmt::format("{:.3f}", *max_rhat) : std::string("n/a"), dir.string());
    for (const auto& name : report.flagged()) fmt::print(err, "warning: R-hat above {} for {}\n", kRhatThreshold, name);
    for (const auto& name : report.multimodal())
        fmt::print(err, "note: chains occupy disjoint regions for {} (possible multimodality)\n", name);
    return kOk;
}

// ---- diagnose ------------------------------------------------------------------

struct DiagnoseArgs {
    Common common;
    std::string draws;
    std::string out = "summary.json";
};

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
    require_files({{"--draws", a.draws}});
    const PosteriorDraws draws = io::read_draws(a.draws);
    const DiagnosticsReport report = diagnose(draws);
    const fs::path path = a.common.out() / a.out;
    io::write_text(path, io::summary_json(report));
    double min_ess = std::numeric_limits<double>::infinity();
    for (const auto& p : report.parameters) min_ess = std::min(min_ess, p.ess);
    const auto max_rhat = report.max_rhat();
    fmt::print(out, "{} parameters, {} chains x {} draws; max R-hat {}, min bulk ESS {:.0f}\n", draws.parameters(),
               draws.chains, draws.per_chain, max_rhat ? fmt::format("{:.3f}", *max_rhat) : std::string("n/a"),
               min_ess);
    for (const auto& p : report.parameters)
        if (p.rhat_flag || p.multimodal)
            fmt::print(out, "  {:<16} R-hat {:.3f}{}\n", p.name, p.rhat.value_or(1.0),
                       p.multimodal ? "  (chains disjoint: possible multimodality)" : "");
    fmt::print(out, "wrote {}\n", path.string());
    return kOk;
}

// ---- shared archive handling ---------------------------------------------------

struct LoadedFit {
    io::FittedModelArchive archive;
    PosteriorDraws draws;
    Eigen::MatrixXd z;
    std::set<int> training;
};

LoadedFit load_fit(const std::string& archive_path) {
    require_files({{"--archive", archive_path}});
    LoadedFit f;
    f.archive = io::read_archive(archive_path);
    const fs::path draws_path = fs::path(archive_path).parent_path() / f.archive.draws_file;
    require_files({{"draws file", draws_path.string()}});
    f.draws = io::read_draws(draws_path);
    f.z = f.archive.z_training();
    f.training = {f.archive.run_ids.begin(), f.archive.run_ids.end()};
    return f;
}

// Refuses a design whose training rows disagree with the archived standardization.
void check_design_matches(const LoadedFit& f, const Design& d) {
    std::vector<InitialConditions> rows;
    for (int id : f.archive.run_ids) rows.push_back(design_point(d, id));
    const auto stats = StandardizationStats::from_training(rows);
    if (io::stats_fingerprint(stats, f.archive.run_ids, rows) != f.archive.stats_fingerprint)
        throw DataValidationError(
            {"the supplied design does not reproduce the archived standardization (fingerprint mismatch)"});
}

PredictionOptions prediction_options(std::uint64_t seed, int threads, bool keep) {
    PredictionOptions o;
    o.seed = seed;
    o.threads = threads;
    o.keep_samples = keep;
    return o;
}

struct Forecast {
    PredictionBand band;
    TTFDistribution ttf;
    int skipped = 0;
};

Forecast forecast_run(const LoadedFit& f, const Design* d, int run_id, std::span<const double> grid,
                      const PredictionOptions& opts) {
    Forecast fc;
    if (f.training.count(run_id)) {
        const auto curves = run_curves(f.draws, f.archive.model, run_id);
        fc.band = fos_band(curves, grid, opts);
        fc.ttf = ttf_distribution(curves, opts);
        return fc;
    }
    if (!d) throw UsageError(fmt::format("run {} was not fitted; pass --design to predict it from its ICs", run_id));
    auto p = predict_out_of_sample(f.draws, f.archive.model, f.z, f.archive.stats, design_point(*d, run_id), grid,
                                   f.archive.nugget, opts);
    fc.band = std::move(p.band);
    fc.ttf = std::move(p.ttf);
    fc.skipped = p.skipped;
    return fc;
}

// ---- predict -------------------------------------------------------------------

struct PredictArgs {
    Common common;
    std::string archive;
    std::string runs;
    std::string ic;
    std::string design;
    double grid_max = kDefaultHorizon;
    double grid_step = 1.0;
    double ttf_step = 1.0;
    std::uint64_t seed = 20240501;
    bool dump_draws = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<std::string> problems;
    if (a.runs.empty() == a.ic.empty()) problems.push_back("give exactly one of --runs or --ic");
    if (!(a.grid_step > 0.0) || !(a.grid_max >= 0.0)) problems.push_back("grid needs --grid-step > 0 and --grid-max >= 0");
    if (!(a.ttf_step > 0.0)) problems.push_back("--ttf-step must be > 0");
    std::optional<InitialConditions> ic;
    if (!a.ic.empty()) {
        std::array<double, kIcCount> x{};
        std::stringstream ss(a.ic);
        std::string item;
        int k = 0;
        bool ok = true;
        while (std::getline(ss, item, ',')) {
            if (k >= kIcCount) {
                ok = false;
                break;
            }
            try {
                x[static_cast<std::size_t>(k++)] = std::stod(item);
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok || k != kIcCount)
            problems.push_back("--ic needs 5 comma-separated numbers: height,angle,cohesion,friction,permeability");
        else
            ic = InitialConditions::from_array(x);
    }
    if (!problems.empty()) throw_usage(problems);
    const auto ids = parse_id_list(a.runs);
    if (!a.design.empty()) require_files({{"--design", a.design}});

    const LoadedFit f = load_fit(a.archive);
    std::optional<Design> d;
    if (!a.design.empty()) {
        d = io::read_design(a.design);
        check_design_matches(f, *d);
    }
    const auto grid = make_grid(a.grid_max, a.grid_step);
    auto opts = prediction_options(a.seed, a.common.threads, a.dump_draws);
    opts.ttf_step = a.ttf_step;
    const fs::path dir = a.common.out();

    auto emit = [&](const std::string& label, const Forecast& fc) {
        io::write_text(dir / fmt::format("band_{}.csv", label), io::band_csv(fc.band));
        io::write_text(dir / fmt::format("ttf_{}.json", label), io::ttf_json(fc.ttf, label, a.dump_draws));
        if (a.dump_draws) io::write_text(dir / fmt::format("band_{}_draws.csv", label), io::band_samples_csv(fc.band));
        if (fc.skipped > 0)
            fmt::print(err, "warning: {}: {} draws skipped (conditioned A2 above A1 after {} resamples)\n", label,
                       fc.skipped, kMaxConstraintResamples);
        fmt::print(out, "{}: predicted TTF median {:.1f} years (95% {:.1f} to {:.1f}), model TTF median {:.1f}\n",
                   label, fc.ttf.rho_quantile(0.5), fc.ttf.rho_quantile(0.025), fc.ttf.rho_quantile(0.975),
                   fc.ttf.omega_quantile(0.5));
    };
    if (ic) {
        auto p = predict_out_of_sample(f.draws, f.archive.model, f.z, f.archive.stats, *ic, grid, f.archive.nugget,
                                       opts);
        emit("ic", Forecast{std::move(p.band), std::move(p.ttf), p.skipped});
    } else {
        for (int id : ids) emit(fmt::format("run{}", id), forecast_run(f, d ? &*d : nullptr, id, grid, opts));
    }
    return kOk;
}

// ---- validate ------------------------------------------------------------------

struct ValidateArgs {
    Common common;
    std::string archive;
    std::string design;
    std::string series;
    std::string holdout;
    std::uint64_t seed = 20240501;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
    require_files({{"--archive", a.archive}, {"--design", a.design}, {"--series", a.series}});
    const LoadedFit f = load_fit(a.archive);
    const Design d = io::read_design(a.design);
    check_design_matches(f, d);
    const auto all = io::read_series(a.series);
    std::vector<int> ids = parse_id_list(a.holdout);
    if (ids.empty())
        for (const auto& s : all)
            if (!f.training.count(s.run_id)) ids.push_back(s.run_id);
    std::vector<std::string> problems;
    for (int id : ids) {
        if (f.training.count(id)) problems.push_back(fmt::format("run {} was used for fitting", id));
        if (!find_series(all, id)) problems.push_back(fmt::format("run {} has no observations", id));
    }
    if (ids.empty()) problems.push_back("no held-out runs to validate");
    if (!problems.empty()) throw DataValidationError(problems);

    const fs::path dir = a.common.out();
    const auto opts = prediction_options(a.seed, a.common.threads, true);
    std::vector<RunScores> scores;
    Json runs = Json::array();
    std::size_t inside = 0, total = 0;
    for (int id : ids) {
        const FoSSeries& s = *find_series(all, id);
        const Forecast fc = forecast_run(f, &d, id, s.years, opts);
        const auto obs = fos_values(s);
        std::size_t in_run = 0;
        for (std::size_t j = 0; j < obs.size(); ++j)
            if (obs[j] >= fc.band.lo95[j] && obs[j] <= fc.band.hi95[j]) ++in_run;
        inside += in_run;
        total += obs.size();
        scores.push_back(score_run(id, s.years, obs, *fc.band.samples));
        io::write_text(dir / fmt::format("band_run{}.csv", id), io::band_csv(fc.band));
        if (fc.skipped > 0) fmt::print(err, "warning: run {}: {} draws skipped\n", id, fc.skipped);
        const double cov = static_cast<double>(in_run) / static_cast<double>(obs.size());
        runs.push_back(Json{{"run_id", id},
                            {"observations", obs.size()},
                            {"coverage95", cov},
                            {"mean_crps", stats::mean(scores.back().crps)},
                            {"skipped_draws", fc.skipped}});
        fmt::print(out, "run {}: {} of {} observations inside the 95% band ({:.3f})\n", id, in_run, obs.size(), cov);
    }
    const double coverage = static_cast<double>(inside) / static_cast<double>(total);
    Json report{{"model", std::string(to_string(f.archive.model))},
                {"heldout_runs", ids},
                {"observations", total},
                {"coverage95", coverage},
                {"runs", runs}};
    io::write_text(dir / "validation.json", report.dump(2) + "\n");
    io::write_text(dir / "scores_validation.csv", io::scores_csv(scores));
    fmt::print(out, "overall coverage {:.3f} over {} held-out observations\n", coverage, total);
    return kOk;
}

// ---- score ---------------------------------------------------------------------

struct ScoreArgs {
    Common common;
    bool paired = false;
    std::string first;
    std::string second;
    std::string archive;
    std::string series;
    std::string design;
    std::string runs;
    std::uint64_t seed = 20240501;
    std::string out = "scores.csv";
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
    const fs::path dir = a.common.out();
    if (a.paired) {
        require_files({{"--first", a.first}, {"--second", a.second}});
        const ScoreTable table = compare_models(io::read_scores(a.first), io::read_scores(a.second));
        io::write_text(dir / "comparison.csv", io::comparison_csv(table));
        io::write_text(dir / "comparison.json", io::comparison_json(table));
        fmt::print(out, "median per-run difference (first - second): CRPS {:.6g}, MSE {:.6g}\n",
                   table.median_delta_crps(), table.median_delta_mse());
        return kOk;
    }
    require_files({{"--archive", a.archive}, {"--series", a.series}});
    const LoadedFit f = load_fit(a.archive);
    std::optional<Design> d;
    if (!a.design.empty()) {
        require_files({{"--design", a.design}});
        d = io::read_design(a.design);
        check_design_matches(f, *d);
    }
    const auto all = io::read_series(a.series);
    std::vector<int> ids = parse_id_list(a.runs);
    if (ids.empty())
        for (const auto& s : all)
            if (f.training.count(s.run_id) || d) ids.push_back(s.run_id);
    std::vector<std::string> problems;
    for (int id : ids)
        if (!find_series(all, id)) problems.push_back(fmt::format("run {} has no observations", id));
    if (!problems.empty()) throw DataValidationError(problems);

    const auto opts = prediction_options(a.seed, a.common.threads, true);
    std::vector<RunScores> scores;
    for (int id : ids) {
        const FoSSeries& s = *find_series(all, id);
        const Forecast fc = forecast_run(f, d ? &*d : nullptr, id, s.years, opts);
        scores.push_back(score_run(id, s.years, fos_values(s), *fc.band.samples));
    }
    io::write_text(dir / a.out, io::scores_csv(scores));
    fmt::print(out, "scored {} runs: median per-run CRPS {:.6g}; wrote {}\n", scores.size(), median_run_crps(scores),
               (dir / a.out).string());
    return kOk;
}

// ---- plotdata ------------------------------------------------------------------

struct PlotArgs {
    Common common;
    std::string archive;
    std::string series;
    std::string design;
    std::string runs;
    double grid_max = kDefaultHorizon;
    double grid_step = 1.0;
    std::uint64_t seed = 20240501;
    bool svg = false;
};

int cmd_plotdata(const PlotArgs& a, std::ostream& out) {
    if (!(a.grid_step > 0.0) || !(a.grid_max >= 0.0)) throw_usage({"grid needs --grid-step > 0 and --grid-max >= 0"});
    const LoadedFit f = load_fit(a.archive);
    std::optional<Design> d;
    if (!a.design.empty()) {
        require_files({{"--design", a.design}});
        d = io::read_design(a.design);
        check_design_matches(f, *d);
    }
    std::vector<FoSSeries> all;
    if (!a.series.empty()) {
        require_files({{"--series", a.series}});
        all = io::read_series(a.series);
    }
    std::vector<int> ids = parse_id_list(a.runs);
    if (ids.empty()) ids = f.archive.run_ids;

    const fs::path dir = a.common.out();
    const auto grid = make_grid(a.grid_max, a.grid_step);
    const auto opts = prediction_options(a.seed, a.common.threads, false);
    const auto score_opts = prediction_options(a.seed, a.common.threads, true);
    std::vector<RunScores> scores;
    for (int id : ids) {
        const Forecast fc = forecast_run(f, d ? &*d : nullptr, id, grid, opts);
        const std::string label = fmt::format("run{}", id);
        io::write_text(dir / fmt::format("band_{}.csv", label), io::band_csv(fc.band));
        io::write_text(dir / fmt::format("ttf_{}.json", label), io::ttf_json(fc.ttf, label, true));
        const FoSSeries* s = find_series(all, id);
        if (s) {
            const Forecast at_obs = forecast_run(f, d ? &*d : nullptr, id, s->years, score_opts);
            scores.push_back(score_run(id, s->years, fos_values(*s), *at_obs.band.samples));
        }
        if (a.svg) {
            const auto obs = s ? fos_values(*s) : std::vector<double>{};
            const std::vector<double> years = s ? s->years : std::vector<double>{};
            io::write_text(dir / fmt::format("band_{}.svg", label),
                           io::band_svg(fc.band, fmt::format("Run {} ({} model)", id, to_string(f.archive.model)),
                                        years, obs));
        }
    }
    if (!scores.empty()) io::write_text(dir / "scores.csv", io::scores_csv(scores));
    fmt::print(out, "wrote plot data for {} runs to {}\n", ids.size(), dir.string());
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Emulate factor-of-safety deterioration curves with Gaussian-process priors"};
    app.name("fosemu");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    DesignArgs design;
    auto* s_design = app.add_subcommand("design", "Generate a maximin Latin hypercube design of initial conditions");
    add_common(s_design, design.common, false);
    s_design->add_option("--n", design.n, "Number of runs");
    s_design->add_option("--seed", design.seed, "Random seed");
    s_design->add_option("--candidates", design.candidates, "Latin hypercubes compared by minimum distance");
    s_design->add_option("--out", design.out, "Output file name inside the output directory");

    SimulateArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "Generate synthetic FoS series from a truth generator");
    add_common(s_sim, sim.common, false);
    s_sim->add_option("--design", sim.design, "Design CSV (omit to generate one with --n)");
    s_sim->add_option("--n", sim.n, "Runs in a generated design");
    s_sim->add_option("--seed", sim.seed, "Random seed");
    s_sim->add_option("--truth", sim.truth, "Truth generator: bspline, two_regime or quadratic");
    s_sim->add_option("--horizon", sim.horizon, "Censoring horizon in years");

    FitArgs fit;
    auto* s_fit = app.add_subcommand("fit", "Fit the hierarchical model by MCMC");
    add_common(s_fit, fit.common, true);
    s_fit->add_option("--design", fit.design, "Design CSV");
    s_fit->add_option("--series", fit.series, "Series CSV");
    s_fit->add_option("--model", fit.model, "quadratic or bspline");
    s_fit->add_option("--sampler", fit.sampler, "nuts or mwg");
    s_fit->add_option("--chains", fit.chains, "Number of chains");
    s_fit->add_option("--iterations", fit.iterations, "Iterations per chain, warmup included");
    s_fit->add_option("--warmup", fit.warmup, "Warmup iterations per chain");
    s_fit->add_option("--seed", fit.seed, "Random seed");
    s_fit->add_option("--target-accept", fit.target_accept, "NUTS target acceptance");
    s_fit->add_option("--max-tree-depth", fit.max_tree_depth, "NUTS maximum tree depth");
    s_fit->add_option("--nugget", fit.nugget, "Correlation nugget");
    s_fit->add_option("--holdout", fit.holdout, "Run ids excluded from fitting, e.g. 3,7,20-25");

    DiagnoseArgs diag;
    auto* s_diag = app.add_subcommand("diagnose", "Convergence diagnostics for a draws file");
    add_common(s_diag, diag.common, false);
    s_diag->add_option("--draws", diag.draws, "Draws JSONL");
    s_diag->add_option("--out", diag.out, "Summary file name inside the output directory");

    PredictArgs pred;
    auto* s_pred = app.add_subcommand("predict", "Posterior FoS bands and time-to-failure distributions");
    add_common(s_pred, pred.common, true);
    s_pred->add_option("--archive", pred.archive, "Fitted model archive");
    s_pred->add_option("--runs", pred.runs, "Run ids (fitted runs, or design runs with --design)");
    s_pred->add_option("--ic", pred.ic, "New initial conditions: height,angle,cohesion,friction,permeability");
    s_pred->add_option("--design", pred.design, "Design CSV for runs that were not fitted");
    s_pred->add_option("--grid-max", pred.grid_max, "Last grid year");
    s_pred->add_option("--grid-step", pred.grid_step, "Grid spacing in years");
    s_pred->add_option("--ttf-step", pred.ttf_step, "Failure scan spacing in years");
    s_pred->add_option("--seed", pred.seed, "Random seed");
    s_pred->add_flag("--dump-draws", pred.dump_draws, "Also write per-draw FoS curves");

    ValidateArgs val;
    auto* s_val = app.add_subcommand("validate", "Predict held-out runs from their ICs and report band coverage");
    add_common(s_val, val.common, true);
    s_val->add_option("--archive", val.archive, "Fitted model archive");
    s_val->add_option("--design", val.design, "Design CSV");
    s_val->add_option("--series", val.series, "Series CSV including the held-out runs");
    s_val->add_option("--holdout", val.holdout, "Held-out run ids (default: every run not fitted)");
    s_val->add_option("--seed", val.seed, "Random seed");

    ScoreArgs score;
    auto* s_score = app.add_subcommand("score", "MSE and CRPS per run and time, or paired model differences");
    add_common(s_score, score.common, true);
    s_score->add_flag("--paired", score.paired, "Compare two score files (first minus second)");
    s_score->add_option("--first", score.first, "Scores CSV of the first model");
    s_score->add_option("--second", score.second, "Scores CSV of the second model");
    s_score->add_option("--archive", score.archive, "Fitted model archive");
    s_score->add_option("--series", score.series, "Observed series CSV");
    s_score->add_option("--design", score.design, "Design CSV, enables scoring runs that were not fitted");
    s_score->add_option("--runs", score.runs, "Run ids to score");
    s_score->add_option("--seed", score.seed, "Random seed");
    s_score->add_option("--out", score.out, "Scores file name inside the output directory");

    PlotArgs plot;
    auto* s_plot = app.add_subcommand("plotdata", "Band, TTF and score files plus optional SVG plots");
    add_common(s_plot, plot.common, true);
    s_plot->add_option("--archive", plot.archive, "Fitted model archive");
    s_plot->add_option("--series", plot.series, "Observed series CSV (points and scores)");
    s_plot->add_option("--design", plot.design, "Design CSV for runs that were not fitted");
    s_plot->add_option("--runs", plot.runs, "Run ids (default: every fitted run)");
    s_plot->add_option("--grid-max", plot.grid_max, "Last grid year");
    s_plot->add_option("--grid-step", plot.grid_step, "Grid spacing in years");
    s_plot->add_option("--seed", plot.seed, "Random seed");
    s_plot->add_flag("--svg", plot.svg, "Write SVG line plots");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (s_design->parsed()) {
            apply_config(s_design, design.common.config);
            return cmd_design(design, out);
        }
        if (s_sim->parsed()) {
            apply_config(s_sim, sim.common.config);
            return cmd_simulate(sim, out, err);
        }
        if (s_fit->parsed()) {
            apply_config(s_fit, fit.common.config);
            return cmd_fit(fit, out, err);
        }
        if (s_diag->parsed()) {
            apply_config(s_diag, diag.common.config);
            return cmd_diagnose(diag, out);
        }
        if (s_pred->parsed()) {
            apply_config(s_pred, pred.common.config);
            return cmd_predict(pred, out, err);
        }
        if (s_val->parsed()) {
            apply_config(s_val, val.common.config);
            return cmd_validate(val, out, err);
        }
        if (s_score->parsed()) {
            apply_config(s_score, score.common.config);
            return cmd_score(score, out);
        }
        if (s_plot->parsed()) {
            apply_config(s_plot, plot.common.config);
            return cmd_plotdata(plot, out);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DataValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kDataValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace fosemu::cli
