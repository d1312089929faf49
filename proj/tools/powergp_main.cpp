// powergp: behavioral switching-loss model discovery pipeline.
//
// Subcommands:
//   gen-data      simulate the training set from a device config and a grid
//   run-gp        evolve expression populations over seeded independent runs
//   select        filter the archive and keep the Pareto-optimal candidates
//   fit-surface   refit a model per condition and fit coefficient surfaces
//   validate      evaluate a (surfaced) model against a training set
//   report        render figures and a text summary from pipeline artifacts
//
// Exit codes: 0 success, 2 parse/config, 3 infeasible point, 4 numeric,
// 5 missing or stale artifact.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "powergp/dataset.hpp"
#include "powergp/device_model.hpp"
#include "powergp/fitting.hpp"
#include "powergp/gp_engine.hpp"
#include "powergp/pareto.hpp"
#include "powergp/report.hpp"
#include "powergp/util.hpp"

namespace fs = std::filesystem;
using namespace powergp;

namespace {

// ---------------------------------------------------------------------------
// Pipeline manifest: records content hashes per stage so downstream commands
// can refuse inputs that no longer match what an upstream stage produced.
// ---------------------------------------------------------------------------

class Manifest {
public:
    static Manifest open(const std::string& path) {
        Manifest m;
        m.path_ = path;
        if (fs::exists(path)) {
            try {
                m.doc_ = nlohmann::json::parse(read_text_file(path));
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError("manifest '" + path + "': " + e.what());
            }
            if (!m.doc_.contains("stages")) m.doc_["stages"] = nlohmann::json::object();
        } else {
            m.doc_ = {{"format", "powergp-manifest v1"}, {"stages", nlohmann::json::object()}};
        }
        return m;
    }

    // An input that some stage recorded as output must still hash the same.
    void verify_inputs(const std::vector<std::string>& inputs) const {
        for (const auto& [stage, record] : doc_.at("stages").items()) {
            if (!record.contains("outputs")) continue;
            for (const auto& [out_path, recorded_hash] : record.at("outputs").items()) {
                for (const std::string& input : inputs) {
                    if (fs::path(input) != fs::path(out_path)) continue;
                    const std::string current = fnv1a64_hex(read_text_file(input));
                    if (current != recorded_hash.get<std::string>()) {
                        throw MissingArtifact("stale artifact '" + input + "': content no "
                                              "longer matches the '" + stage +
                                              "' stage output recorded in the manifest");
                    }
                }
            }
        }
    }

    void record(const std::string& stage, const std::vector<std::string>& inputs,
                const std::vector<std::string>& outputs) {
        nlohmann::json entry;
        entry["inputs"] = nlohmann::json::object();
        entry["outputs"] = nlohmann::json::object();
        for (const std::string& p : inputs) {
            entry["inputs"][p] = fnv1a64_hex(read_text_file(p));
        }
        for (const std::string& p : outputs) {
            entry["outputs"][p] = fnv1a64_hex(read_text_file(p));
        }
        doc_["stages"][stage] = entry;
        write_text_file(path_, doc_.dump(2) + "\n");
    }

private:
    std::string path_;
    nlohmann::json doc_;
};

void with_manifest(const std::string& manifest_path, const std::string& stage,
                   const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs,
                   const std::function<void()>& body) {
    if (manifest_path.empty()) {
        body();
        return;
    }
    Manifest manifest = Manifest::open(manifest_path);
    manifest.verify_inputs(inputs);
    body();
    manifest.record(stage, inputs, outputs);
}

std::set<int> parse_index_set(const std::string& csv, const std::string& what) {
    std::set<int> out;
    if (csv.empty()) return out;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            out.insert(std::stoi(tok));
        } catch (const std::exception&) {
            throw ParseError("bad " + what + " entry '" + tok + "'");
        }
    }
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& device_path, const std::string& grid_path,
                 const std::string& out_path, const std::string& manifest_path) {
    with_manifest(manifest_path, "gen-data", {device_path, grid_path}, {out_path}, [&] {
        const DeviceParams device = load_device_params(device_path);
        const GridSpec grid = load_grid_spec(grid_path);
        const TrainingSet ts = generate_training_set(grid, device);
        save_training_set(ts, out_path);
        std::cout << "generated " << ts.n() * ts.m() << " vectors (n=" << ts.n()
                  << ", m=" << ts.m() << ") -> " << out_path << "\n";
    });
    return 0;
}

// ---------------------------------------------------------------------------
// run-gp
// ---------------------------------------------------------------------------

std::string run_log_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "run_%04zu.tsv", index + 1);
    return buf;
}

int cmd_run_gp(const std::string& training_path, const std::string& config_path, int runs,
               std::uint64_t seed_base, int parallel, const std::string& out_dir,
               const std::string& manifest_path) {
    if (runs < 1) throw InvariantViolation("run-gp: --runs must be >= 1");
    ensure_dir(out_dir);
    const std::string archive_path = (fs::path(out_dir) / "archive.json").string();

    std::vector<std::string> outputs = {archive_path};
    for (int r = 0; r < runs; ++r) {
        outputs.push_back((fs::path(out_dir) / run_log_name(static_cast<std::size_t>(r))).string());
    }

    with_manifest(manifest_path, "run-gp", {training_path, config_path}, outputs, [&] {
        const TrainingSet training = load_training_set(training_path);
        const RunConfig base = load_run_config(config_path);
        std::vector<RunConfig> configs(static_cast<std::size_t>(runs), base);
        for (int r = 0; r < runs; ++r) {
            configs[static_cast<std::size_t>(r)].rng_seed =
                seed_base + static_cast<std::uint64_t>(r);
        }
        // Logs are flushed as each run finishes so a failing run leaves the
        // completed ones on disk.
        auto save_log = [&](const RunResult& run, std::size_t index) {
            save_run_log(run, (fs::path(out_dir) / run_log_name(index)).string());
        };
        const ModelArchive archive = multi_run(configs, training, parallel, save_log);
        save_archive(archive, archive_path);
        std::cout << "executed " << runs << " runs; " << archive.entries.size()
                  << " distinct models -> " << archive_path << "\n";
    });
    return 0;
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

constexpr const char* kCandidateHeader =
    "rmse,f_complexity,n_run,n_gen,mu_err,sigma_err,err_max,model";

int cmd_select(const std::string& archive_path, int min_n_run, double max_err_max,
               const std::string& out_path, const std::string& manifest_path) {
    with_manifest(manifest_path, "select", {archive_path}, {out_path}, [&] {
        const ModelArchive archive = load_archive(archive_path);
        std::vector<CandidateEntry> entries;
        entries.reserve(archive.entries.size());
        for (const ArchiveEntry& a : archive.entries) {
            // The Pareto machinery requires finite objectives; sentinel-scored
            // models can never pass the err_max threshold anyway.
            if (!std::isfinite(a.rmse) || !std::isfinite(a.f_complexity)) continue;
            CandidateEntry c;
            c.objectives = {a.rmse, a.f_complexity, a.key};
            c.n_run = a.n_run;
            c.n_gen = a.n_gen;
            c.mu_err = a.mu_err;
            c.sigma_err = a.sigma_err;
            c.err_max = a.err_max;
            entries.push_back(std::move(c));
        }
        FilterThresholds thresholds;
        thresholds.min_n_run = min_n_run;
        thresholds.max_err_max = max_err_max;
        const auto candidates = filter_candidates(entries, thresholds);

        std::ostringstream out;
        out << kCandidateHeader << '\n';
        for (const CandidateEntry& c : candidates) {
            out << g17(c.objectives.rmse) << ',' << g17(c.objectives.f_complexity) << ','
                << c.n_run << ',' << g17(c.n_gen) << ',' << g17(c.mu_err) << ','
                << g17(c.sigma_err) << ',' << g17(c.err_max) << ',' << c.objectives.id << '\n';
        }
        write_text_file(out_path, out.str());
        if (candidates.empty()) {
            std::cout << "notice: no archive entry passed the thresholds (N_run >= "
                      << min_n_run << ", err_max <= " << max_err_max << "%)\n";
        } else {
            std::cout << candidates.size() << " Pareto-optimal candidates -> " << out_path
                      << "\n";
        }
    });
    return 0;
}

// ---------------------------------------------------------------------------
// fit-surface
// ---------------------------------------------------------------------------

std::vector<ConditionFit> refit_per_condition(const Expr& model, const TrainingSet& ts,
                                              int lm_max_iterations) {
    FitOptions options;
    options.max_iterations = lm_max_iterations;
    const int n_coeff = model.coefficient_count();
    std::vector<double> fs_col, vin_col, d_col, rt_col;
    std::vector<ConditionFit> fits;
    fits.reserve(ts.m());
    for (std::size_t j = 0; j < ts.m(); ++j) {
        ConditionData data = condition_slice(ts, j, fs_col, vin_col, d_col, rt_col);
        std::vector<double> start(static_cast<std::size_t>(n_coeff), 1.0);
        ConditionFit fit = nlls_fit(model, data, start, options);
        if (!fit.converged) {
            std::vector<double> small(static_cast<std::size_t>(n_coeff), 1e-6);
            ConditionFit retry = nlls_fit(model, data, small, options);
            if ((retry.converged && !fit.converged) ||
                (retry.converged == fit.converged && retry.chi_sq < fit.chi_sq)) {
                fit = retry;
            }
        }
        fit.condition_index = j;
        fits.push_back(std::move(fit));
    }
    return fits;
}

int cmd_fit_surface(const std::string& training_path, std::string model_text,
                    bool use_reference_model, std::string surface_coeffs_csv,
                    std::string force_b0_csv, int lm_max_iterations,
                    const std::string& out_path, const std::string& manifest_path) {
    with_manifest(manifest_path, "fit-surface", {training_path}, {out_path}, [&] {
        const TrainingSet ts = load_training_set(training_path);
        Expr model;
        if (use_reference_model) {
            model = reference_model();
            if (surface_coeffs_csv == "all") surface_coeffs_csv = "0,2";
            if (force_b0_csv.empty()) force_b0_csv = "0";
        } else {
            if (model_text.empty()) {
                throw ParseError("fit-surface: provide --model or --reference-model");
            }
            model = parse_expr(model_text);
        }

        std::set<int> which;
        if (surface_coeffs_csv == "all") {
            for (int k = 0; k < model.coefficient_count(); ++k) which.insert(k);
        } else {
            which = parse_index_set(surface_coeffs_csv, "--surface-coeffs");
        }
        const std::set<int> force_b0 = parse_index_set(force_b0_csv, "--force-b0-zero");

        const auto fits = refit_per_condition(model, ts, lm_max_iterations);
        const SurfacedModel sm = build_surfaced_model(model, ts.grid, fits, which, force_b0);
        save_surfaced_model(sm, out_path);

        std::cout << "model " << sm.model << "\n";
        for (std::size_t k = 0; k < sm.coefficients.size(); ++k) {
            const auto& c = sm.coefficients[k];
            if (c.kind == SurfacedModel::Coefficient::Kind::Surface) {
                std::cout << "  p" << k << ": surfaced over (v_dr, r_g)"
                          << (c.surface.force_b0_zero ? " [b0=0]" : "") << "\n";
            } else {
                std::cout << "  p" << k << ": constant " << g17(c.constant) << "\n";
            }
        }
        std::cout << "surface -> " << out_path << "\n";
    });
    return 0;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int cmd_validate(const std::string& training_path, const std::string& surface_path,
                 const std::string& mode, const std::string& out_dir,
                 const std::string& manifest_path) {
    if (mode != "surfaced" && mode != "direct") {
        throw ParseError("validate: --mode must be 'surfaced' or 'direct'");
    }
    ensure_dir(out_dir);
    const std::string errors_path = (fs::path(out_dir) / "errors.txt").string();
    const std::string hist_svg = (fs::path(out_dir) / "error_histogram.svg").string();
    const std::string hist_txt = (fs::path(out_dir) / "error_histogram.txt").string();

    with_manifest(manifest_path, "validate", {training_path, surface_path},
                  {errors_path, hist_svg, hist_txt}, [&] {
        const TrainingSet ts = load_training_set(training_path);
        const SurfacedModel sm = load_surfaced_model(surface_path);

        std::vector<ConditionFit> fits;
        if (mode == "direct") {
            if (sm.per_condition.size() != ts.m()) {
                throw InvariantViolation("validate: surfaced model stores " +
                                         std::to_string(sm.per_condition.size()) +
                                         " per-condition fits, training set has m=" +
                                         std::to_string(ts.m()));
            }
            fits = sm.per_condition;
            for (std::size_t j = 0; j < fits.size(); ++j) {
                if (fits[j].condition_index != j) {
                    throw InvariantViolation("validate: per-condition fits are not "
                                             "ordered by condition index");
                }
            }
        } else {
            fits.resize(ts.m());
            for (std::size_t j = 0; j < ts.m(); ++j) {
                fits[j].condition_index = j;
                fits[j].coeffs =
                    sm.coeffs_at(ts.conditions[j].v_dr, ts.conditions[j].r_g_on);
            }
        }
        const ErrorStats stats = percent_errors(sm.expr, fits, ts);

        std::ostringstream errors_out;
        errors_out << "# per-point relative percent errors, " << mode << " model\n";
        errors_out << "i\tj\terr_percent\n";
        std::size_t cursor = 0;
        for (std::size_t j = 0; j < ts.m(); ++j) {
            for (std::size_t i = 0; i < ts.n(); ++i) {
                errors_out << i << '\t' << j << '\t' << g17(stats.errors[cursor++]) << '\n';
            }
        }
        write_text_file(errors_path, errors_out.str());

        write_histogram_svg(hist_svg, "behavioral model error distribution (" + mode + ")",
                            "relative error [%]", stats.errors, 40, stats.mu_err,
                            stats.sigma_err);
        std::ostringstream sidecar;
        sidecar << "# histogram sidecar: mu sigma err_max, then raw errors\n";
        sidecar << g17(stats.mu_err) << ' ' << g17(stats.sigma_err) << ' '
                << g17(stats.err_max) << '\n';
        for (double e : stats.errors) sidecar << g17(e) << '\n';
        write_text_file(hist_txt, sidecar.str());

        std::cout << "mu_err=" << g17(stats.mu_err) << "% sigma_err=" << g17(stats.sigma_err)
                  << "% err_max=" << g17(stats.err_max) << "%\n";
        std::cout << "errors -> " << errors_path << "\n";
    });
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct CandidateRow {
    double rmse = 0.0, f_complexity = 0.0, n_gen = 0.0;
    double mu_err = 0.0, sigma_err = 0.0, err_max = 0.0;
    int n_run = 0;
    std::string model;
};

std::vector<CandidateRow> load_candidates(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line != kCandidateHeader) {
        throw FormatError("candidates '" + path + "': unexpected header");
    }
    std::vector<CandidateRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (int c = 0; c < 7; ++c) {
            const std::size_t pos = line.find(',', start);
            if (pos == std::string::npos) {
                throw FormatError("candidates line " + std::to_string(line_no) +
                                  ": expected 8 fields");
            }
            fields.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        fields.push_back(line.substr(start)); // model string holds no commas
        CandidateRow row;
        row.rmse = parse_double_strict(fields[0], "candidates rmse");
        row.f_complexity = parse_double_strict(fields[1], "candidates f_complexity");
        row.n_run = static_cast<int>(parse_double_strict(fields[2], "candidates n_run"));
        row.n_gen = parse_double_strict(fields[3], "candidates n_gen");
        row.mu_err = parse_double_strict(fields[4], "candidates mu_err");
        row.sigma_err = parse_double_strict(fields[5], "candidates sigma_err");
        row.err_max = parse_double_strict(fields[6], "candidates err_max");
        row.model = fields[7];
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<double> load_error_column(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::vector<double> errors;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("i\t", 0) == 0) continue;
        const std::size_t t2 = line.rfind('\t');
        if (t2 == std::string::npos) {
            throw FormatError("errors file '" + path + "': malformed row");
        }
        errors.push_back(parse_double_strict(line.substr(t2 + 1), "errors column"));
    }
    if (errors.empty()) {
        throw FormatError("errors file '" + path + "': no data rows");
    }
    return errors;
}

int cmd_report(const std::string& candidates_path, const std::string& surface_path,
               const std::string& errors_path, const std::string& out_dir,
               const std::string& manifest_path) {
    ensure_dir(out_dir);
    const std::string pareto_svg = (fs::path(out_dir) / "fig_pareto.svg").string();
    const std::string pareto_txt = (fs::path(out_dir) / "fig_pareto.txt").string();
    const std::string coeff_svg = (fs::path(out_dir) / "fig_coefficients.svg").string();
    const std::string coeff_txt = (fs::path(out_dir) / "fig_coefficients.txt").string();
    const std::string errors_svg = (fs::path(out_dir) / "fig_errors.svg").string();
    const std::string summary_path = (fs::path(out_dir) / "summary.txt").string();

    with_manifest(manifest_path, "report", {candidates_path, surface_path, errors_path},
                  {pareto_svg, pareto_txt, coeff_svg, coeff_txt, errors_svg, summary_path},
                  [&] {
        // Pareto scatter of candidate objectives.
        const auto candidates = load_candidates(candidates_path);
        Series scatter;
        scatter.label = "candidates";
        scatter.color = "#2ca02c";
        scatter.draw_line = false;
        scatter.draw_markers = true;
        for (const CandidateRow& row : candidates) {
            scatter.points.push_back({row.rmse, row.f_complexity});
        }
        write_chart_svg(pareto_svg, "candidate models: accuracy vs complexity", "RMSE [W]",
                        "F_complexity", {scatter});
        std::ostringstream pareto_side;
        pareto_side << "# rmse f_complexity n_run n_gen err_max model\n";
        for (const CandidateRow& row : candidates) {
            pareto_side << g17(row.rmse) << ' ' << g17(row.f_complexity) << ' ' << row.n_run
                        << ' ' << g17(row.n_gen) << ' ' << g17(row.err_max) << ' ' << row.model
                        << '\n';
        }
        write_text_file(pareto_txt, pareto_side.str());

        // Coefficient values per condition, one series per surfaced coefficient.
        const SurfacedModel sm = load_surfaced_model(surface_path);
        std::vector<Series> trend_series;
        std::ostringstream coeff_side;
        coeff_side << "# coeff condition_index fitted_value\n";
        const std::array<const char*, 6> palette = {"#d62728", "#1f77b4", "#2ca02c",
                                                    "#ff7f0e", "#9467bd", "#8c564b"};
        int color_index = 0;
        for (const auto& coeff : sm.coefficients) {
            if (coeff.kind != SurfacedModel::Coefficient::Kind::Surface) continue;
            const int k = coeff.surface.coeff_index;
            Series fitted;
            fitted.label = "p" + std::to_string(k) + " per condition";
            fitted.color = palette[static_cast<std::size_t>(color_index++) % palette.size()];
            fitted.draw_line = false;
            fitted.draw_markers = true;
            for (const ConditionFit& fit : sm.per_condition) {
                if (static_cast<std::size_t>(k) < fit.coeffs.size()) {
                    fitted.points.push_back({static_cast<double>(fit.condition_index),
                                             fit.coeffs[static_cast<std::size_t>(k)]});
                    coeff_side << 'p' << k << ' ' << fit.condition_index << ' '
                               << g17(fit.coeffs[static_cast<std::size_t>(k)]) << '\n';
                }
            }
            trend_series.push_back(std::move(fitted));
        }
        write_chart_svg(coeff_svg, "fitted coefficients per gate-drive condition",
                        "condition index j", "coefficient value", trend_series);
        write_text_file(coeff_txt, coeff_side.str());

        // Error histogram reconstructed from the validation output.
        const auto errors = load_error_column(errors_path);
        double mu = 0.0;
        for (double e : errors) mu += e;
        mu /= static_cast<double>(errors.size());
        double var = 0.0;
        double err_max = 0.0;
        for (double e : errors) {
            var += (e - mu) * (e - mu);
            err_max = std::max(err_max, std::abs(e));
        }
        const double sigma = std::sqrt(var / static_cast<double>(errors.size()));
        write_histogram_svg(errors_svg, "behavioral model error distribution",
                            "relative error [%]", errors, 40, mu, sigma);

        std::ostringstream summary;
        summary << "powergp pipeline report\n";
        summary << "candidates: " << candidates.size() << "\n";
        summary << "selected model: " << sm.model << "\n";
        summary << "validation: mu_err=" << g17(mu) << "% sigma_err=" << g17(sigma)
                << "% err_max=" << g17(err_max) << "%\n";
        write_text_file(summary_path, summary.str());
        std::cout << "figures -> " << out_dir << "\n";
    });
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"behavioral switching-loss modeling pipeline"};
    app.require_subcommand(1);

    std::string manifest_path;
    app.add_option("--manifest", manifest_path,
                   "pipeline manifest file (stale inputs are refused)");

    auto* gen = app.add_subcommand("gen-data", "simulate the training data set");
    std::string device_path, grid_path, gen_out;
    gen->add_option("--device", device_path, "device parameter JSON")->required();
    gen->add_option("--grid", grid_path, "grid spec JSON")->required();
    gen->add_option("--out", gen_out, "output training-set file")->required();

    auto* rungp = app.add_subcommand("run-gp", "run seeded GP searches");
    std::string training_path, run_config_path, run_out_dir;
    int runs = 50;
    std::uint64_t seed_base = 1;
    int parallel = 1;
    rungp->add_option("--training", training_path, "training-set file")->required();
    rungp->add_option("--run-config", run_config_path, "run config JSON")->required();
    rungp->add_option("--runs", runs, "number of independent runs");
    rungp->add_option("--seed-base", seed_base, "seed of the first run");
    rungp->add_option("--parallel", parallel, "worker threads across runs");
    rungp->add_option("--out", run_out_dir, "output directory")->required();

    auto* select = app.add_subcommand("select", "filter archive to Pareto candidates");
    std::string archive_path, select_out;
    int min_n_run = 6;
    double max_err_max = 80.0;
    select->add_option("--archive", archive_path, "archive JSON")->required();
    select->add_option("--min-nrun", min_n_run, "minimum N_run");
    select->add_option("--max-errmax", max_err_max, "maximum err_max percent");
    select->add_option("--out", select_out, "output candidates CSV")->required();

    auto* fitsurf = app.add_subcommand("fit-surface", "fit coefficient surfaces");
    std::string fs_training, fs_model, fs_out;
    bool use_reference = false;
    std::string surface_coeffs = "all";
    std::string force_b0;
    int fs_lm_iter = 200;
    fitsurf->add_option("--training", fs_training, "training-set file")->required();
    fitsurf->add_option("--model", fs_model, "model canonical string");
    fitsurf->add_flag("--reference-model", use_reference,
                      "use the built-in reference behavioral model");
    fitsurf->add_option("--surface-coeffs", surface_coeffs,
                        "comma list of coefficient indices to surface, or 'all'");
    fitsurf->add_option("--force-b0-zero", force_b0,
                        "coefficient indices whose stage-2 quadratic term is pinned to 0");
    fitsurf->add_option("--lm-max-iterations", fs_lm_iter, "LM iteration cap");
    fitsurf->add_option("--out", fs_out, "output surface JSON")->required();

    auto* val = app.add_subcommand("validate", "evaluate a surfaced model");
    std::string val_training, val_surface, val_out;
    std::string val_mode = "surfaced";
    val->add_option("--training", val_training, "training-set file")->required();
    val->add_option("--surface", val_surface, "surfaced model JSON")->required();
    val->add_option("--mode", val_mode, "'surfaced' (default) or 'direct'");
    val->add_option("--out", val_out, "output directory")->required();

    auto* rep = app.add_subcommand("report", "render figures and a summary");
    std::string rep_candidates, rep_surface, rep_errors, rep_out;
    rep->add_option("--candidates", rep_candidates, "candidates CSV")->required();
    rep->add_option("--surface", rep_surface, "surfaced model JSON")->required();
    rep->add_option("--errors", rep_errors, "per-point errors file from validate")->required();
    rep->add_option("--out", rep_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            return cmd_gen_data(device_path, grid_path, gen_out, manifest_path);
        }
        if (rungp->parsed()) {
            return cmd_run_gp(training_path, run_config_path, runs, seed_base, parallel,
                              run_out_dir, manifest_path);
        }
        if (select->parsed()) {
            return cmd_select(archive_path, min_n_run, max_err_max, select_out, manifest_path);
        }
        if (fitsurf->parsed()) {
            return cmd_fit_surface(fs_training, fs_model, use_reference, surface_coeffs,
                                   force_b0, fs_lm_iter, fs_out, manifest_path);
        }
        if (val->parsed()) {
            return cmd_validate(val_training, val_surface, val_mode, val_out, manifest_path);
        }
        if (rep->parsed()) {
            return cmd_report(rep_candidates, rep_surface, rep_errors, rep_out, manifest_path);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.family());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
